// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "dmn/data.hpp"
#include "oracles.hpp"

using namespace dmn;

namespace {

// Gaussian mixture density written out directly (with normalizing constants).
double psi_density(const std::array<GaussianMixtureSpec::Point, 2>& means, double var, double x1, double x2) {
  double s = 0.0;
  for (const auto& mu : means) {
    const double r2 = (x1 - mu[0]) * (x1 - mu[0]) + (x2 - mu[1]) * (x2 - mu[1]);
    s += 0.5 * std::exp(-r2 / (2.0 * var)) / (2.0 * M_PI * var);
  }
  return s;
}

Dataset round_trip(const Dataset& d) {
  std::stringstream ss;
  write_dataset(d, ss);
  return read_dataset(ss);
}

}  // namespace

TEST(GaussianBeta, SymmetryPointGivesBetaTwoTwo) {
  const GaussianMixtureSpec spec;
  const std::vector<double> x{0.0, 0.0};
  const auto ab = beta_params_at(spec, x);
  EXPECT_DOUBLE_EQ(ab[0], 2.0);
  EXPECT_DOUBLE_EQ(ab[1], 2.0);
  const double a = ab[0], b = ab[1];
  EXPECT_DOUBLE_EQ(a / (a + b), 0.5);
  EXPECT_NEAR(a * b / ((a + b) * (a + b) * (a + b + 1)), 0.05, 1e-15);
}

TEST(GaussianBeta, ParamsMatchDirectDensityRatio) {
  const GaussianMixtureSpec spec;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double x1 = u(rng), x2 = u(rng);
    const double r = psi_density(spec.psi1_means, spec.variance, x1, x2) /
                     psi_density(spec.psi2_means, spec.variance, x1, x2);
    const std::vector<double> x{x1, x2};
    const auto ab = beta_params_at(spec, x);
    EXPECT_TRUE(oracle::rel_close(ab[0], r + 1.0, 1e-10));
    EXPECT_TRUE(oracle::rel_close(ab[1], 1.0 / r + 1.0, 1e-10));
  }
}

TEST(GaussianBeta, FarTailRatioIsClamped) {
  const GaussianMixtureSpec spec;
  const std::vector<double> x{40.0, -40.0};
  const auto ab = beta_params_at(spec, x);
  EXPECT_TRUE(std::isfinite(ab[0]));
  EXPECT_DOUBLE_EQ(ab[0], std::exp(30.0) + 1.0);
  EXPECT_DOUBLE_EQ(ab[1], std::exp(-30.0) + 1.0);
}

TEST(GaussianBeta, PsiOneModeYieldsMostlyClassOne) {
  const GaussianMixtureSpec spec;
  const std::vector<double> x{2.0, -2.0};
  const auto ab = beta_params_at(spec, x);
  EXPECT_GT(ab[0], 1e3);
  EXPECT_NEAR(ab[1], 1.0, 1e-3);
  // p ~ Beta(a, b) by gamma ratio, then one label per draw.
  std::mt19937_64 rng(11);
  std::gamma_distribution<double> ga(ab[0]), gb(ab[1]);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int ones = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double g1 = ga(rng), g2 = gb(rng);
    if (u(rng) < g1 / (g1 + g2)) ++ones;
  }
  EXPECT_GT(double(ones) / n, 0.95);
}

TEST(GaussianBeta, OriginBallHasBalancedLabels) {
  const auto data = gen_gaussian_beta(GaussianMixtureSpec{}, 100000, 2, 2024);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : data.records) {
    if (std::hypot(r.x[0], r.x[1]) < 1.0) {
      sum += double(std::count(r.labels.begin(), r.labels.end(), 1)) / double(r.labels.size());
      ++count;
    }
  }
  ASSERT_GT(count, 200u);
  EXPECT_NEAR(sum / double(count), 0.5, 0.02);
}

TEST(GaussianBeta, RecordsAreWellFormed) {
  const auto data = gen_gaussian_beta(GaussianMixtureSpec{}, 5000, 3, 5);
  ASSERT_EQ(data.size(), 5000u);
  EXPECT_EQ(data.d, 2u);
  for (const auto& r : data.records) {
    ASSERT_EQ(r.x.size(), 2u);
    ASSERT_EQ(r.labels.size(), 3u);
    for (int y : r.labels) EXPECT_TRUE(y == 1 || y == 2);
    ASSERT_TRUE(r.true_p.has_value());
    const auto& p = *r.true_p;
    ASSERT_EQ(p.size(), 2u);
    EXPECT_GE(p[0], 0.0);
    EXPECT_GE(p[1], 0.0);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-9);
  }
}

TEST(GaussianBeta, FeaturesFollowTheFourComponentMixture) {
  const auto data = gen_gaussian_beta(GaussianMixtureSpec{}, 40000, 1, 8);
  std::array<int, 4> quadrant{};
  double m1 = 0.0, m2 = 0.0;
  for (const auto& r : data.records) {
    quadrant[(r.x[0] > 0) * 2 + (r.x[1] > 0)]++;
    m1 += r.x[0];
    m2 += r.x[1];
  }
  const double n = double(data.size());
  for (int q : quadrant) EXPECT_NEAR(q / n, 0.25, 4.0 * std::sqrt(0.25 * 0.75 / n));
  // per-coordinate variance is 4 + 0.7
  EXPECT_NEAR(m1 / n, 0.0, 4.0 * std::sqrt(4.7 / n));
  EXPECT_NEAR(m2 / n, 0.0, 4.0 * std::sqrt(4.7 / n));
}

TEST(GaussianBeta, SeedDeterminism) {
  const GaussianMixtureSpec spec;
  EXPECT_EQ(gen_gaussian_beta(spec, 500, 2, 9), gen_gaussian_beta(spec, 500, 2, 9));
  EXPECT_NE(gen_gaussian_beta(spec, 500, 2, 9), gen_gaussian_beta(spec, 500, 2, 10));
}

TEST(GaussianBeta, RejectsBadArguments) {
  GaussianMixtureSpec spec;
  EXPECT_THROW(gen_gaussian_beta(spec, 0, 2, 1), DomainError);
  EXPECT_THROW(gen_gaussian_beta(spec, 10, 0, 1), DomainError);
  spec.variance = 0.0;
  EXPECT_THROW(gen_gaussian_beta(spec, 10, 2, 1), DomainError);
}

TEST(Resampled, ConstantCertainTruthGivesOnlyClassOne) {
  std::vector<std::vector<double>> xs(100, std::vector<double>{0.3});
  const auto data = gen_resampled([](std::span<const double>) { return std::vector<double>{1.0, 0.0}; }, xs, 5, 1);
  for (const auto& r : data.records) {
    for (int y : r.labels) EXPECT_EQ(y, 1);
    EXPECT_EQ(*r.true_p, (std::vector<double>{1.0, 0.0}));
  }
}

TEST(Resampled, FairCoinPairPatterns) {
  const int n = 10000;
  std::vector<std::vector<double>> xs(n, std::vector<double>{0.0});
  const auto data = gen_resampled([](std::span<const double>) { return std::vector<double>{0.5, 0.5}; }, xs, 2, 77);
  std::array<int, 3> pattern{};  // number of class-2 labels in the pair
  for (const auto& r : data.records) pattern[std::count(r.labels.begin(), r.labels.end(), 2)]++;
  const std::array<double, 3> expect{0.25, 0.5, 0.25};
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(expect[k] * (1 - expect[k]) / n);
    EXPECT_NEAR(pattern[k] / double(n), expect[k], 3.0 * se);
  }
}

TEST(Resampled, MultiClassFrequencies) {
  const int n = 20000;
  std::vector<std::vector<double>> xs(n, std::vector<double>{1.0, 2.0});
  const std::vector<double> p{0.2, 0.3, 0.5};
  const auto data = gen_resampled([&](std::span<const double>) { return p; }, xs, 1, 4);
  EXPECT_EQ(data.d, 3u);
  std::array<int, 3> c{};
  for (const auto& r : data.records) c[r.labels[0] - 1]++;
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(c[k] / double(n), p[k], 4.0 * std::sqrt(p[k] * (1 - p[k]) / n));
}

TEST(Resampled, SeedDeterminismAndTruthErrors) {
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 50; ++i) xs.push_back({i / 50.0});
  auto truth = [](std::span<const double> x) { return std::vector<double>{x[0], 1.0 - x[0]}; };
  EXPECT_EQ(gen_resampled(truth, xs, 3, 2), gen_resampled(truth, xs, 3, 2));
  auto bad = [](std::span<const double>) { return std::vector<double>{0.7, 0.7}; };
  EXPECT_THROW(gen_resampled(bad, xs, 3, 2), InvalidSimplex);
  EXPECT_THROW(gen_resampled(truth, xs, 0, 2), DomainError);
}

TEST(DatasetCsv, HeaderOnlyIsEmpty) {
  std::stringstream ss("x1,x2,m,y1,y2\n");
  const auto d = read_dataset(ss);
  EXPECT_TRUE(d.empty());
}

TEST(DatasetCsv, SingleRecordRoundTrip) {
  Dataset d;
  d.d = 2;
  d.records.push_back({{0.1, -1.0 / 3.0}, {1, 2}, std::vector<double>{0.25, 0.75}});
  EXPECT_EQ(round_trip(d), d);
  std::stringstream ss;
  write_dataset(d, ss);
  EXPECT_EQ(ss.str(), "x1,x2,m,y1,y2,p1,p2\n0.10000000000000001,-0.33333333333333331,2,1,2,0.25,0.75\n");
}

TEST(DatasetCsv, GeneratorOutputsRoundTripExactly) {
  const auto g = gen_gaussian_beta(GaussianMixtureSpec{}, 2000, 3, 31);
  EXPECT_EQ(round_trip(g), g);
  std::vector<std::vector<double>> xs;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (int i = 0; i < 300; ++i) xs.push_back({z(rng), z(rng), z(rng)});
  auto truth = [](std::span<const double> x) {
    std::vector<double> e{std::exp(x[0]), std::exp(x[1]), 1.0};
    const double s = e[0] + e[1] + e[2];
    for (auto& v : e) v /= s;
    return e;
  };
  const auto r = gen_resampled(truth, xs, 4, 9);
  EXPECT_EQ(round_trip(r), r);
}

TEST(DatasetCsv, RaggedLabelCountsAndNoTruth) {
  Dataset d;
  d.d = 3;
  d.records.push_back({{1.5}, {3}, std::nullopt});
  d.records.push_back({{-2.0}, {1, 2, 2}, std::nullopt});
  std::stringstream ss;
  write_dataset(d, ss);
  EXPECT_EQ(ss.str(), "x1,m,y1,y2,y3\n1.5,1,3,,\n-2,3,1,2,2\n");
  EXPECT_EQ(read_dataset(ss), d);
}

TEST(DatasetCsv, ClassCountFallbacks) {
  std::stringstream a("x1,m,y1\n0,1,1\n");
  EXPECT_EQ(read_dataset(a).d, 2u);
  std::stringstream b("x1,m,y1\n0,1,1\n");
  EXPECT_EQ(read_dataset(b, 4).d, 4u);
  std::stringstream c("x1,m,y1\n0,1,5\n");
  EXPECT_EQ(read_dataset(c).d, 5u);
  std::stringstream e("x1,m,y1\n0,1,5\n");
  EXPECT_THROW(read_dataset(e, 3), ParseError);
}

TEST(DatasetCsv, MalformedLabelNamesTheLine) {
  std::stringstream ss("x1,x2,m,y1,y2\n0,0,2,1,2\n1,1,2,1,two\n");
  try {
    read_dataset(ss);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(DatasetCsv, OtherMalformedInputs) {
  auto fails_at = [](const std::string& text, std::size_t line) {
    std::stringstream ss(text);
    try {
      read_dataset(ss);
    } catch (const ParseError& e) {
      return e.line() == line;
    }
    return false;
  };
  EXPECT_TRUE(fails_at("", 1));
  EXPECT_TRUE(fails_at("x1,y1\n", 1));
  EXPECT_TRUE(fails_at("x1,m,y1,q\n", 1));
  EXPECT_TRUE(fails_at("x1,m,y1,p1\n", 1));
  EXPECT_TRUE(fails_at("x1,m,y1\n0,1\n", 2));
  EXPECT_TRUE(fails_at("x1,m,y1\n0,2,1\n", 2));
  EXPECT_TRUE(fails_at("x1,m,y1,y2\n0,1,1,2\n", 2));
  EXPECT_TRUE(fails_at("x1,m,y1\nabc,1,1\n", 2));
  EXPECT_TRUE(fails_at("x1,m,y1\n0,1,0\n", 2));
  EXPECT_TRUE(fails_at("x1,m,y1,p1,p2\n0,1,1,0.5,0.6\n", 2));
}

TEST(DatasetCsv, FileIoAndMissingFile) {
  const auto dir = std::filesystem::temp_directory_path() / "dmn_test_data";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "d.csv").string();
  const auto g = gen_gaussian_beta(GaussianMixtureSpec{}, 50, 2, 3);
  write_dataset(g, path);
  EXPECT_EQ(read_dataset(path), g);
  EXPECT_THROW(read_dataset((dir / "missing.csv").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST(DatasetSplit, FirstFractionTrains) {
  const auto g = gen_gaussian_beta(GaussianMixtureSpec{}, 10, 1, 3);
  const auto [train, test] = split(g, 0.8);
  ASSERT_EQ(train.size(), 8u);
  ASSERT_EQ(test.size(), 2u);
  EXPECT_EQ(train.records[0], g.records[0]);
  EXPECT_EQ(test.records[1], g.records[9]);
}
