// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dmn/likelihood.hpp"
#include "oracles.hpp"

using namespace dmn;

namespace {

MixtureParams random_params(std::mt19937_64& rng, std::size_t K, std::size_t d, double lo = 0.1, double hi = 50.0) {
  std::uniform_real_distribution<double> shape(std::log(lo), std::log(hi));
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  MixtureParams p;
  p.weights.resize(K);
  p.alphas.assign(K, std::vector<double>(d));
  double s = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    p.weights[k] = unif(rng);
    s += p.weights[k];
    for (double& a : p.alphas[k]) a = std::exp(shape(rng));
  }
  for (double& w : p.weights) w /= s;
  return make_mixture(p.weights, p.alphas);
}

LabelCounts random_counts(std::mt19937_64& rng, std::size_t d, unsigned m) {
  std::uniform_int_distribution<std::size_t> cls(0, d - 1);
  std::vector<unsigned> c(d, 0);
  for (unsigned t = 0; t < m; ++t) ++c[cls(rng)];
  return LabelCounts(c);
}

HeadCoords random_head(std::mt19937_64& rng, std::size_t K, std::size_t d, double spread = 2.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(-spread, spread);
  HeadCoords h(K, d);
  for (double& z : h.weight_logits) z = normal(rng);
  for (double& v : h.log_alphas) v = u(rng);
  return h;
}

// All count vectors of length d summing to m.
void compositions(std::size_t d, unsigned m, std::vector<unsigned>& cur, std::vector<std::vector<unsigned>>& out) {
  if (cur.size() + 1 == d) {
    cur.push_back(m);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (unsigned s = 0; s <= m; ++s) {
    cur.push_back(s);
    compositions(d, m - s, cur, out);
    cur.pop_back();
  }
}

double multinomial(const std::vector<unsigned>& c) {
  unsigned m = 0;
  double r = 0.0;
  for (unsigned v : c) {
    m += v;
    r -= std::lgamma(v + 1.0);
  }
  return std::exp(r + std::lgamma(m + 1.0));
}

}  // namespace

TEST(LabelCounts, ConstructionAndErrors) {
  const std::vector<int> labels{2, 1, 2, 2};
  const auto c = LabelCounts::from_labels(labels, 3);
  EXPECT_EQ(c[0], 1u);
  EXPECT_EQ(c[1], 3u);
  EXPECT_EQ(c[2], 0u);
  EXPECT_EQ(c.total(), 4u);
  EXPECT_FALSE(c.single_label());
  EXPECT_TRUE(LabelCounts({0, 1}).single_label());
  EXPECT_THROW(LabelCounts({0, 0}), DomainError);
  EXPECT_THROW(LabelCounts({1}), DimensionMismatch);
  const std::vector<int> bad{1, 4};
  EXPECT_THROW(LabelCounts::from_labels(bad, 3), IndexOutOfRange);
}

TEST(LogLikelihoodOne, KnownValues) {
  const auto uniform = make_mixture({1.0}, {{1, 1}});
  EXPECT_NEAR(log_likelihood_one(uniform, LabelCounts({1, 0})), std::log(0.5), 1e-15);
  EXPECT_NEAR(log_likelihood_one(uniform, LabelCounts({2, 1})), std::log(1.0 / 12.0), 1e-14);
  const auto uniform3 = make_mixture({1.0}, {{1, 1, 1}});
  EXPECT_NEAR(log_likelihood_one(uniform3, LabelCounts({1, 0, 0})), std::log(1.0 / 3.0), 1e-15);
}

TEST(LogLikelihoodOne, SkipsZeroWeightComponents) {
  const auto p = make_mixture({1.0, 0.0}, {{1, 1}, {5, 0.5}});
  EXPECT_NEAR(log_likelihood_one(p, LabelCounts({1, 0})), std::log(0.5), 1e-15);
}

TEST(LogLikelihoodOne, RejectsMismatchedClasses) {
  EXPECT_THROW(log_likelihood_one(make_mixture({1.0}, {{1, 1}}), LabelCounts({1, 0, 0})), DimensionMismatch);
}

TEST(LogLikelihoodOne, MatchesQuadratureTwoClasses) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<unsigned> mlab(1, 5);
  for (int trial = 0; trial < 60; ++trial) {
    const auto p = random_params(rng, 2, 2);
    const auto c = random_counts(rng, 2, mlab(rng));
    double ref = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      ref += p.weights[k] * oracle::beta_moment(p.alphas[k][0], p.alphas[k][1], c[0], c[1]);
    }
    const double got = std::exp(log_likelihood_one(p, c));
    EXPECT_TRUE(oracle::rel_close(got, ref, 1e-8)) << got << " vs " << ref;
  }
}

TEST(LogLikelihoodOne, MatchesSimplexQuadratureThreeClasses) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<unsigned> mlab(1, 5);
  for (int trial = 0; trial < 8; ++trial) {
    const auto p = random_params(rng, 2, 3, 0.5, 20.0);
    const auto c = random_counts(rng, 3, mlab(rng));
    double ref = 0.0;
    for (std::size_t k = 0; k < 2; ++k) ref += p.weights[k] * oracle::dirichlet3_moment(p.alphas[k], c.counts());
    const double got = std::exp(log_likelihood_one(p, c));
    EXPECT_TRUE(oracle::rel_close(got, ref, 1e-8)) << got << " vs " << ref;
  }
}

TEST(LogLikelihoodOne, NormalizesOverCountVectors) {
  std::mt19937_64 rng(43);
  for (std::size_t d : {2u, 3u}) {
    for (unsigned m = 1; m <= 4; ++m) {
      for (int trial = 0; trial < 5; ++trial) {
        const auto p = random_params(rng, 1 + trial % 3, d, 0.1, 50.0);
        std::vector<std::vector<unsigned>> all;
        std::vector<unsigned> cur;
        compositions(d, m, cur, all);
        double total = 0.0;
        for (const auto& c : all) total += multinomial(c) * std::exp(log_likelihood_one(p, LabelCounts(c)));
        EXPECT_NEAR(total, 1.0, 1e-8) << "d=" << d << " m=" << m;
      }
    }
  }
}

TEST(LogLikelihoodOne, ExchangeableInLabelOrder) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_params(rng, 3, 3);
    std::vector<int> labels(6);
    std::uniform_int_distribution<int> cls(1, 3);
    for (int& y : labels) y = cls(rng);
    const auto a = LabelCounts::from_labels(labels, 3);
    std::shuffle(labels.begin(), labels.end(), rng);
    const auto b = LabelCounts::from_labels(labels, 3);
    std::vector<unsigned> direct(3, 0);
    for (int y : labels) ++direct[y - 1];
    EXPECT_EQ(log_likelihood_one(p, a), log_likelihood_one(p, b));
    EXPECT_EQ(log_likelihood_one(p, a), log_likelihood_one(p, LabelCounts(direct)));
  }
}

TEST(LogLikelihoodOne, InvariantUnderComponentRelabeling) {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_params(rng, 3, 3);
    const auto c = random_counts(rng, 3, 4);
    const double before = log_likelihood_one(p, c);
    std::vector<std::size_t> perm{2, 0, 1};
    MixtureParams q;
    for (std::size_t k : perm) {
      q.weights.push_back(p.weights[k]);
      q.alphas.push_back(p.alphas[k]);
    }
    EXPECT_NEAR(log_likelihood_one(q, c), before, 1e-12 * std::max(1.0, std::fabs(before)));
  }
}

TEST(Nll, SumsObservations) {
  EXPECT_EQ(nll(std::span<const MixtureParams>{}, std::span<const LabelCounts>{}), 0.0);
  const std::vector<MixtureParams> ps(7, make_mixture({1.0}, {{1, 1}}));
  const std::vector<LabelCounts> cs(7, LabelCounts({1, 0}));
  EXPECT_NEAR(nll(ps, cs), 7 * std::log(2.0), 1e-13);

  std::mt19937_64 rng(46);
  std::vector<MixtureParams> rp;
  std::vector<LabelCounts> rc;
  double expected = 0.0;
  for (int j = 0; j < 30; ++j) {
    rp.push_back(random_params(rng, 2, 3));
    rc.push_back(random_counts(rng, 3, 3));
    expected -= log_likelihood_one(rp.back(), rc.back());
  }
  EXPECT_NEAR(nll(rp, rc), expected, 1e-12 * std::fabs(expected));
  rc.pop_back();
  EXPECT_THROW(nll(rp, rc), LengthMismatch);
}

TEST(HeadCoords, RoundTripsThroughMixture) {
  std::mt19937_64 rng(47);
  const auto p = random_params(rng, 3, 4);
  const auto back = to_mixture(to_head(p));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(back.weights[k], p.weights[k], 1e-15);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(back.alphas[k][i], p.alphas[k][i], 1e-13 * p.alphas[k][i]);
  }
  EXPECT_THROW(to_head(make_mixture({1.0, 0.0}, {{1, 1}, {1, 1}})), InvalidSimplex);
}

TEST(NllGrad, KnownValues) {
  HeadCoords h(1, 2);  // w = 1, α = (1, 1)
  const auto g = nll_grad(h, LabelCounts({1, 0}));
  EXPECT_NEAR(g.value, std::log(2.0), 1e-15);
  EXPECT_EQ(g.grad.weight_logits[0], 0.0);
  EXPECT_NEAR(g.grad.log_alpha(0, 0), -0.5, 1e-15);
  // Σ_i ∂/∂u_i: the second class contributes −1·1·(0 − ψ(3) + ψ(2)) = 0.5.
  EXPECT_NEAR(g.grad.log_alpha(0, 1), 0.5, 1e-15);
}

TEST(NllGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(48);
  std::uniform_int_distribution<unsigned> mlab(1, 6);
  const double h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t K = 1 + trial % 3, d = 2 + trial % 2;
    const auto head = random_head(rng, K, d);
    const auto counts = random_counts(rng, d, mlab(rng));
    const auto g = nll_grad(head, counts);
    EXPECT_NEAR(g.value, -log_likelihood_one(to_mixture(head), counts), 1e-12 * std::max(1.0, g.value));

    std::vector<double> flat(head.weight_logits);
    flat.insert(flat.end(), head.log_alphas.begin(), head.log_alphas.end());
    auto f = [&](const std::vector<double>& v) {
      HeadCoords x(K, d);
      std::copy(v.begin(), v.begin() + K, x.weight_logits.begin());
      std::copy(v.begin() + K, v.end(), x.log_alphas.begin());
      return nll_grad(x, counts).value;
    };
    std::vector<double> analytic(g.grad.weight_logits);
    analytic.insert(analytic.end(), g.grad.log_alphas.begin(), g.grad.log_alphas.end());
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double fd = oracle::central_diff(f, flat, i, h);
      EXPECT_TRUE(oracle::rel_close(analytic[i], fd, 1e-5, 1e-9)) << "trial " << trial << " coord " << i << ": "
                                                                   << analytic[i] << " vs " << fd;
    }
    ++checked;
  }
  EXPECT_GE(checked, 100);
}

TEST(NllGrad, ZeroOutsideClampRange) {
  HeadCoords h(1, 2);
  h.log_alpha(0, 0) = 25.0;
  h.log_alpha(0, 1) = -21.0;
  const auto g = nll_grad(h, LabelCounts({1, 1}));
  EXPECT_EQ(g.grad.log_alpha(0, 0), 0.0);
  EXPECT_EQ(g.grad.log_alpha(0, 1), 0.0);
  EXPECT_TRUE(std::isfinite(g.value));
  EXPECT_EQ(to_mixture(h).alphas[0][0], std::exp(20.0));
}

TEST(NllGrad, RejectsMalformedHeads) {
  HeadCoords h(2, 2);
  h.log_alphas.pop_back();
  EXPECT_THROW(nll_grad(h, LabelCounts({1, 1})), DimensionMismatch);
  HeadCoords n(1, 2);
  n.weight_logits[0] = std::nan("");
  EXPECT_THROW(nll_grad(n, LabelCounts({1, 1})), DomainError);
  EXPECT_THROW(nll_grad(HeadCoords(1, 2), LabelCounts({1, 1, 0})), DimensionMismatch);
}

TEST(BetaPath, AgreesWithDirichletPath) {
  std::mt19937_64 rng(49);
  std::uniform_real_distribution<double> u(std::log(0.1), std::log(50.0));
  std::uniform_int_distribution<unsigned> s(0, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 1 + trial % 3;
    HeadCoords h = random_head(rng, K, 2);
    for (double& v : h.log_alphas) v = u(rng);
    unsigned s1 = s(rng), s2 = s(rng);
    if (s1 + s2 == 0) s1 = 1;
    const LabelCounts c({s1, s2});
    const auto dir = nll_grad(h, c);
    const auto beta = nll_grad_beta(h, s1, s2);
    auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)); };
    EXPECT_TRUE(close(dir.value, beta.value)) << dir.value << " " << beta.value;
    for (std::size_t i = 0; i < K; ++i) EXPECT_TRUE(close(dir.grad.weight_logits[i], beta.grad.weight_logits[i]));
    for (std::size_t i = 0; i < 2 * K; ++i) EXPECT_TRUE(close(dir.grad.log_alphas[i], beta.grad.log_alphas[i]));

    const auto params = to_mixture(h);
    const auto m = marginal(params, 0);
    EXPECT_TRUE(close(log_likelihood_one(params, c), log_likelihood_one_beta(m, s1, s2)));
    for (std::size_t k = 0; k < K; ++k) {
      EXPECT_EQ(m.a[k], params.alphas[k][0]);
      EXPECT_EQ(m.b[k], params.alphas[k][1]);
    }
  }
}
