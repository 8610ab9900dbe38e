// SPDX-License-Identifier: Apache-2.0
//
// Multi-label datasets: synthetic generators and the CSV file format
//   x1,...,xD,m,y1,...,yM[,p1,...,pd]
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dmn/error.hpp"
#include "dmn/likelihood.hpp"
#include "dmn/mixture.hpp"
#include "dmn/special.hpp"

namespace dmn {

struct DatasetRecord {
  std::vector<double> x;
  std::vector<int> labels;  // values in 1..d
  std::optional<std::vector<double>> true_p;

  bool operator==(const DatasetRecord&) const = default;
};

struct Dataset {
  std::size_t d = 2;
  std::vector<DatasetRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::size_t features() const noexcept { return records.empty() ? 0 : records.front().x.size(); }

  bool operator==(const Dataset&) const = default;
};

inline LabelCounts label_counts(const DatasetRecord& r, std::size_t d) {
  return LabelCounts::from_labels(r.labels, d);
}

/// Two equal-weight isotropic Gaussian mixtures ψ₁, ψ₂ in the plane.
struct GaussianMixtureSpec {
  using Point = std::array<double, 2>;
  std::array<Point, 2> psi1_means{{{-2.0, 2.0}, {2.0, -2.0}}};
  std::array<Point, 2> psi2_means{{{2.0, 2.0}, {-2.0, -2.0}}};
  double variance = 0.7;

  void validate() const {
    if (!std::isfinite(variance) || !(variance > 0.0)) {
      throw DomainError("Gaussian mixture variance must be positive");
    }
  }
};

inline constexpr double kLogRatioClamp = 30.0;

/// ln ψ₁(x) − ln ψ₂(x), clamped to ±30.
inline double log_density_ratio(const GaussianMixtureSpec& spec, std::span<const double> x) {
  if (x.size() != 2) throw DimensionMismatch("Gaussian mixture features are two-dimensional");
  auto log_mix = [&](const std::array<GaussianMixtureSpec::Point, 2>& means) {
    std::array<double, 2> terms{};
    for (std::size_t c = 0; c < 2; ++c) {
      const double dx = x[0] - means[c][0];
      const double dy = x[1] - means[c][1];
      terms[c] = -(dx * dx + dy * dy) / (2.0 * spec.variance);
    }
    return log_sum_exp(terms);  // shared normalizing constants cancel
  };
  return std::clamp(log_mix(spec.psi1_means) - log_mix(spec.psi2_means), -kLogRatioClamp, kLogRatioClamp);
}

/// (ψ₁/ψ₂ + 1, ψ₂/ψ₁ + 1): parameters of the Beta law of the class-1 probability at x.
inline std::array<double, 2> beta_params_at(const GaussianMixtureSpec& spec, std::span<const double> x) {
  const double r = log_density_ratio(spec, x);
  return {std::exp(r) + 1.0, std::exp(-r) + 1.0};
}

/// Draws x from the equal-weight mixture of all four Gaussian components,
/// p ~ Beta(ψ₁/ψ₂ + 1, ψ₂/ψ₁ + 1), then m Bernoulli(p) labels (1 with
/// probability p, otherwise 2).
inline Dataset gen_gaussian_beta(const GaussianMixtureSpec& spec, std::size_t n, std::size_t m,
                                 std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw DomainError("gen_gaussian_beta: n must be at least 1");
  if (m == 0) throw DomainError("gen_gaussian_beta: need at least one label per record");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double sd = std::sqrt(spec.variance);

  Dataset out;
  out.d = 2;
  out.records.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const int c = pick(rng);
    const auto& mu = c < 2 ? spec.psi1_means[c] : spec.psi2_means[c - 2];
    DatasetRecord rec;
    rec.x = {mu[0] + sd * normal(rng), mu[1] + sd * normal(rng)};
    const auto [a, b] = beta_params_at(spec, rec.x);
    const std::array<double, 2> ab{a, b};
    const auto p = detail::sample_dirichlet(ab, rng);
    rec.labels.reserve(m);
    for (std::size_t l = 0; l < m; ++l) rec.labels.push_back(unif(rng) < p[0] ? 1 : 2);
    rec.true_p = p;
    out.records.push_back(std::move(rec));
  }
  return out;
}

using TruthModel = std::function<std::vector<double>(std::span<const double>)>;

/// For each input draws m i.i.d. labels from the categorical distribution
/// truth(x) and keeps truth(x) as ground truth.
inline Dataset gen_resampled(const TruthModel& truth, std::span<const std::vector<double>> inputs,
                             std::size_t m, std::uint64_t seed) {
  if (m == 0) throw DomainError("gen_resampled: need at least one label per record");
  std::mt19937_64 rng(seed);
  Dataset out;
  out.d = 0;
  out.records.reserve(inputs.size());
  for (const auto& x : inputs) {
    auto p = truth(x);
    detail::validate_weights(p);
    if (p.size() < 2) throw InvalidSimplex("truth model must cover at least two classes");
    if (out.d == 0) out.d = p.size();
    if (p.size() != out.d) throw DimensionMismatch("truth model changed its class count");
    std::discrete_distribution<int> draw(p.begin(), p.end());
    DatasetRecord rec;
    rec.x = x;
    rec.labels.reserve(m);
    for (std::size_t l = 0; l < m; ++l) rec.labels.push_back(draw(rng) + 1);
    rec.true_p = std::move(p);
    out.records.push_back(std::move(rec));
  }
  if (out.d == 0) out.d = 2;
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline double parse_double(std::string_view s, std::size_t line, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(line, std::string("malformed ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

inline long parse_int(std::string_view s, std::size_t line, const char* what) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(line, std::string("malformed ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

inline bool column_is(std::string_view name, char prefix, std::size_t index) {
  return name.size() > 1 && name[0] == prefix && name.substr(1) == std::to_string(index);
}

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline void write_dataset(const Dataset& data, std::ostream& os) {
  const std::size_t D = data.features();
  std::size_t max_m = 0;
  bool has_p = false;
  for (const auto& r : data.records) {
    max_m = std::max(max_m, r.labels.size());
    has_p = has_p || r.true_p.has_value();
  }
  std::string header;
  for (std::size_t i = 1; i <= D; ++i) header += "x" + std::to_string(i) + ",";
  header += "m";
  for (std::size_t i = 1; i <= max_m; ++i) header += ",y" + std::to_string(i);
  if (has_p || data.empty()) {
    for (std::size_t i = 1; i <= data.d; ++i) header += ",p" + std::to_string(i);
  }
  os << header << '\n';
  for (const auto& r : data.records) {
    if (r.x.size() != D) throw DimensionMismatch("records differ in feature count");
    std::string line;
    for (double v : r.x) line += format_double(v) + ",";
    line += std::to_string(r.labels.size());
    for (std::size_t i = 0; i < max_m; ++i) {
      line += ",";
      if (i < r.labels.size()) line += std::to_string(r.labels[i]);
    }
    if (has_p) {
      if (r.true_p && r.true_p->size() != data.d) throw DimensionMismatch("true_p has wrong dimension");
      for (std::size_t i = 0; i < data.d; ++i) {
        line += ",";
        if (r.true_p) line += format_double((*r.true_p)[i]);
      }
    }
    os << line << '\n';
  }
}

inline void write_dataset(const Dataset& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(data, os);
  if (!os) throw IoError("write to '" + path + "' failed");
}

/// Parses the CSV dataset format. The class count comes from the p columns
/// when present, else from `classes` when nonzero, else from the largest
/// label seen (at least 2).
inline Dataset read_dataset(std::istream& is, std::size_t classes = 0) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(1, "missing header");
  const auto header = detail::split_csv(detail::trim_cr(line));
  std::size_t D = 0;
  while (D < header.size() && detail::column_is(header[D], 'x', D + 1)) ++D;
  if (D >= header.size() || header[D] != "m") throw ParseError(1, "expected column 'm' after features");
  std::size_t M = 0;
  while (D + 1 + M < header.size() && detail::column_is(header[D + 1 + M], 'y', M + 1)) ++M;
  std::size_t P = 0;
  const std::size_t p0 = D + 1 + M;
  while (p0 + P < header.size() && detail::column_is(header[p0 + P], 'p', P + 1)) ++P;
  if (p0 + P != header.size()) throw ParseError(1, "unexpected column '" + std::string(header[p0 + P]) + "'");
  if (P == 1) throw ParseError(1, "need at least two probability columns");

  Dataset data;
  int max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto row = detail::trim_cr(line);
    if (row.empty()) continue;
    const auto cells = detail::split_csv(row);
    if (cells.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " columns, got " +
                                    std::to_string(cells.size()));
    }
    DatasetRecord rec;
    rec.x.reserve(D);
    for (std::size_t i = 0; i < D; ++i) rec.x.push_back(detail::parse_double(cells[i], line_no, "feature"));
    const long m = detail::parse_int(cells[D], line_no, "label count");
    if (m < 1 || static_cast<std::size_t>(m) > M) {
      throw ParseError(line_no, "label count " + std::to_string(m) + " outside 1.." + std::to_string(M));
    }
    for (std::size_t i = 0; i < M; ++i) {
      const auto cell = cells[D + 1 + i];
      if (i < static_cast<std::size_t>(m)) {
        const long y = detail::parse_int(cell, line_no, "label");
        if (y < 1) throw ParseError(line_no, "labels must be positive class numbers");
        rec.labels.push_back(static_cast<int>(y));
        max_label = std::max(max_label, static_cast<int>(y));
      } else if (!cell.empty()) {
        throw ParseError(line_no, "label column y" + std::to_string(i + 1) + " beyond m must be empty");
      }
    }
    if (P > 0 && !cells[p0].empty()) {
      std::vector<double> p;
      p.reserve(P);
      for (std::size_t i = 0; i < P; ++i) p.push_back(detail::parse_double(cells[p0 + i], line_no, "probability"));
      try {
        detail::validate_weights(p);
      } catch (const InvalidSimplex& e) {
        throw ParseError(line_no, std::string("true probabilities: ") + e.what());
      }
      rec.true_p = std::move(p);
    }
    data.records.push_back(std::move(rec));
  }
  if (P > 0) {
    data.d = P;
  } else if (classes > 0) {
    data.d = classes;
  } else {
    data.d = std::max<std::size_t>(2, static_cast<std::size_t>(max_label));
  }
  for (std::size_t j = 0; j < data.records.size(); ++j) {
    for (int y : data.records[j].labels) {
      if (static_cast<std::size_t>(y) > data.d) {
        throw ParseError(j + 2, "label " + std::to_string(y) + " exceeds class count " + std::to_string(data.d));
      }
    }
  }
  return data;
}

inline Dataset read_dataset(const std::string& path, std::size_t classes = 0) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_dataset(is, classes);
}

/// Deterministic split: the first `train_fraction` of the records train, the
/// rest test.
inline std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction) {
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * double(data.size())));
  Dataset train{data.d, {data.records.begin(), data.records.begin() + std::min(n_train, data.size())}};
  Dataset test{data.d, {data.records.begin() + std::min(n_train, data.size()), data.records.end()}};
  return {std::move(train), std::move(test)};
}

}  // namespace dmn
