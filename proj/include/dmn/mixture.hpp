// SPDX-License-Identifier: Apache-2.0
//
// Dirichlet mixtures on the probability simplex and their one-vs-all Beta
// mixture marginals.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dmn/error.hpp"
#include "dmn/special.hpp"

namespace dmn {

/// Mixture of K Dirichlet distributions over the (d−1)-simplex.
/// alphas[k] holds the d concentration parameters of component k.
struct MixtureParams {
  std::vector<double> weights;
  std::vector<std::vector<double>> alphas;

  std::size_t components() const noexcept { return weights.size(); }
  std::size_t classes() const noexcept { return alphas.empty() ? 0 : alphas.front().size(); }
};

/// Mixture of K Beta distributions on [0, 1]; the d = 2 case, and the form of
/// every one-vs-all marginal.
struct BetaMarginal {
  std::vector<double> weights;
  std::vector<double> a;
  std::vector<double> b;

  std::size_t components() const noexcept { return weights.size(); }
};

inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kRenormalizeTol = 1e-6;

namespace detail {

inline void validate_weights(std::span<const double> w) {
  if (w.empty()) throw InvalidSimplex("mixture needs at least one component");
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidSimplex("mixture weight is negative or non-finite");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > kSimplexTol) {
    throw InvalidSimplex("mixture weights sum to " + std::to_string(sum));
  }
}

inline void validate_alpha(double a) {
  if (!std::isfinite(a) || !(a > 0.0)) {
    throw NonPositiveAlpha("concentration parameter must be positive and finite, got " +
                           std::to_string(a));
  }
}

inline std::vector<double> renormalized(std::vector<double> w) {
  double sum = 0.0;
  for (double v : w) sum += v;
  const double drift = std::fabs(sum - 1.0);
  if (std::isfinite(sum) && drift > kSimplexTol && drift <= kRenormalizeTol) {
    for (double& v : w) v /= sum;
  }
  return w;
}

}  // namespace detail

/// Throws InvalidSimplex, NonPositiveAlpha or DimensionMismatch unless every
/// MixtureParams invariant holds.
inline void validate(const MixtureParams& params) {
  detail::validate_weights(params.weights);
  if (params.alphas.size() != params.weights.size()) {
    throw DimensionMismatch("mixture has " + std::to_string(params.weights.size()) +
                            " weights but " + std::to_string(params.alphas.size()) +
                            " alpha vectors");
  }
  const std::size_t d = params.alphas.front().size();
  if (d < 2) throw DimensionMismatch("mixture needs at least two classes");
  for (const auto& alpha : params.alphas) {
    if (alpha.size() != d) throw DimensionMismatch("alpha vectors differ in length");
    for (double a : alpha) detail::validate_alpha(a);
  }
}

inline void validate(const BetaMarginal& m) {
  detail::validate_weights(m.weights);
  if (m.a.size() != m.weights.size() || m.b.size() != m.weights.size()) {
    throw DimensionMismatch("Beta mixture parameter lengths differ");
  }
  for (double v : m.a) detail::validate_alpha(v);
  for (double v : m.b) detail::validate_alpha(v);
}

/// Builds validated params. Weights within 1e-6 of the simplex are
/// renormalized (left untouched when already within 1e-9, so stored params
/// reload bit for bit); larger deviations are rejected.
inline MixtureParams make_mixture(std::vector<double> weights,
                                  std::vector<std::vector<double>> alphas) {
  MixtureParams params{detail::renormalized(std::move(weights)), std::move(alphas)};
  validate(params);
  return params;
}

inline BetaMarginal make_beta_mixture(std::vector<double> weights, std::vector<double> a,
                                      std::vector<double> b) {
  BetaMarginal m{detail::renormalized(std::move(weights)), std::move(a), std::move(b)};
  validate(m);
  return m;
}

/// Log density at a point strictly inside the simplex.
inline double log_pdf(const MixtureParams& params, std::span<const double> p) {
  validate(params);
  const std::size_t d = params.classes();
  if (p.size() != d) throw DimensionMismatch("point dimension does not match mixture");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || !(v > 0.0) || !(v < 1.0)) {
      throw DomainError("density point must lie strictly inside the simplex");
    }
    sum += v;
  }
  if (std::fabs(sum - 1.0) > kSimplexTol) throw DomainError("density point does not sum to 1");

  std::vector<double> terms(params.components());
  for (std::size_t k = 0; k < params.components(); ++k) {
    const auto& alpha = params.alphas[k];
    double t = std::log(params.weights[k]) - log_beta(alpha);
    for (std::size_t i = 0; i < d; ++i) t += (alpha[i] - 1.0) * std::log(p[i]);
    terms[k] = t;
  }
  return log_sum_exp(terms);
}

/// Exact one-vs-all marginal of coordinate class_index: component k becomes
/// Beta(α_i, Σ_{j≠i} α_j) with its weight unchanged.
inline BetaMarginal marginal(const MixtureParams& params, std::size_t class_index) {
  validate(params);
  if (class_index >= params.classes()) {
    throw IndexOutOfRange("class index " + std::to_string(class_index) + " out of range for d=" +
                          std::to_string(params.classes()));
  }
  BetaMarginal m;
  m.weights = params.weights;
  m.a.reserve(params.components());
  m.b.reserve(params.components());
  for (const auto& alpha : params.alphas) {
    double rest = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      if (j != class_index) rest += alpha[j];
    }
    m.a.push_back(alpha[class_index]);
    m.b.push_back(rest);
  }
  return m;
}

inline double log_pdf(const BetaMarginal& m, double x) {
  if (!std::isfinite(x) || !(x > 0.0) || !(x < 1.0)) {
    throw DomainError("Beta mixture density needs x in (0, 1)");
  }
  std::vector<double> terms(m.components());
  const double lx = std::log(x);
  const double l1x = std::log1p(-x);
  for (std::size_t k = 0; k < m.components(); ++k) {
    terms[k] = std::log(m.weights[k]) + (m.a[k] - 1.0) * lx + (m.b[k] - 1.0) * l1x -
               log_beta(m.a[k], m.b[k]);
  }
  return log_sum_exp(terms);
}

inline double pdf(const BetaMarginal& m, double x) { return std::exp(log_pdf(m, x)); }

inline double cdf(const BetaMarginal& m, double x) {
  if (!std::isfinite(x) || x < 0.0 || x > 1.0) throw DomainError("cdf needs x in [0, 1]");
  double total = 0.0;
  for (std::size_t k = 0; k < m.components(); ++k) {
    if (m.weights[k] > 0.0) total += m.weights[k] * reg_inc_beta(x, m.a[k], m.b[k]);
  }
  return std::clamp(total, 0.0, 1.0);
}

inline constexpr double kQuantileTol = 1e-10;
inline constexpr int kQuantileMaxBisect = 200;
inline constexpr int kQuantileNewtonSteps = 4;

/// x with cdf(x) = q. Bisection runs over the ordered bit patterns of the
/// doubles in [0, 1], so it reaches adjacent doubles in at most 64 halvings
/// even for mass piled up against 0. A few Newton steps confined to the final
/// bracket polish the result.
inline double quantile(const BetaMarginal& m, double q) {
  validate(m);
  if (!std::isfinite(q) || !(q > 0.0) || !(q < 1.0)) {
    throw DomainError("quantile level must lie in (0, 1)");
  }
  std::uint64_t lo = std::bit_cast<std::uint64_t>(0.0);
  std::uint64_t hi = std::bit_cast<std::uint64_t>(1.0);
  double best = 0.5;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kQuantileMaxBisect && hi - lo > 1; ++it) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    const double x = std::bit_cast<double>(mid);
    const double f = cdf(m, x);
    if (std::isnan(f)) throw ConvergenceFailure("quantile: cdf evaluated to NaN");
    const double err = std::fabs(f - q);
    if (err < best_err) {
      best = x;
      best_err = err;
    }
    if (err <= kQuantileTol) break;
    if (f < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (hi - lo <= 1 && best_err > kQuantileTol) {
    // Bracket collapsed onto adjacent doubles: the jump in cdf across one ulp
    // exceeds the tolerance, so the nearer endpoint is the exact answer.
    for (std::uint64_t bits : {lo, hi}) {
      const double x = std::bit_cast<double>(bits);
      const double err = std::fabs(cdf(m, x) - q);
      if (err < best_err) {
        best = x;
        best_err = err;
      }
    }
    return best;
  }

  const double lo_x = std::bit_cast<double>(lo);
  const double hi_x = std::bit_cast<double>(hi);
  for (int step = 0; step < kQuantileNewtonSteps && best_err > 0.0; ++step) {
    if (!(best > 0.0 && best < 1.0)) break;
    const double density = pdf(m, best);
    if (!(density > 0.0) || !std::isfinite(density)) break;
    const double next = best - (cdf(m, best) - q) / density;
    if (!(next >= lo_x && next <= hi_x)) break;
    const double err = std::fabs(cdf(m, next) - q);
    if (!(err < best_err)) break;
    best = next;
    best_err = err;
  }
  if (best_err > kQuantileTol) {
    throw ConvergenceFailure("quantile: could not reach tolerance for q=" + std::to_string(q));
  }
  return best;
}

/// Σ_k w_k a_k / (a_k + b_k)
inline double mean(const BetaMarginal& m) {
  double total = 0.0;
  for (std::size_t k = 0; k < m.components(); ++k) total += m.weights[k] * m.a[k] / (m.a[k] + m.b[k]);
  return total;
}

/// Law of total variance over the components.
inline double variance(const BetaMarginal& m) {
  double second = 0.0;
  double first = 0.0;
  for (std::size_t k = 0; k < m.components(); ++k) {
    const double s = m.a[k] + m.b[k];
    const double mk = m.a[k] / s;
    const double vk = m.a[k] * m.b[k] / (s * s * (s + 1.0));
    second += m.weights[k] * (vk + mk * mk);
    first += m.weights[k] * mk;
  }
  return std::max(0.0, second - first * first);
}

namespace detail {

// ln G with G ~ Gamma(shape, 1). Shapes below one use G = G' U^{1/shape},
// G' ~ Gamma(shape + 1), in log space so tiny shapes do not underflow to 0.
template <class Rng>
double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    return std::log(gamma(rng));
  }
  std::gamma_distribution<double> gamma(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = 1.0 - unif(rng);  // (0, 1]
  return std::log(gamma(rng)) + std::log(u) / shape;
}

template <class Rng>
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  std::vector<double> logs(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) logs[i] = log_gamma_variate(alpha[i], rng);
  const double norm = log_sum_exp(logs);
  for (double& v : logs) v = std::exp(v - norm);
  return logs;
}

}  // namespace detail

/// n draws from the mixture: component k with probability w_k, then a
/// Dirichlet(α^k) point from normalized Gamma variates.
template <class Rng>
std::vector<std::vector<double>> sample(const MixtureParams& params, Rng& rng, std::size_t n) {
  validate(params);
  std::discrete_distribution<std::size_t> pick(params.weights.begin(), params.weights.end());
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(detail::sample_dirichlet(params.alphas[pick(rng)], rng));
  }
  return out;
}

}  // namespace dmn
