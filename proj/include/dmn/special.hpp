// SPDX-License-Identifier: Apache-2.0
//
// Scalar special functions: log-gamma, digamma, (generalized) log-Beta,
// the regularized incomplete Beta function and log-sum-exp.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "dmn/error.hpp"

namespace dmn {

namespace detail {

inline void require_positive(double x, const char* fn) {
  if (!std::isfinite(x) || !(x > 0.0)) {
    throw DomainError(std::string(fn) + ": argument must be positive and finite, got " +
                      std::to_string(x));
  }
}

// Lanczos approximation, g = 7, n = 9.
inline constexpr double kLanczosG = 7.0;
inline constexpr std::array<double, 9> kLanczosCoef = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

// ln of the Lanczos series A(x) for x >= 0.5.
inline double lanczos_log_series(double x) {
  const double z = x - 1.0;
  double sum = kLanczosCoef[0];
  for (std::size_t i = 1; i < kLanczosCoef.size(); ++i) sum += kLanczosCoef[i] / (z + double(i));
  return std::log(sum);
}

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// ln Γ(x) for x >= 0.5: ½ln2π + (x−½)ln t − t + ln A(x), t = x + g − ½.
inline double log_gamma_lanczos(double x) {
  const double t = x + kLanczosG - 0.5;
  return kHalfLog2Pi + (x - 0.5) * std::log(t) - t + lanczos_log_series(x);
}

// ln Γ(a) − ln Γ(a + b) for a >= 0.5, b > 0, without the cancellation that
// the naive difference suffers when a >> b.
inline double log_gamma_ratio(double a, double b) {
  const double c = a + b;
  const double cgh = c + kLanczosG - 0.5;
  return (a - 0.5) * std::log1p(-b / cgh) - b * std::log(cgh) + b + lanczos_log_series(a) -
         lanczos_log_series(c);
}

}  // namespace detail

/// ln Γ(x) for x > 0.
inline double log_gamma(double x) {
  detail::require_positive(x, "log_gamma");
  if (x < 0.5) {
    // Reflection: Γ(x)Γ(1−x) = π / sin(πx); sin(πx) > 0 on (0, ½).
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) -
           detail::log_gamma_lanczos(1.0 - x);
  }
  return detail::log_gamma_lanczos(x);
}

/// ψ(x) = d/dx ln Γ(x) for x > 0.
inline double digamma(double x) {
  detail::require_positive(x, "digamma");
  const double x0 = x;
  int shifts = 0;
  while (x < 10.0) {
    x += 1.0;
    ++shifts;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // −Σ B_{2n} / (2n x^{2n}), n = 1..6
  const double tail =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760))))));
  double result = std::log(x) - 0.5 * inv - tail;
  // Largest correction last: 1/x0 dominates for tiny arguments.
  for (int k = shifts - 1; k >= 0; --k) result -= 1.0 / (x0 + k);
  return result;
}

/// ln B(a, b). Symmetric in its arguments bit for bit.
inline double log_beta(double a, double b) {
  detail::require_positive(a, "log_beta");
  detail::require_positive(b, "log_beta");
  if (a < b) std::swap(a, b);
  if (a < 0.5) return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
  return log_gamma(b) + detail::log_gamma_ratio(a, b);
}

/// Generalized ln B(α) = Σ ln Γ(α_i) − ln Γ(Σ α_i), evaluated as a chain of
/// two-argument Beta functions for accuracy when the components differ in scale.
inline double log_beta(std::span<const double> alpha) {
  if (alpha.size() < 2) throw DomainError("log_beta: need at least two components");
  for (double a : alpha) detail::require_positive(a, "log_beta");
  if (alpha.size() == 2) return log_beta(alpha[0], alpha[1]);
  // ln B(α) = Σ_{i<d−1} ln B(α_i, α_{i+1} + … + α_d)
  double rest = 0.0;
  for (double a : alpha) rest += a;
  double result = 0.0;
  for (std::size_t i = 0; i + 1 < alpha.size(); ++i) {
    rest -= alpha[i];
    if (i + 2 == alpha.size()) rest = alpha[i + 1];
    result += log_beta(alpha[i], rest);
  }
  return result;
}

namespace detail {

inline constexpr int kIncBetaMaxIter = 300;
inline constexpr double kIncBetaTol = 1e-14;

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
// Returns false when it fails to converge within the iteration cap.
inline bool inc_beta_cf(double x, double a, double b, double& out) {
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kIncBetaMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kIncBetaTol) {
      out = h;
      return true;
    }
  }
  return false;
}

inline constexpr int kIncBetaSeriesMaxTerms = 100000;
inline constexpr double kIncBetaPivotFloor = 1e-4;

// ln(1 − x) given both x and y = 1 − x, each accurate to full relative precision.
inline double log_complement(double x, double y) { return x < 0.5 ? std::log1p(-x) : std::log(y); }

// I_x(a, b) = x^a (1−x)^b / (a B(a,b)) · [1 + Σ_{n≥0} T_n],
// T_n = T_{n−1} · x (a+b+n) / (a+1+n), T_{−1} = 1. All terms positive, so it
// stays accurate where the continued fraction is poorly conditioned. The sum is
// kept as mantissa · e^shift to survive large peak terms.
inline bool inc_beta_series(double x, double y, double a, double b, double& out) {
  double term = 1.0;
  double sum = 1.0;
  double shift = 0.0;
  for (int n = 0; n < kIncBetaSeriesMaxTerms; ++n) {
    term *= x * (a + b + n) / (a + 1.0 + n);
    sum += term;
    if (sum > 1e280) {
      shift += std::log(sum);
      term /= sum;
      sum = 1.0;
    }
    if (term < kIncBetaTol * 1e-2 * sum) {
      const double log_front =
          a * log_complement(y, x) + b * log_complement(x, y) - log_beta(a, b) - std::log(a);
      out = std::exp(log_front + shift + std::log(sum));
      return true;
    }
  }
  return false;
}

inline constexpr double kIncBetaLargeShape = 1000.0;

// Positive half of the 10-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<std::array<double, 2>, 5> kGaussLegendre10{{
    {0.14887433898163122, 0.29552422471475298},
    {0.43339539412924721, 0.26926671930999652},
    {0.67940956829902444, 0.21908636251598201},
    {0.86506336668898454, 0.14945134915058036},
    {0.97390652851717174, 0.066671344308688069},
}};

// Stirling remainder ln z! − (z ln z − z + ½ ln 2πz).
inline double stirling_tail(double z) {
  const double r = 1.0 / (z * z);
  return (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / z;
}

// Both shapes ≥ kIncBetaLargeShape: the fraction needs O(√max(a,b)) terms and
// the x^a (1−x)^b prefactor cancels badly, so integrate the density instead.
// It is written relative to its mode m, ln f(m) = ½ ln(N / 2πAB) + ln(N+1) −
// μ(A) − μ(B) + μ(N) with A = a−1, B = b−1, N = A+B.
inline double inc_beta_large(double x, double y, double a, double b) {
  if (a > b) return 1.0 - inc_beta_large(y, x, b, a);
  const double A = a - 1.0;
  const double B = b - 1.0;
  const double N = A + B;
  const double mode = A / N;
  const double mode_c = B / N;
  const double log_peak = 0.5 * std::log(N / (2.0 * std::numbers::pi * A * B)) + std::log1p(N) -
                          stirling_tail(A) - stirling_tail(B) + stirling_tail(N);
  const double sd = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
  auto density = [&](double t) {
    return std::exp(log_peak + A * std::log1p((t - mode) / mode) +
                    B * std::log1p((mode - t) / mode_c));
  };
  auto integrate = [&](double lo, double hi) {
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / (0.5 * sd))));
    const double h = (hi - lo) / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
      const double mid = lo + (i + 0.5) * h;
      for (const auto& [node, weight] : kGaussLegendre10) {
        total += weight * (density(mid - 0.5 * h * node) + density(mid + 0.5 * h * node));
      }
    }
    return 0.5 * h * total;
  };
  constexpr double reach = 40.0;
  if (x <= mode) {
    const double lo = std::max(0.0, mode - reach * sd);
    return x <= lo ? 0.0 : integrate(lo, x);
  }
  const double hi = mode + reach * sd;
  return x >= hi ? 1.0 : 1.0 - integrate(x, hi);
}

}  // namespace detail

/// Regularized incomplete Beta function I_x(a, b).
inline double reg_inc_beta(double x, double a, double b) {
  detail::require_positive(a, "reg_inc_beta");
  detail::require_positive(b, "reg_inc_beta");
  if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
    throw DomainError("reg_inc_beta: x must lie in [0, 1], got " + std::to_string(x));
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  double y = 1.0 - x;
  if (std::min(a, b) >= detail::kIncBetaLargeShape) {
    return std::clamp(detail::inc_beta_large(x, y, a, b), 0.0, 1.0);
  }
  const bool flip = x > (a + 1.0) / (a + b + 2.0);
  if (flip) {
    std::swap(a, b);
    std::swap(x, y);
  }
  // Leading denominator of the fraction, 1 − (a+b)x/(a+1), without cancellation.
  const double pivot = ((1.0 - b) + (a + b) * y) / (a + 1.0);
  auto fraction = [&](double& out) {
    double cf = 0.0;
    if (!detail::inc_beta_cf(x, a, b, cf)) return false;
    const double log_front = a * detail::log_complement(y, x) + b * detail::log_complement(x, y) -
                             log_beta(a, b);
    out = std::exp(log_front) * cf / a;
    return true;
  };
  auto series = [&](bool direct, double& out) {
    double comp = 0.0;
    if (direct) return detail::inc_beta_series(x, y, a, b, out);
    if (!detail::inc_beta_series(y, x, b, a, comp)) return false;
    out = 1.0 - comp;
    return true;
  };
  const bool direct = x <= y;
  double value = 0.0;
  const bool ok = std::fabs(pivot) >= detail::kIncBetaPivotFloor
                      ? fraction(value) || series(direct, value) || series(!direct, value)
                      : series(direct, value) || series(!direct, value) || fraction(value);
  if (!ok) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "reg_inc_beta: no convergence for a=%.17g, b=%.17g, x=%.17g",
                  flip ? b : a, flip ? a : b, flip ? y : x);
    throw ConvergenceFailure(buf);
  }
  const double clamped = std::clamp(value, 0.0, 1.0);
  return flip ? 1.0 - clamped : clamped;
}

/// ln Σ exp(v_i) with the max-shift trick. −∞ entries are allowed (log of zero).
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("log_sum_exp: empty input");
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw DomainError("log_sum_exp: NaN or +inf input");
    }
    hi = std::max(hi, v);
  }
  if (values.size() == 1) return values[0];
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

}  // namespace dmn
