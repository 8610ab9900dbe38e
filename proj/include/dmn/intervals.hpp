// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "dmn/error.hpp"
#include "dmn/likelihood.hpp"
#include "dmn/mixture.hpp"
#include "dmn/network.hpp"

namespace dmn {

enum class IntervalKind { TwoSided, Upper, Lower };

/// Equal-tail credible interval for a one-vs-all class probability.
/// `nominal` is the coverage level 1 − α.
struct CredibleInterval {
  double lower = 0.0;
  double upper = 1.0;
  double nominal = 0.0;
  IntervalKind kind = IntervalKind::TwoSided;

  double width() const noexcept { return upper - lower; }
  bool contains(double p) const noexcept { return p >= lower && p <= upper; }
};

namespace detail {
inline void check_alpha_level(double alpha) {
  if (!std::isfinite(alpha) || !(alpha > 0.0) || !(alpha < 1.0)) {
    throw DomainError("interval tail mass must lie in (0, 1), got " + std::to_string(alpha));
  }
}
}  // namespace detail

/// [Q(α/2), Q(1 − α/2)]
inline CredibleInterval two_sided(const BetaMarginal& m, double alpha) {
  detail::check_alpha_level(alpha);
  const double lo = quantile(m, alpha / 2.0);
  const double hi = quantile(m, 1.0 - alpha / 2.0);
  return {std::clamp(lo, 0.0, 1.0), std::clamp(hi, 0.0, 1.0), 1.0 - alpha, IntervalKind::TwoSided};
}

/// Upper: [0, Q(1 − α)]. Lower: [Q(α), 1].
inline CredibleInterval one_sided(const BetaMarginal& m, double alpha, IntervalKind side) {
  detail::check_alpha_level(alpha);
  switch (side) {
    case IntervalKind::Upper:
      return {0.0, std::clamp(quantile(m, 1.0 - alpha), 0.0, 1.0), 1.0 - alpha, side};
    case IntervalKind::Lower:
      return {std::clamp(quantile(m, alpha), 0.0, 1.0), 1.0, 1.0 - alpha, side};
    case IntervalKind::TwoSided:
      break;
  }
  return two_sided(m, alpha);
}

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
  CredibleInterval interval;
};

/// Predictive summary of the one-vs-all probability of class_index (0-based)
/// at x: mean, total variance and the two-sided interval at level 1 − α.
inline Prediction predict(const MlpModel& model, std::span<const double> x, std::size_t class_index,
                          double alpha) {
  const BetaMarginal m = marginal(to_mixture(forward(model, x)), class_index);
  return {mean(m), variance(m), two_sided(m, alpha)};
}

}  // namespace dmn
