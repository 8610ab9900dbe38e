// SPDX-License-Identifier: Apache-2.0
//
// Bernstein-polynomial Beta mixtures approximating a density on [0, 1], with
// numerical KL and total-variation distances to the target.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dmn/error.hpp"
#include "dmn/mixture.hpp"
#include "dmn/special.hpp"

namespace dmn {

struct TargetDensity {
  std::string name;
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
};

/// Degree-m Bernstein mixture: component k = Beta(k, m − k + 1) with weight
/// cdf(k/m) − cdf((k − 1)/m), k = 1..m.
inline BetaMarginal bernstein_mixture(const TargetDensity& target, std::size_t degree) {
  if (degree == 0) throw DomainError("Bernstein degree must be at least 1");
  BetaMarginal mix;
  mix.weights.reserve(degree);
  mix.a.reserve(degree);
  mix.b.reserve(degree);
  const double m = double(degree);
  double prev = target.cdf(0.0);
  for (std::size_t k = 1; k <= degree; ++k) {
    const double next = k == degree ? target.cdf(1.0) : target.cdf(double(k) / m);
    mix.weights.push_back(std::max(0.0, next - prev));
    mix.a.push_back(double(k));
    mix.b.push_back(m - double(k) + 1.0);
    prev = next;
  }
  double sum = 0.0;
  for (double w : mix.weights) sum += w;
  for (double& w : mix.weights) w /= sum;
  validate(mix);
  return mix;
}

inline constexpr double kKlMargin = 1e-6;
inline constexpr std::size_t kKlDefaultGrid = 20001;

struct DivergenceTerms {
  double kl = 0.0;
  double tv = 0.0;
};

/// KL(f ‖ f_B) and TV(f, f_B) by composite Simpson over grid_n nodes on
/// [1e-6, 1 − 1e-6]; 0·log 0 counts as 0. grid_n is rounded up to odd.
inline DivergenceTerms divergence(const TargetDensity& target, const BetaMarginal& approx, std::size_t grid_n) {
  if (grid_n < 3) grid_n = 3;
  if (grid_n % 2 == 0) ++grid_n;
  const double lo = kKlMargin;
  const double hi = 1.0 - kKlMargin;
  const double h = (hi - lo) / double(grid_n - 1);
  double kl = 0.0;
  double tv = 0.0;
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double x = i + 1 == grid_n ? hi : lo + h * double(i);
    const double f = target.pdf(x);
    const double g = pdf(approx, x);
    if (!(g > 0.0)) {
      if (f > 0.0) throw NonPositiveApprox("approximating density vanishes at x=" + std::to_string(x));
    }
    const double wgt = (i == 0 || i + 1 == grid_n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    if (f > 0.0) kl += wgt * f * std::log(f / g);
    tv += wgt * std::fabs(f - g);
  }
  return {kl * h / 3.0, 0.5 * tv * h / 3.0};
}

inline double kl_divergence(const TargetDensity& target, const BetaMarginal& approx,
                            std::size_t grid_n = kKlDefaultGrid) {
  return divergence(target, approx, grid_n).kl;
}

inline double tv_distance(const TargetDensity& target, const BetaMarginal& approx,
                          std::size_t grid_n = kKlDefaultGrid) {
  return divergence(target, approx, grid_n).tv;
}

namespace targets {

inline TargetDensity uniform() {
  return {"uniform", [](double) { return 1.0; }, [](double x) { return x; }};
}

/// f(p) = 2p, cdf p²
inline TargetDensity linear() {
  return {"linear", [](double x) { return 2.0 * x; }, [](double x) { return x * x; }};
}

inline TargetDensity beta(double a, double b) {
  const double lb = log_beta(a, b);
  return {"beta(" + std::to_string(a) + "," + std::to_string(b) + ")",
          [=](double x) {
            if (x <= 0.0 || x >= 1.0) return 0.0;
            return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lb);
          },
          [=](double x) { return reg_inc_beta(std::clamp(x, 0.0, 1.0), a, b); }};
}

/// ½ Beta(2, 8) + ½ Beta(8, 2)
inline TargetDensity bimodal() {
  const auto left = beta(2.0, 8.0);
  const auto right = beta(8.0, 2.0);
  return {"bimodal", [=](double x) { return 0.5 * left.pdf(x) + 0.5 * right.pdf(x); },
          [=](double x) { return 0.5 * left.cdf(x) + 0.5 * right.cdf(x); }};
}

/// 0.5 on [0, ½), 1.5 on [½, 1]
inline TargetDensity step() {
  return {"step", [](double x) { return x < 0.5 ? 0.5 : 1.5; },
          [](double x) { return x < 0.5 ? 0.5 * x : 0.25 + 1.5 * (x - 0.5); }};
}

inline std::vector<TargetDensity> builtin() { return {uniform(), linear(), beta(2.0, 5.0), bimodal(), step()}; }

/// Looks up a built-in target by name: uniform, linear, beta25, bimodal, step.
inline TargetDensity by_name(const std::string& name) {
  if (name == "uniform") return uniform();
  if (name == "linear") return linear();
  if (name == "beta25") return beta(2.0, 5.0);
  if (name == "bimodal") return bimodal();
  if (name == "step") return step();
  throw DomainError("unknown target density '" + name + "'");
}

}  // namespace targets

}  // namespace dmn
