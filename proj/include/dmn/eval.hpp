// SPDX-License-Identifier: Apache-2.0
//
// Experiment measurements: empirical coverage of credible intervals,
// predicted-variance maps over the plane, and classification accuracy.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dmn/data.hpp"
#include "dmn/intervals.hpp"
#include "dmn/network.hpp"

namespace dmn {

struct CoverageCurve {
  std::vector<double> levels;
  std::vector<double> coverage;
  std::size_t n_eval = 0;
};

/// 0.75, 0.76, …, 0.95
inline std::vector<double> default_levels() {
  std::vector<double> levels;
  for (int i = 75; i <= 95; ++i) levels.push_back(i / 100.0);
  return levels;
}

/// Maps an input to its predicted mixture; lets oracle heads stand in for a
/// trained network.
using HeadFn = std::function<MixtureParams(std::span<const double>)>;

inline HeadFn model_head(const MlpModel& model) {
  return [&model](std::span<const double> x) { return to_mixture(forward(model, x)); };
}

/// Fraction of records whose true probability of class_index falls inside
/// the two-sided interval, for each nominal level.
inline CoverageCurve coverage(const HeadFn& head, const Dataset& test, std::size_t class_index,
                              std::span<const double> levels) {
  for (std::size_t j = 0; j < test.size(); ++j) {
    if (!test.records[j].true_p) throw MissingGroundTruth("record " + std::to_string(j) + " has no true_p");
  }
  CoverageCurve curve;
  curve.levels.assign(levels.begin(), levels.end());
  curve.coverage.assign(levels.size(), 0.0);
  curve.n_eval = test.size();
  if (test.empty()) return curve;
  std::vector<std::size_t> hits(levels.size(), 0);
  for (const auto& r : test.records) {
    if (class_index >= r.true_p->size()) throw IndexOutOfRange("class index beyond ground truth");
    const BetaMarginal m = marginal(head(r.x), class_index);
    const double p = (*r.true_p)[class_index];
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (two_sided(m, 1.0 - levels[l]).contains(p)) ++hits[l];
    }
  }
  for (std::size_t l = 0; l < levels.size(); ++l) curve.coverage[l] = double(hits[l]) / double(test.size());
  return curve;
}

inline CoverageCurve coverage(const MlpModel& model, const Dataset& test, std::size_t class_index,
                              std::span<const double> levels) {
  return coverage(model_head(model), test, class_index, levels);
}

struct GridSpec {
  double x_min = -4.0;
  double x_max = 4.0;
  double y_min = -4.0;
  double y_max = 4.0;
  std::size_t resolution = 81;  // nodes per axis

  double x_at(std::size_t i) const {
    return resolution == 1 ? x_min : x_min + (x_max - x_min) * double(i) / double(resolution - 1);
  }
  double y_at(std::size_t j) const {
    return resolution == 1 ? y_min : y_min + (y_max - y_min) * double(j) / double(resolution - 1);
  }
};

struct VarianceMap {
  GridSpec grid;
  std::vector<double> x1, x2, variance;  // row-major over (x2 outer, x1 inner)
};

inline VarianceMap variance_map(const MlpModel& model, const GridSpec& grid, std::size_t class_index) {
  if (model.input_size() != 2) throw DimensionMismatch("variance map needs a two-feature model");
  if (grid.resolution == 0) throw DomainError("grid resolution must be positive");
  VarianceMap map;
  map.grid = grid;
  const std::size_t n = grid.resolution * grid.resolution;
  map.x1.reserve(n);
  map.x2.reserve(n);
  map.variance.reserve(n);
  for (std::size_t j = 0; j < grid.resolution; ++j) {
    for (std::size_t i = 0; i < grid.resolution; ++i) {
      const std::array<double, 2> x{grid.x_at(i), grid.y_at(j)};
      const BetaMarginal m = marginal(to_mixture(forward(model, x)), class_index);
      map.x1.push_back(x[0]);
      map.x2.push_back(x[1]);
      map.variance.push_back(variance(m));
    }
  }
  return map;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw EmptyInput("median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

/// Grid nodes near the quadrant boundaries: (|x₁| < 0.5 or |x₂| < 0.5) and ‖x‖∞ < 3.
inline bool in_axis_band(double x1, double x2) {
  return (std::fabs(x1) < 0.5 || std::fabs(x2) < 0.5) && std::max(std::fabs(x1), std::fabs(x2)) < 3.0;
}

/// Grid nodes within 0.5 of a quadrant center (±2, ±2).
inline bool in_quadrant_center(double x1, double x2) {
  const double dx = std::fabs(x1) - 2.0;
  const double dy = std::fabs(x2) - 2.0;
  return dx * dx + dy * dy < 0.25;
}

struct RegionMedians {
  double axis_band = 0.0;
  double quadrant_centers = 0.0;
};

inline RegionMedians region_medians(const VarianceMap& map) {
  std::vector<double> band, centers;
  for (std::size_t i = 0; i < map.variance.size(); ++i) {
    if (in_axis_band(map.x1[i], map.x2[i])) band.push_back(map.variance[i]);
    if (in_quadrant_center(map.x1[i], map.x2[i])) centers.push_back(map.variance[i]);
  }
  return {median(std::move(band)), median(std::move(centers))};
}

/// Most frequent label (ties to the lower class), 0-based.
inline std::size_t majority_label(const DatasetRecord& r, std::size_t d) {
  const LabelCounts counts = label_counts(r, d);
  std::size_t best = 0;
  for (std::size_t i = 1; i < d; ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  return best;
}

/// Fraction of records whose argmax predicted mean class equals the majority
/// label.
inline double accuracy(const HeadFn& head, const Dataset& test) {
  if (test.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& r : test.records) {
    const MixtureParams params = head(r.x);
    std::size_t best = 0;
    double best_mean = -1.0;
    for (std::size_t i = 0; i < params.classes(); ++i) {
      const double m = mean(marginal(params, i));
      if (m > best_mean) {
        best_mean = m;
        best = i;
      }
    }
    if (best == majority_label(r, test.d)) ++correct;
  }
  return double(correct) / double(test.size());
}

inline double accuracy(const MlpModel& model, const Dataset& test) { return accuracy(model_head(model), test); }

}  // namespace dmn
