// SPDX-License-Identifier: Apache-2.0
//
// Closed-form marginal likelihood of multi-annotator label counts under a
// Dirichlet mixture, the full negative log-likelihood, and its gradient in the
// unconstrained head coordinates (weight logits, log concentrations).
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dmn/error.hpp"
#include "dmn/mixture.hpp"
#include "dmn/special.hpp"

namespace dmn {

/// Per-observation class counts S_1..S_d. Label order never matters: the
/// counts are the only thing a likelihood ever sees.
class LabelCounts {
 public:
  LabelCounts() = default;

  explicit LabelCounts(std::vector<unsigned> counts) : counts_(std::move(counts)) {
    for (unsigned c : counts_) total_ += c;
    if (counts_.size() < 2) throw DimensionMismatch("label counts need at least two classes");
    if (total_ == 0) throw DomainError("label counts need at least one label");
  }

  /// From a label multiset over {1..d}.
  static LabelCounts from_labels(std::span<const int> labels, std::size_t d) {
    std::vector<unsigned> counts(d, 0);
    for (int y : labels) {
      if (y < 1 || static_cast<std::size_t>(y) > d) {
        throw IndexOutOfRange("label " + std::to_string(y) + " outside 1.." + std::to_string(d));
      }
      ++counts[static_cast<std::size_t>(y - 1)];
    }
    return LabelCounts(std::move(counts));
  }

  std::span<const unsigned> counts() const noexcept { return counts_; }
  unsigned operator[](std::size_t i) const { return counts_[i]; }
  std::size_t classes() const noexcept { return counts_.size(); }
  unsigned total() const noexcept { return total_; }
  /// One label carries no information about the spread of p; the
  /// likelihood stays well defined but variance is weakly identified.
  bool single_label() const noexcept { return total_ == 1; }

 private:
  std::vector<unsigned> counts_;
  unsigned total_ = 0;
};

inline constexpr double kLogAlphaClamp = 20.0;

/// Unconstrained network head: w = softmax(weight_logits), α = exp(log_alphas)
/// with log_alphas stored row-major by component (K × d). The same layout
/// carries gradients.
struct HeadCoords {
  std::size_t K = 0;
  std::size_t d = 0;
  std::vector<double> weight_logits;
  std::vector<double> log_alphas;

  HeadCoords() = default;
  HeadCoords(std::size_t components, std::size_t classes)
      : K(components), d(classes), weight_logits(components, 0.0), log_alphas(components * classes, 0.0) {}

  double& log_alpha(std::size_t k, std::size_t i) { return log_alphas[k * d + i]; }
  double log_alpha(std::size_t k, std::size_t i) const { return log_alphas[k * d + i]; }
};

namespace detail {

inline void check_head(const HeadCoords& head) {
  if (head.K == 0 || head.d < 2 || head.weight_logits.size() != head.K ||
      head.log_alphas.size() != head.K * head.d) {
    throw DimensionMismatch("head coordinates have inconsistent shape");
  }
  for (double v : head.weight_logits) {
    if (!std::isfinite(v)) throw DomainError("non-finite weight logit");
  }
  for (double v : head.log_alphas) {
    if (!std::isfinite(v)) throw DomainError("non-finite log alpha");
  }
}

inline std::vector<double> log_softmax(std::span<const double> z) {
  const double norm = log_sum_exp(z);
  std::vector<double> out(z.begin(), z.end());
  for (double& v : out) v -= norm;
  return out;
}

inline double clamped_alpha(double u) { return std::exp(std::clamp(u, -kLogAlphaClamp, kLogAlphaClamp)); }

// ln Γ(a + s) − ln Γ(a) for integer s, as the log of the rising factorial.
inline double log_rising(double a, unsigned s) {
  double total = 0.0;
  for (unsigned t = 0; t < s; ++t) total += std::log(a + t);
  return total;
}

// ψ(a + s) − ψ(a) = Σ_{t<s} 1/(a + t)
inline double digamma_rising(double a, unsigned s) {
  double total = 0.0;
  for (unsigned t = 0; t < s; ++t) total += 1.0 / (a + t);
  return total;
}

// ln B(α + S) − ln B(α)
inline double log_beta_ratio(std::span<const double> alpha, const LabelCounts& counts) {
  double sum_alpha = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    total += log_rising(alpha[i], counts[i]);
    sum_alpha += alpha[i];
  }
  return total - log_rising(sum_alpha, counts.total());
}

}  // namespace detail

/// Maps head coordinates to mixture parameters (log alphas clamped to ±20).
inline MixtureParams to_mixture(const HeadCoords& head) {
  detail::check_head(head);
  MixtureParams params;
  params.weights = detail::log_softmax(head.weight_logits);
  for (double& w : params.weights) w = std::exp(w);
  params.alphas.assign(head.K, std::vector<double>(head.d));
  for (std::size_t k = 0; k < head.K; ++k) {
    for (std::size_t i = 0; i < head.d; ++i) params.alphas[k][i] = detail::clamped_alpha(head.log_alpha(k, i));
  }
  return params;
}

/// Inverse of to_mixture for params with strictly positive weights.
inline HeadCoords to_head(const MixtureParams& params) {
  validate(params);
  HeadCoords head(params.components(), params.classes());
  for (std::size_t k = 0; k < head.K; ++k) {
    if (!(params.weights[k] > 0.0)) throw InvalidSimplex("to_head: zero weight has no logit");
    head.weight_logits[k] = std::log(params.weights[k]);
    for (std::size_t i = 0; i < head.d; ++i) head.log_alpha(k, i) = std::log(params.alphas[k][i]);
  }
  return head;
}

/// log L_j = log Σ_k w_k B(α^k + S) / B(α^k). Components with zero weight are
/// skipped.
inline double log_likelihood_one(const MixtureParams& params, const LabelCounts& counts) {
  validate(params);
  if (counts.classes() != params.classes()) {
    throw DimensionMismatch("label counts have " + std::to_string(counts.classes()) +
                            " classes, mixture has " + std::to_string(params.classes()));
  }
  std::vector<double> terms;
  terms.reserve(params.components());
  for (std::size_t k = 0; k < params.components(); ++k) {
    if (params.weights[k] == 0.0) continue;
    terms.push_back(std::log(params.weights[k]) + detail::log_beta_ratio(params.alphas[k], counts));
  }
  return log_sum_exp(terms);
}

/// −Σ_j log L_j
inline double nll(std::span<const MixtureParams> params, std::span<const LabelCounts> counts) {
  if (params.size() != counts.size()) {
    throw LengthMismatch("nll: " + std::to_string(params.size()) + " mixtures vs " +
                         std::to_string(counts.size()) + " label counts");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) total -= log_likelihood_one(params[j], counts[j]);
  return total;
}

struct NllGrad {
  double value = 0.0;
  HeadCoords grad;
};

/// Per-observation NLL and its exact gradient in head coordinates. With
/// responsibilities r_k ∝ w_k B(α^k+S)/B(α^k):
///   ∂/∂z_k   = w_k − r_k
///   ∂/∂u^k_i = −r_k α^k_i [ψ(α^k_i+S_i) − ψ(α^k_i) − ψ(A_k+m) + ψ(A_k)]
/// Log alphas outside the clamp range receive zero gradient.
inline NllGrad nll_grad(const HeadCoords& head, const LabelCounts& counts) {
  detail::check_head(head);
  if (counts.classes() != head.d) throw DimensionMismatch("label counts do not match head classes");
  const std::size_t K = head.K;
  const std::size_t d = head.d;

  const std::vector<double> log_w = detail::log_softmax(head.weight_logits);
  std::vector<std::vector<double>> alphas(K, std::vector<double>(d));
  std::vector<double> log_joint(K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < d; ++i) alphas[k][i] = detail::clamped_alpha(head.log_alpha(k, i));
    log_joint[k] = log_w[k] + detail::log_beta_ratio(alphas[k], counts);
  }
  const double log_l = log_sum_exp(log_joint);

  NllGrad out{-log_l, HeadCoords(K, d)};
  for (std::size_t k = 0; k < K; ++k) {
    const double r = std::exp(log_joint[k] - log_l);
    out.grad.weight_logits[k] = std::exp(log_w[k]) - r;
    double sum_alpha = 0.0;
    for (double a : alphas[k]) sum_alpha += a;
    const double total_term = detail::digamma_rising(sum_alpha, counts.total());
    for (std::size_t i = 0; i < d; ++i) {
      const double u = head.log_alpha(k, i);
      if (u < -kLogAlphaClamp || u > kLogAlphaClamp) continue;
      const double a = alphas[k][i];
      out.grad.log_alpha(k, i) = -r * a * (detail::digamma_rising(a, counts[i]) - total_term);
    }
  }
  return out;
}

// Two-class path written directly in terms of the Beta function and digamma.
// It shares no arithmetic with the rising-factorial Dirichlet path above, so
// the two can check each other.

/// log Σ_k w_k B(a_k + S_1, b_k + S_2) / B(a_k, b_k)
inline double log_likelihood_one_beta(const BetaMarginal& m, unsigned s1, unsigned s2) {
  validate(m);
  if (s1 + s2 == 0) throw DomainError("label counts need at least one label");
  std::vector<double> terms;
  terms.reserve(m.components());
  for (std::size_t k = 0; k < m.components(); ++k) {
    if (m.weights[k] == 0.0) continue;
    terms.push_back(std::log(m.weights[k]) + log_beta(m.a[k] + s1, m.b[k] + s2) -
                    log_beta(m.a[k], m.b[k]));
  }
  return log_sum_exp(terms);
}

/// nll_grad for d = 2 via log_beta and digamma.
inline NllGrad nll_grad_beta(const HeadCoords& head, unsigned s1, unsigned s2) {
  detail::check_head(head);
  if (head.d != 2) throw DimensionMismatch("nll_grad_beta needs a two-class head");
  const std::size_t K = head.K;
  const double m = double(s1) + double(s2);
  const std::vector<double> log_w = detail::log_softmax(head.weight_logits);
  std::vector<double> a(K), b(K), log_joint(K);
  for (std::size_t k = 0; k < K; ++k) {
    a[k] = detail::clamped_alpha(head.log_alpha(k, 0));
    b[k] = detail::clamped_alpha(head.log_alpha(k, 1));
    log_joint[k] = log_w[k] + log_beta(a[k] + s1, b[k] + s2) - log_beta(a[k], b[k]);
  }
  const double log_l = log_sum_exp(log_joint);
  NllGrad out{-log_l, HeadCoords(K, 2)};
  for (std::size_t k = 0; k < K; ++k) {
    const double r = std::exp(log_joint[k] - log_l);
    out.grad.weight_logits[k] = std::exp(log_w[k]) - r;
    const double common = digamma(a[k] + b[k] + m) - digamma(a[k] + b[k]);
    const double ga = -r * a[k] * (digamma(a[k] + s1) - digamma(a[k]) - common);
    const double gb = -r * b[k] * (digamma(b[k] + s2) - digamma(b[k]) - common);
    const double ua = head.log_alpha(k, 0);
    const double ub = head.log_alpha(k, 1);
    out.grad.log_alpha(k, 0) = (ua < -kLogAlphaClamp || ua > kLogAlphaClamp) ? 0.0 : ga;
    out.grad.log_alpha(k, 1) = (ub < -kLogAlphaClamp || ub > kLogAlphaClamp) ? 0.0 : gb;
  }
  return out;
}

}  // namespace dmn
