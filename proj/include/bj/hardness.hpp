#pragma once
// Adversarial constructions: the weighted-quadratic hard instance, the
// Assouad perturbation cube and a KL checker for shifted Beta judges.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bj/allocation.hpp"
#include "bj/core.hpp"
#include "bj/environments.hpp"
#include "bj/special_functions.hpp"

namespace bj {

/// Below this p the dense branch is used; at and above it the 1-sparse one.
inline constexpr double kDenseBranchLimit = 2.0 - 1e-6;

enum class HardRegime { dense_p_lt_2, sparse_p_ge_2 };

struct HardInstance {
  std::vector<double> perturbed_scores;
  double objective_value = 0.0;  // V*
  HardRegime regime = HardRegime::dense_p_lt_2;
};

/// Minimizer of sum_k w_k (s_k - s*_k)^2 subject to ||s - s*||_p >= 2 eps.
/// Dense for p < 2: x_k = 2 eps w_k^(-1/(2-p)) / (sum w^(-p/(2-p)))^(1/p).
/// 1-sparse for p >= 2: x = 2 eps e_k* with k* = argmin w (lowest index).
inline HardInstance hard_instance(std::span<const double> s_star, std::span<const double> weights,
                                  double eps, const PNorm& p) {
  if (s_star.size() != weights.size() || s_star.empty()) {
    throw ValidationError(detail::concat("hard_instance: ", s_star.size(), " scores vs ",
                                         weights.size(), " weights"));
  }
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] > 0.0) || !std::isfinite(weights[k])) {
      throw ValidationError(detail::concat("hard_instance: weight w[", k, "] = ", weights[k],
                                           " must be positive"));
    }
  }
  if (!(eps > 0.0)) throw ValidationError(detail::concat("hard_instance: eps = ", eps));

  HardInstance out;
  out.perturbed_scores.assign(s_star.begin(), s_star.end());
  if (p.is_infinite() || p.value() >= kDenseBranchLimit) {
    out.regime = HardRegime::sparse_p_ge_2;
    const std::size_t k_star = argmin_lowest(weights);
    out.perturbed_scores[k_star] += 2.0 * eps;
    out.objective_value = 4.0 * eps * eps * weights[k_star];
    return out;
  }
  out.regime = HardRegime::dense_p_lt_2;
  const double pv = p.value();
  std::vector<double> log_terms(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    log_terms[k] = -pv / (2.0 - pv) * std::log(weights[k]);
  }
  const double log_sum = detail::log_sum_exp(log_terms);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    out.perturbed_scores[k] +=
        2.0 * eps * std::exp(-std::log(weights[k]) / (2.0 - pv) - log_sum / pv);
  }
  out.objective_value = 4.0 * eps * eps * std::exp(-log_sum * (2.0 - pv) / pv);
  return out;
}

struct AssouadCube {
  std::vector<double> center;
  std::vector<double> deltas;
  double threshold = 0.0;  // B0
  double radius = 0.0;     // xi(B)

  /// s* + v (.) delta for a sign vector v in {-1, +1}^K.
  std::vector<double> vertex(std::span<const int> signs) const {
    if (signs.size() != center.size()) {
      throw ValidationError("assouad vertex: sign vector has the wrong length");
    }
    std::vector<double> out(center);
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (signs[k] != 1 && signs[k] != -1) {
        throw ValidationError(detail::concat("assouad vertex: sign ", signs[k], " at ", k));
      }
      out[k] += signs[k] * deltas[k];
    }
    return out;
  }
};

/// Threshold B0 = S max_k v_k^(2/(p+2)) / (4 R_k^2) with v_k = c_j*(k) sigma^2_k,j*(k),
/// S = sum_k v_k^(p/(p+2)) and R_k = min(s_k, R - s_k).
inline double assouad_threshold(const ProblemInstance& inst, const PNorm& p) {
  const OptimalAllocation opt = optimal_allocation(inst, p);
  const double a = p.allocation_exponent();
  const double b = p.is_infinite() ? 0.0 : 2.0 / (p.value() + 2.0);
  std::vector<double> log_terms(inst.num_queries());
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < inst.num_queries(); ++k) {
    const std::size_t j = opt.best_judge[k];
    const double log_v = std::log(inst.costs[j]) + std::log(inst.variances(k, j));
    log_terms[k] = a * log_v;
    const double r_k = half_width(inst.scores[k], inst.score_range);
    if (!(r_k > 0.0)) {
      throw ValidationError(detail::concat("assouad: score s[", k, "] = ", inst.scores[k],
                                           " sits on the boundary (R_k = 0)"));
    }
    worst = std::max(worst, b * log_v - std::log(4.0 * r_k * r_k));
  }
  return std::exp(detail::log_sum_exp(log_terms) + worst);
}

/// Delta_k = 1/(4 sqrt(V*_k)) with V*_k = B v_k^(-2/(p+2)) / S, so that
/// ||Delta||_p = xi(B) = sqrt(A*_p/(16 B)).
inline AssouadCube assouad_cube(const ProblemInstance& inst, const PNorm& p, double budget) {
  validate_instance(inst);
  if (!(budget > 0.0) || !std::isfinite(budget)) {
    throw ValidationError(detail::concat("assouad: budget must be positive, got ", budget));
  }
  AssouadCube cube;
  cube.center = inst.scores;
  cube.threshold = assouad_threshold(inst, p);
  if (budget < cube.threshold) {
    throw BudgetError(detail::concat("assouad: budget ", budget, " below threshold B0 = ",
                                     cube.threshold));
  }
  const OptimalAllocation opt = optimal_allocation(inst, p);
  const double a = p.allocation_exponent();
  const double b = p.is_infinite() ? 0.0 : 2.0 / (p.value() + 2.0);
  std::vector<double> log_v(inst.num_queries());
  std::vector<double> log_terms(inst.num_queries());
  for (std::size_t k = 0; k < inst.num_queries(); ++k) {
    const std::size_t j = opt.best_judge[k];
    log_v[k] = std::log(inst.costs[j]) + std::log(inst.variances(k, j));
    log_terms[k] = a * log_v[k];
  }
  const double log_s = detail::log_sum_exp(log_terms);
  const double log_b = std::log(budget);
  cube.deltas.resize(inst.num_queries());
  for (std::size_t k = 0; k < inst.num_queries(); ++k) {
    const double log_vstar = log_b - b * log_v[k] - log_s;
    cube.deltas[k] = 0.25 * std::exp(-0.5 * log_vstar);
  }
  cube.radius = std::sqrt(opt.objective / (16.0 * budget));
  return cube;
}

/// KL(P || Q) for two shifted Beta judges sharing one affine frame.
inline double beta_kl(const BetaJudgeParams& p, const BetaJudgeParams& q) {
  auto close = [](double x, double y) {
    return std::abs(x - y) <= 1e-12 * std::max({1.0, std::abs(x), std::abs(y)});
  };
  if (!close(p.shift, q.shift) || !close(p.scale, q.scale)) {
    throw ValidationError("beta_kl: parameters live in different affine frames");
  }
  if (!(p.alpha > 0.0 && p.beta > 0.0 && q.alpha > 0.0 && q.beta > 0.0)) {
    throw ValidationError("beta_kl: shape parameters must be positive");
  }
  const double a1 = p.alpha, b1 = p.beta, a2 = q.alpha, b2 = q.beta;
  const double kl = log_beta(a2, b2) - log_beta(a1, b1) + (a1 - a2) * digamma(a1) +
                    (b1 - b2) * digamma(b1) + (a2 + b2 - a1 - b1) * digamma(a1 + b1);
  return std::max(kl, 0.0);
}

inline constexpr double kKlBoundNull = 71485.0 / 3528.0;
inline constexpr double kKlBoundAdjacent = 10880.0 / 441.0;

struct KlGridRow {
  double q = 0.0;
  double d = 0.0;
  double kl_null = 0.0;      // max of both directions, null vs +Delta
  double kl_adjacent = 0.0;  // max of both directions, +Delta vs -Delta
  double ratio_null = 0.0;   // kl / (Delta^2 / sigma^2)
  double ratio_adjacent = 0.0;
  bool pass = true;
};

struct KlGridReport {
  std::vector<KlGridRow> rows;
  double max_ratio_null = 0.0;
  double max_ratio_adjacent = 0.0;
  std::size_t violations = 0;
};

/// Sweeps q = i*step (0 < q <= 1/8) and d = i*step (|d| <= 1/8) in the
/// normalized frame s* = 1/2, R = 1, R_k = 1/2, where sigma^2 = q and
/// Delta = d, so Delta^2/sigma^2 = d^2/q.
inline KlGridReport validate_kl_bounds(int steps_per_unit = 80) {
  if (steps_per_unit < 8) throw ValidationError("kl grid: need at least 8 steps per unit");
  const int limit = steps_per_unit / 8;
  const double step = 1.0 / steps_per_unit;
  constexpr double s_star = 0.5, big_r = 1.0, r_k = 0.5;
  KlGridReport report;
  for (int iq = 1; iq <= limit; ++iq) {
    const double q = iq * step;
    const double sigma_sq = 4.0 * r_k * r_k * q;
    const BetaJudgeParams null = beta_construction(s_star, big_r, r_k, sigma_sq, 0.0);
    for (int id = -limit; id <= limit; ++id) {
      const double d = id * step;
      const double delta = 2.0 * r_k * d;
      const BetaJudgeParams plus = beta_construction(s_star, big_r, r_k, sigma_sq, delta);
      const BetaJudgeParams minus = beta_construction(s_star, big_r, r_k, sigma_sq, -delta);
      KlGridRow row;
      row.q = q;
      row.d = d;
      row.kl_null = std::max(beta_kl(null, plus), beta_kl(plus, null));
      row.kl_adjacent = std::max(beta_kl(plus, minus), beta_kl(minus, plus));
      if (id != 0) {
        const double scaled = delta * delta / sigma_sq;
        row.ratio_null = row.kl_null / scaled;
        row.ratio_adjacent = row.kl_adjacent / scaled;
      }
      row.pass = row.ratio_null <= kKlBoundNull && row.ratio_adjacent <= kKlBoundAdjacent;
      report.max_ratio_null = std::max(report.max_ratio_null, row.ratio_null);
      report.max_ratio_adjacent = std::max(report.max_ratio_adjacent, row.ratio_adjacent);
      if (!row.pass) ++report.violations;
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace bj
