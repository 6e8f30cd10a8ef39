#pragma once
// The allocation objective A_p (with the lower-order term B_p), the
// closed-form optimal allocation, and integer rounding under the budget.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "bj/core.hpp"

namespace bj {

struct AllocationObjectiveValue {
  double a_p = 0.0;
  double b_p = 0.0;
};

/// A_p(omega) = (sum_k (sum_j omega_kj / (c_j sigma^2_kj))^(-p/2))^(2/p) and
/// B_p(omega) = (sum_k max_{j: omega_kj > 0} (sigma^2_kj sum_j' omega_kj' / (c_j' sigma^2_kj'))^(-p))^(1/p).
/// Both are +infinity when some query receives no weight.
inline AllocationObjectiveValue allocation_objective(const ContinuousAllocation& omega,
                                                     const Grid<double>& variances,
                                                     std::span<const double> costs,
                                                     const PNorm& p) {
  const std::size_t k_count = variances.rows();
  const std::size_t j_count = variances.cols();
  if (omega.weights.rows() != k_count || omega.weights.cols() != j_count ||
      costs.size() != j_count) {
    throw ValidationError("allocation_objective: dimension mismatch");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> log_precision(k_count);
  std::vector<double> log_min_scaled(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    detail::CompensatedSum precision;
    double min_var = inf;
    for (std::size_t j = 0; j < j_count; ++j) {
      const double w = omega.weights(k, j);
      if (w > 0.0) {
        precision.add(w / (costs[j] * variances(k, j)));
        min_var = std::min(min_var, variances(k, j));
      }
    }
    if (!(precision.value() > 0.0)) return {inf, inf};
    log_precision[k] = std::log(precision.value());
    log_min_scaled[k] = std::log(min_var) + log_precision[k];
  }

  AllocationObjectiveValue out;
  if (p.is_infinite()) {
    const double lo_prec = *std::min_element(log_precision.begin(), log_precision.end());
    const double lo_scaled = *std::min_element(log_min_scaled.begin(), log_min_scaled.end());
    out.a_p = std::exp(-lo_prec);
    out.b_p = std::exp(-lo_scaled);
    return out;
  }
  const double pv = p.value();
  std::vector<double> terms(k_count);
  for (std::size_t k = 0; k < k_count; ++k) terms[k] = -0.5 * pv * log_precision[k];
  out.a_p = std::exp((2.0 / pv) * detail::log_sum_exp(terms));
  for (std::size_t k = 0; k < k_count; ++k) terms[k] = -pv * log_min_scaled[k];
  out.b_p = std::exp(detail::log_sum_exp(terms) / pv);
  return out;
}

inline AllocationObjectiveValue allocation_objective(const ContinuousAllocation& omega,
                                                     const ProblemInstance& inst,
                                                     const PNorm& p) {
  return allocation_objective(omega, inst.variances, inst.costs, p);
}

struct OptimalAllocation {
  ContinuousAllocation weights;
  std::vector<std::size_t> best_judge;  // j*(k)
  double objective = 0.0;               // A*_p
};

/// Closed-form minimizer of A_p over the simplex. Each query puts all of its
/// weight on j*(k) = argmin_j c_j sigma^2_kj (lowest index on ties), and
/// omega*_k is proportional to (c_j* sigma^2_kj*)^(p/(p+2)).
inline OptimalAllocation optimal_allocation(const Grid<double>& variances,
                                            std::span<const double> costs, const PNorm& p) {
  const std::size_t k_count = variances.rows();
  const std::size_t j_count = variances.cols();
  if (k_count == 0 || j_count == 0 || costs.size() != j_count) {
    throw ValidationError("optimal_allocation: dimension mismatch");
  }
  OptimalAllocation out;
  out.best_judge.resize(k_count);
  out.weights.weights = Grid<double>(k_count, j_count, 0.0);

  std::vector<double> row(j_count);
  std::vector<double> log_terms(k_count);
  const double exponent = p.allocation_exponent();
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t j = 0; j < j_count; ++j) row[j] = costs[j] * variances(k, j);
    const std::size_t best = argmin_lowest(row);
    out.best_judge[k] = best;
    // log-space so extreme c*sigma^2 ratios neither underflow nor overflow.
    log_terms[k] = exponent * (std::log(costs[best]) + std::log(variances(k, best)));
  }
  const double log_norm = detail::log_sum_exp(log_terms);
  for (std::size_t k = 0; k < k_count; ++k) {
    out.weights.weights(k, out.best_judge[k]) = std::exp(log_terms[k] - log_norm);
  }
  out.objective = std::exp(p.objective_exponent() * log_norm);
  return out;
}

inline OptimalAllocation optimal_allocation(const ProblemInstance& inst, const PNorm& p) {
  return optimal_allocation(inst.variances, inst.costs, p);
}

/// Largest-remainder integerization of B * omega_kj / c_j under the
/// exact constraint sum_j c_j sum_k N_kj <= B. Pairs of queries that would
/// otherwise get no pull are served first; a positive-weight query left with
/// zero pulls raises StarvedQueryError ("query starved").
inline IntegerAllocation round_allocation(const ContinuousAllocation& omega,
                                          std::span<const double> costs, double budget) {
  const Grid<double>& w = omega.weights;
  if (w.cols() != costs.size()) throw ValidationError("round_allocation: dimension mismatch");
  if (!(budget > 0.0) || !std::isfinite(budget)) {
    throw ValidationError(detail::concat("round_allocation: budget must be positive, got ", budget));
  }
  validate_allocation(omega);

  IntegerAllocation out;
  out.budget = budget;
  out.counts = Grid<std::int64_t>(w.rows(), w.cols(), 0);

  struct Candidate {
    std::size_t k;
    std::size_t j;
    double remainder;
  };
  std::vector<Candidate> candidates;
  for (std::size_t k = 0; k < w.rows(); ++k) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      if (!(w(k, j) > 0.0)) continue;
      const double exact = budget * w(k, j) / costs[j];
      // Absorb representation error such as 3 * (1/3) = 0.99999...
      double whole = std::floor(exact + 1e-9 * std::max(1.0, exact));
      out.counts(k, j) = static_cast<std::int64_t>(whole);
      candidates.push_back({k, j, std::max(0.0, exact - whole)});
    }
  }
  // Per-judge pull totals; spent() over these equals budget_spent(counts).
  std::vector<std::int64_t> judge_totals(w.cols(), 0);
  for (std::size_t k = 0; k < w.rows(); ++k) {
    for (std::size_t j = 0; j < w.cols(); ++j) judge_totals[j] += out.counts(k, j);
  }
  auto spent = [&] {
    detail::CompensatedSum s;
    for (std::size_t j = 0; j < w.cols(); ++j) {
      s.add(costs[j] * static_cast<double>(judge_totals[j]));
    }
    return s.value();
  };

  // The floor tolerance can overshoot by one pull in rare cases.
  for (auto it = candidates.rbegin(); it != candidates.rend() && spent() > budget; ++it) {
    if (out.counts(it->k, it->j) > 0) {
      --out.counts(it->k, it->j);
      --judge_totals[it->j];
    }
  }

  std::vector<char> starved(w.rows(), 0);
  for (const auto& c : candidates) starved[c.k] = out.query_total(c.k) == 0 ? 1 : 0;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const Candidate& a, const Candidate& b) {
                     if (starved[a.k] != starved[b.k]) return starved[a.k] > starved[b.k];
                     return a.remainder > b.remainder;
                   });
  std::vector<char> served(w.rows(), 0);
  for (const auto& c : candidates) {
    // A starved query needs one pull, not one per judge.
    if (starved[c.k] && served[c.k]) continue;
    ++judge_totals[c.j];
    if (spent() <= budget) {
      ++out.counts(c.k, c.j);
      served[c.k] = 1;
    } else {
      --judge_totals[c.j];
    }
  }

  for (std::size_t k = 0; k < w.rows(); ++k) {
    bool positive = false;
    for (double x : w.row(k)) positive = positive || x > 0.0;
    if (positive && out.query_total(k) == 0) {
      throw StarvedQueryError(detail::concat("query starved: query ", k,
                                       " has positive weight but budget ", budget,
                                       " cannot afford a single pull"));
    }
  }
  return out;
}

}  // namespace bj
