#pragma once
// Allocation policies driven through a JudgeSampler: Uniform, Oracle and
// the two-phase Est-IVWE (bounded and Gaussian schedules).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bj/allocation.hpp"
#include "bj/core.hpp"
#include "bj/estimation.hpp"
#include "bj/sampler.hpp"

namespace bj {

enum class PolicyKind { uniform, oracle, est_ivwe_bounded, est_ivwe_gaussian };

inline PolicyKind parse_policy(const std::string& name) {
  if (name == "uniform") return PolicyKind::uniform;
  if (name == "oracle") return PolicyKind::oracle;
  if (name == "est_ivwe_bounded") return PolicyKind::est_ivwe_bounded;
  if (name == "est_ivwe_gaussian") return PolicyKind::est_ivwe_gaussian;
  throw ValidationError("unknown policy '" + name +
                        "' (expected uniform, oracle, est_ivwe_bounded or est_ivwe_gaussian)");
}

inline std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::uniform:
      return "uniform";
    case PolicyKind::oracle:
      return "oracle";
    case PolicyKind::est_ivwe_bounded:
      return "est_ivwe_bounded";
    case PolicyKind::est_ivwe_gaussian:
      return "est_ivwe_gaussian";
  }
  return "uniform";
}

struct PolicyDiagnostics {
  std::vector<std::size_t> best_judge;  // judge used in Phase II per query
  Grid<double> sigma_hat;               // Phase I scale estimates
  Grid<double> variance_proxies;        // proxies handed to IVWE
  double explore_budget = 0.0;
  double exploit_budget = 0.0;
  std::int64_t n0 = 0;
  double tau = 0.0;
  std::size_t floored_variances = 0;
  std::size_t pooled_mean_fallbacks = 0;

  friend bool operator==(const PolicyDiagnostics&, const PolicyDiagnostics&) = default;
};

struct PolicyResult {
  std::vector<double> estimate;
  double spent = 0.0;
  IntegerAllocation counts;  // both phases
  PolicyDiagnostics diagnostics;

  friend bool operator==(const PolicyResult&, const PolicyResult&) = default;
};

enum class ScheduleRegime { bounded_p_ge_2, bounded_p_lt_2, gaussian };

struct EstIvweSchedule {
  std::int64_t n0 = 2;
  double tau = 0.0;
  ScheduleRegime regime = ScheduleRegime::gaussian;
};

/// log(4KJ/delta).
inline double schedule_log_term(std::size_t k_count, std::size_t j_count, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError(detail::concat("delta must lie in (0, 1), got ", delta));
  }
  return std::log(4.0 * static_cast<double>(k_count) * static_cast<double>(j_count) / delta);
}

/// Bounded-score schedule. With L = log(4KJ/delta):
/// p >= 2: N0 = (2B)^(1/3) (R^2 L)^(2/3);
/// p < 2:  N0 = 2^(p/(2p+2)) R^((3p+2)/(2p+2)) L^((3p+2)/(4p+4)) B^((p+2)/(4p+4));
/// rounded up to an integer >= 2, and tau = R sqrt(2L/(N0 - 1)).
inline EstIvweSchedule est_ivwe_bounded_schedule(std::size_t k_count, std::size_t j_count,
                                                 double score_range, double budget,
                                                 const PNorm& p, double delta) {
  if (!(budget > 0.0)) throw ValidationError(detail::concat("budget must be positive, got ", budget));
  const double l = schedule_log_term(k_count, j_count, delta);
  const double r = score_range;
  EstIvweSchedule out;
  double raw = 0.0;
  if (p.is_infinite() || p.value() >= 2.0) {
    out.regime = ScheduleRegime::bounded_p_ge_2;
    raw = std::cbrt(2.0 * budget) * std::pow(r * r * l, 2.0 / 3.0);
  } else {
    out.regime = ScheduleRegime::bounded_p_lt_2;
    const double pv = p.value();
    raw = std::pow(2.0, pv / (2.0 * pv + 2.0)) * std::pow(r, (3.0 * pv + 2.0) / (2.0 * pv + 2.0)) *
          std::pow(l, (3.0 * pv + 2.0) / (4.0 * pv + 4.0)) *
          std::pow(budget, (pv + 2.0) / (4.0 * pv + 4.0));
  }
  out.n0 = std::max<std::int64_t>(2, static_cast<std::int64_t>(std::ceil(raw)));
  out.tau = r * std::sqrt(2.0 * l / static_cast<double>(out.n0 - 1));
  return out;
}

/// Gaussian schedule: N0 = 1 + ceil(16 log(4KJ/delta)), tau = 0.
inline EstIvweSchedule est_ivwe_gaussian_schedule(std::size_t k_count, std::size_t j_count,
                                                  double delta) {
  const double l = schedule_log_term(k_count, j_count, delta);
  return {1 + static_cast<std::int64_t>(std::ceil(16.0 * l)), 0.0, ScheduleRegime::gaussian};
}

namespace detail {

inline void check_costs(const JudgeSampler& sampler, std::span<const double> costs) {
  if (costs.size() != sampler.num_judges()) {
    throw ValidationError(concat("sampler has ", sampler.num_judges(), " judges but ",
                                 costs.size(), " costs were given"));
  }
  if (sampler.num_queries() == 0 || costs.empty()) {
    throw ValidationError("policy needs at least one query and one judge");
  }
  for (std::size_t j = 0; j < costs.size(); ++j) {
    if (!(costs[j] > 0.0) || !std::isfinite(costs[j])) {
      throw ValidationError(concat("nonpositive cost c[", j, "] = ", costs[j]));
    }
  }
}

inline void check_budget(double budget) {
  if (!(budget > 0.0) || !std::isfinite(budget)) {
    throw ValidationError(concat("budget must be positive and finite, got ", budget));
  }
}

inline void draw(const JudgeSampler& sampler, const Grid<std::int64_t>& counts, Phase phase,
                 SampleLog& log, Rng& rng) {
  for (std::size_t k = 0; k < counts.rows(); ++k) {
    for (std::size_t j = 0; j < counts.cols(); ++j) {
      for (std::int64_t n = 0; n < counts(k, j); ++n) {
        log.record(k, j, phase, sampler.sample(k, j, rng));
      }
    }
  }
}

inline Grid<std::int64_t> add_counts(const Grid<std::int64_t>& a, const Grid<std::int64_t>& b) {
  Grid<std::int64_t> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

// Largest B' with fl(B' + spent_before) <= budget.
inline double remaining_budget(double budget, double spent_before) {
  double rest = budget - spent_before;
  while (rest > 0.0 && rest + spent_before > budget) rest = std::nextafter(rest, 0.0);
  return rest;
}

// Phase II: optimal allocation under the proxies, rounded on B', sampled,
// then IVWE over Phase II samples only.
inline void exploit(const JudgeSampler& sampler, std::span<const double> costs,
                    const Grid<double>& proxies, const Grid<std::int64_t>& explore_counts,
                    double budget, const PNorm& p, SampleLog& log, Rng& rng,
                    PolicyResult& out) {
  const double explore_cost = budget_spent(explore_counts, costs);
  const double rest = remaining_budget(budget, explore_cost);
  if (!(rest > 0.0)) {
    throw BudgetError(concat("insufficient budget: exploration costs ", explore_cost,
                             " and leaves nothing of B = ", budget));
  }
  const OptimalAllocation plan = optimal_allocation(proxies, costs, p);
  IntegerAllocation phase2 = round_allocation(plan.weights, costs, rest);

  // Per-phase sums and the canonical total can differ in the last ulp.
  Grid<std::int64_t> total = add_counts(explore_counts, phase2.counts);
  while (budget_spent(total, costs) > budget) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < phase2.counts.size(); ++i) {
      if (phase2.counts.data()[i] > phase2.counts.data()[worst]) worst = i;
    }
    if (phase2.counts.data()[worst] <= 1) {
      throw StarvedQueryError(concat("query starved: budget ", budget,
                               " cannot cover exploration plus one pull per query"));
    }
    --phase2.counts.data()[worst];
    --total.data()[worst];
  }

  draw(sampler, phase2.counts, Phase::exploitation, log, rng);

  const std::size_t k_count = sampler.num_queries();
  const std::size_t j_count = sampler.num_judges();
  out.estimate.assign(k_count, 0.0);
  std::vector<double> means(j_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t j = 0; j < j_count; ++j) {
      means[j] = sample_mean(log.samples(k, j, Phase::exploitation));
    }
    out.estimate[k] = ivwe_aggregate(means, phase2.counts.row(k), proxies.row(k));
  }
  out.counts = IntegerAllocation{total, budget};
  out.spent = budget_spent(total, costs);
  out.diagnostics.best_judge = plan.best_judge;
  out.diagnostics.variance_proxies = proxies;
  out.diagnostics.explore_budget = explore_cost;
  out.diagnostics.exploit_budget = rest;
}

}  // namespace detail

/// Phase I: every pair pulled n0 times.
inline SampleLog explore(const JudgeSampler& sampler, std::int64_t n0, Rng& rng) {
  SampleLog log(sampler.num_queries(), sampler.num_judges());
  Grid<std::int64_t> counts(sampler.num_queries(), sampler.num_judges(), n0);
  detail::draw(sampler, counts, Phase::exploration, log, rng);
  return log;
}

/// Every pair pulled B/(K sum_j c_j) times, the remainder by largest
/// remainder. Each query is estimated by IVWE with per-pair sample-variance
/// proxies, or by the pooled mean when some pair has fewer than 2 samples.
inline PolicyResult policy_uniform(const JudgeSampler& sampler, std::span<const double> costs,
                                   double score_range, double budget, Rng& rng) {
  detail::check_costs(sampler, costs);
  detail::check_budget(budget);
  const std::size_t k_count = sampler.num_queries();
  const std::size_t j_count = sampler.num_judges();

  const Grid<std::int64_t> once(k_count, j_count, 1);
  const double sweep = budget_spent(once, costs);
  if (budget < sweep) {
    throw BudgetError(detail::concat("insufficient budget: uniform needs B >= K sum c = ", sweep,
                                     ", got ", budget));
  }
  detail::CompensatedSum cost_sum;
  for (double c : costs) cost_sum.add(c);
  ContinuousAllocation omega{Grid<double>(k_count, j_count)};
  const double denom = static_cast<double>(k_count) * cost_sum.value();
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t j = 0; j < j_count; ++j) omega.weights(k, j) = costs[j] / denom;
  }
  IntegerAllocation alloc = round_allocation(omega, costs, budget);
  // The floor tolerance may leave a pair at zero when B = K sum c exactly.
  for (std::size_t i = 0; i < alloc.counts.size(); ++i) {
    if (alloc.counts.data()[i] == 0) alloc.counts.data()[i] = 1;
  }
  while (alloc.spent(costs) > budget) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < alloc.counts.size(); ++i) {
      if (alloc.counts.data()[i] > alloc.counts.data()[worst]) worst = i;
    }
    if (alloc.counts.data()[worst] <= 1) {
      throw BudgetError(detail::concat("insufficient budget: uniform cannot afford one pull per pair within B = ", budget));
    }
    --alloc.counts.data()[worst];
  }

  SampleLog log(k_count, j_count);
  detail::draw(sampler, alloc.counts, Phase::exploitation, log, rng);

  PolicyResult out;
  out.estimate.assign(k_count, 0.0);
  out.diagnostics.variance_proxies = Grid<double>(k_count, j_count, 0.0);
  const double floor = variance_floor(score_range);
  std::vector<double> means(j_count);
  std::vector<double> proxies(j_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    bool degenerate = false;
    for (std::size_t j = 0; j < j_count; ++j) {
      const auto xs = log.samples(k, j, Phase::exploitation);
      means[j] = sample_mean(xs);
      if (xs.size() < 2) {
        degenerate = true;
        continue;
      }
      const double v = sample_variance(xs);
      if (v < floor) ++out.diagnostics.floored_variances;
      proxies[j] = std::max(v, floor);
      out.diagnostics.variance_proxies(k, j) = proxies[j];
    }
    if (degenerate) {
      detail::CompensatedSum pooled;
      std::int64_t n = 0;
      for (std::size_t j = 0; j < j_count; ++j) {
        for (double x : log.samples(k, j, Phase::exploitation)) pooled.add(x);
        n += alloc.counts(k, j);
      }
      out.estimate[k] = pooled.value() / static_cast<double>(n);
      ++out.diagnostics.pooled_mean_fallbacks;
    } else {
      out.estimate[k] = ivwe_aggregate(means, alloc.counts.row(k), proxies);
    }
  }
  out.counts = alloc;
  out.spent = alloc.spent(costs);
  out.diagnostics.exploit_budget = budget;
  return out;
}

/// IVWE under the closed-form optimal allocation of the true variances.
inline PolicyResult policy_oracle(const ProblemInstance& inst, const JudgeSampler& sampler,
                                  double budget, const PNorm& p, Rng& rng) {
  detail::check_costs(sampler, inst.costs);
  detail::check_budget(budget);
  if (sampler.num_queries() != inst.num_queries()) {
    throw ValidationError("oracle: sampler and instance disagree on K");
  }
  const OptimalAllocation plan = optimal_allocation(inst, p);
  IntegerAllocation alloc = round_allocation(plan.weights, inst.costs, budget);

  SampleLog log(inst.num_queries(), inst.num_judges());
  detail::draw(sampler, alloc.counts, Phase::exploitation, log, rng);

  PolicyResult out;
  out.estimate.assign(inst.num_queries(), 0.0);
  std::vector<double> means(inst.num_judges());
  for (std::size_t k = 0; k < inst.num_queries(); ++k) {
    for (std::size_t j = 0; j < inst.num_judges(); ++j) {
      means[j] = sample_mean(log.samples(k, j, Phase::exploitation));
    }
    out.estimate[k] = ivwe_aggregate(means, alloc.counts.row(k), inst.variances.row(k));
  }
  out.counts = alloc;
  out.spent = alloc.spent(inst.costs);
  out.diagnostics.best_judge = plan.best_judge;
  out.diagnostics.variance_proxies = inst.variances;
  out.diagnostics.exploit_budget = budget;
  return out;
}

/// Two-phase Est-IVWE for bounded scores. Requires B >= 2 N0 K sum_j c_j
/// with N0 computed from B.
inline PolicyResult policy_est_ivwe_bounded(const JudgeSampler& sampler,
                                            std::span<const double> costs, double score_range,
                                            double budget, const PNorm& p, double delta,
                                            Rng& rng) {
  detail::check_costs(sampler, costs);
  detail::check_budget(budget);
  const std::size_t k_count = sampler.num_queries();
  const std::size_t j_count = sampler.num_judges();
  const EstIvweSchedule sched =
      est_ivwe_bounded_schedule(k_count, j_count, score_range, budget, p, delta);
  const Grid<std::int64_t> explore_counts(k_count, j_count, sched.n0);
  const double explore_cost = budget_spent(explore_counts, costs);
  if (budget < 2.0 * explore_cost) {
    throw BudgetError(detail::concat("insufficient budget: B = ", budget,
                                     " < 2 N0 K sum c = ", 2.0 * explore_cost, " (N0 = ",
                                     sched.n0, ")"));
  }

  SampleLog log = explore(sampler, sched.n0, rng);
  PolicyResult out;
  out.diagnostics.sigma_hat = Grid<double>(k_count, j_count);
  Grid<double> proxies(k_count, j_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t j = 0; j < j_count; ++j) {
      const double raw = std::sqrt(pairwise_variance(log.samples(k, j, Phase::exploration)));
      out.diagnostics.sigma_hat(k, j) = raw;
      proxies(k, j) = optimistic_variance(raw, sched.tau).proxy();
    }
  }
  detail::exploit(sampler, costs, proxies, explore_counts, budget, p, log, rng, out);
  out.diagnostics.n0 = sched.n0;
  out.diagnostics.tau = sched.tau;
  return out;
}

/// Two-phase Est-IVWE with the Gaussian schedule and plain sample-variance
/// proxies (floored at 1e-12 R^2). Requires B >= N0 K sum_j c_j.
inline PolicyResult policy_est_ivwe_gaussian(const JudgeSampler& sampler,
                                             std::span<const double> costs, double score_range,
                                             double budget, const PNorm& p, double delta,
                                             Rng& rng) {
  detail::check_costs(sampler, costs);
  detail::check_budget(budget);
  const std::size_t k_count = sampler.num_queries();
  const std::size_t j_count = sampler.num_judges();
  const EstIvweSchedule sched = est_ivwe_gaussian_schedule(k_count, j_count, delta);
  const Grid<std::int64_t> explore_counts(k_count, j_count, sched.n0);
  const double explore_cost = budget_spent(explore_counts, costs);
  if (budget < explore_cost) {
    throw BudgetError(detail::concat("insufficient budget: B = ", budget,
                                     " < N0 K sum c = ", explore_cost, " (N0 = ", sched.n0,
                                     ")"));
  }

  SampleLog log = explore(sampler, sched.n0, rng);
  PolicyResult out;
  out.diagnostics.sigma_hat = Grid<double>(k_count, j_count);
  Grid<double> proxies(k_count, j_count);
  const double floor = variance_floor(score_range);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t j = 0; j < j_count; ++j) {
      const double v = sample_variance(log.samples(k, j, Phase::exploration));
      if (v < floor) ++out.diagnostics.floored_variances;
      proxies(k, j) = std::max(v, floor);
      out.diagnostics.sigma_hat(k, j) = std::sqrt(v);
    }
  }
  detail::exploit(sampler, costs, proxies, explore_counts, budget, p, log, rng, out);
  out.diagnostics.n0 = sched.n0;
  return out;
}

}  // namespace bj
