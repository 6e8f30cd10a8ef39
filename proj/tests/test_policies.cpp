#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "bj/environments.hpp"
#include "bj/policies.hpp"

using namespace bj;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Judge that returns s_k + j exactly: handy for checking which samples
// reach the estimate.
class FixedSampler final : public JudgeSampler {
 public:
  FixedSampler(std::size_t k, std::size_t j) : k_(k), j_(j) {}
  std::size_t num_queries() const override { return k_; }
  std::size_t num_judges() const override { return j_; }
  double sample(std::size_t k, std::size_t, Rng&) const override { return 0.1 * (k + 1); }

 private:
  std::size_t k_, j_;
};

ProblemInstance unit_instance(std::vector<double> scores, std::vector<double> var_row_major,
                              std::vector<double> costs, double r = 1.0) {
  ProblemInstance inst;
  const std::size_t k = scores.size(), j = costs.size();
  inst.scores = std::move(scores);
  inst.variances = Grid<double>(k, j, std::move(var_row_major));
  inst.costs = std::move(costs);
  inst.score_range = r;
  return validate_instance(inst);
}

}  // namespace

TEST_CASE("bounded schedule reproduces the hand-evaluated formula", "[policies][schedule]") {
  const auto s = est_ivwe_bounded_schedule(10, 3, 1.0, 1e6, PNorm::finite(2.0), 0.1);
  CHECK(s.regime == ScheduleRegime::bounded_p_ge_2);
  CHECK(s.n0 == 465);
  CHECK_THAT(s.tau, WithinAbs(0.1748161205846768, 1e-12));
  const auto inf = est_ivwe_bounded_schedule(10, 3, 1.0, 1e6, PNorm::infinity(), 0.1);
  CHECK(inf.n0 == 465);
}

TEST_CASE("bounded schedule below p = 2", "[policies][schedule]") {
  // p = 1: N0 = 2^(1/4) R^(5/4) L^(5/8) B^(3/8).
  const double l = std::log(4.0 * 10 * 3 / 0.1);
  const double raw = std::pow(2.0, 0.25) * std::pow(l, 0.625) * std::pow(1e6, 0.375);
  const auto s = est_ivwe_bounded_schedule(10, 3, 1.0, 1e6, PNorm::finite(1.0), 0.1);
  CHECK(s.regime == ScheduleRegime::bounded_p_lt_2);
  CHECK(s.n0 == static_cast<std::int64_t>(std::ceil(raw)));
  CHECK(s.n0 == 720);
  CHECK_THAT(s.tau, WithinAbs(std::sqrt(2.0 * l / 719.0), 1e-12));
  // Tiny budgets still give N0 >= 2.
  CHECK(est_ivwe_bounded_schedule(1, 1, 1e-3, 1e-6, PNorm::finite(2.0), 0.5).n0 == 2);
}

TEST_CASE("gaussian schedule", "[policies][schedule]") {
  const auto g = est_ivwe_gaussian_schedule(178, 3, 0.05);
  CHECK(g.n0 == 172);
  CHECK(g.tau == 0.0);
  CHECK(g.regime == ScheduleRegime::gaussian);
  CHECK_THROWS_AS(est_ivwe_gaussian_schedule(1, 1, 1.0), ValidationError);
  CHECK_THROWS_AS(est_ivwe_gaussian_schedule(1, 1, 0.0), ValidationError);
}

TEST_CASE("uniform worked examples", "[policies]") {
  Rng rng = make_rng(1);
  const FixedSampler one(1, 1);
  const auto r1 = policy_uniform(one, std::vector<double>{1.0}, 1.0, 10.0, rng);
  CHECK(r1.counts.counts(0, 0) == 10);
  CHECK_THAT(r1.estimate[0], WithinAbs(0.1, 1e-15));

  const FixedSampler two(2, 2);
  const auto r2 = policy_uniform(two, std::vector<double>{1.0, 1.0}, 1.0, 8.0, rng);
  for (auto n : r2.counts.counts.data()) CHECK(n == 2);
  CHECK(r2.spent == 8.0);

  const FixedSampler tall(2, 1);
  const auto r3 = policy_uniform(tall, std::vector<double>{3.0}, 1.0, 7.0, rng);
  CHECK(r3.counts.counts(0, 0) == 1);
  CHECK(r3.counts.counts(1, 0) == 1);
  CHECK(r3.spent == 6.0);
  CHECK(r3.diagnostics.pooled_mean_fallbacks == 2);

  CHECK_THROWS_AS(policy_uniform(two, std::vector<double>{1.0, 1.0}, 1.0, 3.0, rng), BudgetError);
}

TEST_CASE("oracle worked examples", "[policies]") {
  const auto inst = unit_instance({1.0, 2.0}, {1.0, 4.0}, {1.0}, 4.0);
  const GaussianJudgeSampler sampler(inst);
  Rng rng = make_rng(2);
  const auto r = policy_oracle(inst, sampler, 9.0, PNorm::finite(2.0), rng);
  CHECK(r.counts.counts(0, 0) == 3);
  CHECK(r.counts.counts(1, 0) == 6);
  CHECK(r.spent == 9.0);

  // Symmetric instance: equal pulls per query.
  const auto sym = unit_instance({0.3, 0.5, 0.7}, {0.01, 0.01, 0.01}, {1.0});
  const auto rs = policy_oracle(sym, beta_judges(sym), 30.0, PNorm::finite(2.0), rng);
  for (auto n : rs.counts.counts.data()) CHECK(n == 10);

  // K = 1: all budget on the best judge, estimate = its sample mean.
  const auto single = unit_instance({0.5}, {0.05, 0.01}, {1.0, 1.0});
  const auto r1 = policy_oracle(single, FixedSampler(1, 2), 12.0, PNorm::finite(2.0), rng);
  CHECK(r1.counts.counts(0, 1) == 12);
  CHECK(r1.counts.counts(0, 0) == 0);
  CHECK_THAT(r1.estimate[0], WithinAbs(0.1, 1e-15));

  CHECK_THROWS_AS(policy_oracle(inst, sampler, 1.0, PNorm::finite(2.0), rng), StarvedQueryError);
}

TEST_CASE("est-ivwe uses only phase II samples at the chosen judge", "[policies]") {
  // Phase I draws differ from Phase II draws only through the log; a
  // constant sampler makes the estimate exact.
  const FixedSampler s(1, 1);
  Rng rng = make_rng(3);
  const auto r = policy_est_ivwe_gaussian(s, std::vector<double>{1.0}, 1.0, 200.0,
                                          PNorm::finite(2.0), 0.1, rng);
  const auto n0 = est_ivwe_gaussian_schedule(1, 1, 0.1).n0;
  CHECK(r.diagnostics.n0 == n0);
  CHECK(r.counts.counts(0, 0) == 200);
  CHECK_THAT(r.diagnostics.explore_budget, WithinAbs(static_cast<double>(n0), 1e-12));
  CHECK_THAT(r.estimate[0], WithinAbs(0.1, 1e-15));
  // Constant samples: sigma_hat^2 = 0 is floored.
  CHECK(r.diagnostics.floored_variances == 1);
  CHECK(r.diagnostics.variance_proxies(0, 0) == variance_floor(1.0));

  // Identical estimated variances and costs: tie goes to judge 0.
  const FixedSampler tie(2, 3);
  const auto rt = policy_est_ivwe_gaussian(tie, std::vector<double>{1.0, 1.0, 1.0}, 1.0, 1000.0,
                                           PNorm::finite(2.0), 0.1, rng);
  CHECK(rt.diagnostics.best_judge == std::vector<std::size_t>{0, 0});
}

TEST_CASE("est-ivwe bounded K = 1, J = 1 puts all of B' on the single pair", "[policies]") {
  const auto inst = unit_instance({0.5}, {0.05}, {1.0});
  const auto sampler = beta_judges(inst);
  Rng rng = make_rng(4);
  const double budget = 5000.0;
  const auto r = policy_est_ivwe_bounded(sampler, inst.costs, 1.0, budget, PNorm::finite(2.0), 0.1, rng);
  const auto sched = est_ivwe_bounded_schedule(1, 1, 1.0, budget, PNorm::finite(2.0), 0.1);
  CHECK(r.diagnostics.n0 == sched.n0);
  CHECK(r.diagnostics.tau == sched.tau);
  CHECK(r.counts.counts(0, 0) == 5000);
  CHECK(r.spent == budget);
  CHECK(std::abs(r.estimate[0] - 0.5) < 0.05);
}

TEST_CASE("est-ivwe bounded enforces its budget threshold", "[policies]") {
  Rng rng = make_rng(5);
  const auto inst = synthetic_instance(10, 3, rng);
  const auto sampler = beta_judges(inst);
  CHECK_THROWS_WITH(policy_est_ivwe_bounded(sampler, inst.costs, 1.0, 2e3, PNorm::finite(2.0), 0.1, rng),
                    ContainsSubstring("insufficient budget"));
  CHECK_NOTHROW(policy_est_ivwe_bounded(sampler, inst.costs, 1.0, 1e6, PNorm::finite(2.0), 0.1, rng));
  CHECK_THROWS_AS(policy_est_ivwe_gaussian(sampler, inst.costs, 1.0, 100.0, PNorm::finite(2.0), 0.1, rng),
                  BudgetError);
}

TEST_CASE("no policy ever overspends", "[policies][property]") {
  std::mt19937_64 meta(77);
  std::uniform_int_distribution<int> kd(1, 12), jd(1, 4), pd(0, 3);
  std::uniform_real_distribution<double> logb(1.0, 5.0);
  const std::vector<PNorm> norms{PNorm::finite(1.0), PNorm::finite(2.0), PNorm::finite(3.0),
                                 PNorm::infinity()};
  int completed = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng = make_rng(meta());
    const auto prior = static_cast<Prior>(trial % 3);
    const auto inst = synthetic_instance(kd(meta), jd(meta), rng, prior);
    const auto sampler = beta_judges(inst);
    const double budget = std::pow(10.0, logb(meta));
    const PNorm p = norms[pd(meta)];
    for (int policy = 0; policy < 4; ++policy) {
      try {
        PolicyResult r;
        switch (policy) {
          case 0: r = policy_uniform(sampler, inst.costs, 1.0, budget, rng); break;
          case 1: r = policy_oracle(inst, sampler, budget, p, rng); break;
          case 2: r = policy_est_ivwe_bounded(sampler, inst.costs, 1.0, budget, p, 0.1, rng); break;
          default: r = policy_est_ivwe_gaussian(sampler, inst.costs, 1.0, budget, p, 0.1, rng); break;
        }
        CHECK(r.spent <= budget);
        CHECK(budget_spent(r.counts.counts, inst.costs) <= budget);
        CHECK(r.estimate.size() == inst.num_queries());
        ++completed;
      } catch (const BudgetError&) {
      }
    }
  }
  CHECK(completed > 250);
}

TEST_CASE("identical seeds give identical results", "[policies]") {
  Rng gen = make_rng(6);
  const auto inst = synthetic_instance(8, 3, gen);
  const auto sampler = beta_judges(inst);
  for (int policy = 0; policy < 4; ++policy) {
    auto run = [&] {
      Rng rng = make_rng(1234);
      switch (policy) {
        case 0: return policy_uniform(sampler, inst.costs, 1.0, 2e5, rng);
        case 1: return policy_oracle(inst, sampler, 2e5, PNorm::finite(2.0), rng);
        case 2: return policy_est_ivwe_bounded(sampler, inst.costs, 1.0, 2e5, PNorm::finite(2.0), 0.1, rng);
        default: return policy_est_ivwe_gaussian(sampler, inst.costs, 1.0, 2e5, PNorm::finite(2.0), 0.1, rng);
      }
    };
    CHECK(run() == run());
  }
}

TEST_CASE("optimistic scale sandwiches the true scale with frequency >= 1 - delta", "[policies][property]") {
  const double delta = 0.1;
  int failures = 0;
  const int runs = 200;
  for (int run = 0; run < runs; ++run) {
    Rng rng = make_rng(1000 + run);
    const auto inst = synthetic_instance(5, 3, rng);
    const auto sampler = beta_judges(inst);
    const auto sched = est_ivwe_bounded_schedule(5, 3, 1.0, 1e5, PNorm::finite(2.0), delta);
    const auto log = explore(sampler, sched.n0, rng);
    bool bad = false;
    for (std::size_t k = 0; k < 5; ++k) {
      for (std::size_t j = 0; j < 3; ++j) {
        const double sigma = std::sqrt(inst.variances(k, j));
        const double bar = std::sqrt(pairwise_variance(log.samples(k, j, Phase::exploration))) + sched.tau;
        bad = bad || !(sigma <= bar && bar <= sigma + 2.0 * sched.tau);
      }
    }
    failures += bad ? 1 : 0;
  }
  CHECK(static_cast<double>(failures) / runs <= delta);
}
