#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "bj/core.hpp"

using namespace bj;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ProblemInstance two_by_two() {
  ProblemInstance inst;
  inst.scores = {0.2, 0.7};
  inst.variances = Grid<double>(2, 2, std::vector<double>{0.01, 0.02, 0.03, 0.04});
  inst.costs = {1.0, 2.0};
  inst.score_range = 1.0;
  return inst;
}

}  // namespace

TEST_CASE("PNorm parsing and exponent conventions", "[core]") {
  CHECK(PNorm::parse("inf").is_infinite());
  CHECK(PNorm::parse("infinity").is_infinite());
  CHECK(PNorm::parse("2").value() == 2.0);
  CHECK(PNorm::parse("1.5").value() == 1.5);
  CHECK_THROWS_AS(PNorm::parse("0.5"), ValidationError);
  CHECK_THROWS_AS(PNorm::parse("two"), ValidationError);
  CHECK_THROWS_AS(PNorm::parse("2x"), ValidationError);

  const auto two = PNorm::finite(2.0);
  CHECK(two.allocation_exponent() == 0.5);
  CHECK(two.objective_exponent() == 2.0);
  CHECK(PNorm::infinity().allocation_exponent() == 1.0);
  CHECK(PNorm::infinity().objective_exponent() == 1.0);
  CHECK(PNorm::infinity().to_string() == "inf");
  CHECK(PNorm::finite(3.0).to_string() == "3");
}

TEST_CASE("validate_instance accepts a well-formed instance", "[core]") {
  CHECK_NOTHROW(validate_instance(two_by_two()));
}

TEST_CASE("validate_instance names each violated constraint", "[core]") {
  SECTION("nonpositive cost") {
    auto inst = two_by_two();
    inst.costs[1] = 0.0;
    CHECK_THROWS_WITH(validate_instance(inst), ContainsSubstring("nonpositive cost c[1]"));
  }
  SECTION("score outside range") {
    auto inst = two_by_two();
    inst.scores[0] = 1.5;
    CHECK_THROWS_WITH(validate_instance(inst), ContainsSubstring("score s[0]"));
  }
  SECTION("nonpositive variance") {
    auto inst = two_by_two();
    inst.variances(1, 0) = 0.0;
    CHECK_THROWS_WITH(validate_instance(inst), ContainsSubstring("sigma^2[1][0]"));
  }
  SECTION("variance above R^2/4") {
    auto inst = two_by_two();
    inst.variances(0, 1) = 0.26;
    CHECK_THROWS_WITH(validate_instance(inst), ContainsSubstring("exceeds R^2/4"));
  }
  SECTION("dimension mismatch") {
    auto inst = two_by_two();
    inst.costs.push_back(1.0);
    CHECK_THROWS_WITH(validate_instance(inst), ContainsSubstring("dimension mismatch"));
  }
  SECTION("empty") {
    ProblemInstance inst;
    CHECK_THROWS_AS(validate_instance(inst), ValidationError);
  }
}

TEST_CASE("lp_error matches direct evaluation", "[core]") {
  const std::vector<double> a{0.1, 0.5, 0.9};
  const std::vector<double> b{0.2, 0.2, 0.9};
  CHECK_THAT(lp_error(a, b, PNorm::finite(1.0)), WithinRel(0.4, 1e-14));
  CHECK_THAT(lp_error(a, b, PNorm::finite(2.0)), WithinRel(std::sqrt(0.01 + 0.09), 1e-14));
  CHECK_THAT(lp_error(a, b, PNorm::infinity()), WithinRel(0.3, 1e-14));
  CHECK(lp_error(a, a, PNorm::finite(2.0)) == 0.0);
  CHECK_THROWS_AS(lp_error(a, std::vector<double>{1.0}, PNorm::finite(2.0)), ValidationError);
}

TEST_CASE("lp_error stays finite for huge p and tiny differences", "[core]") {
  const std::vector<double> a{1e-200, 2e-200};
  const std::vector<double> b{0.0, 0.0};
  const double v = lp_error(a, b, PNorm::finite(50.0));
  CHECK(std::isfinite(v));
  CHECK_THAT(v, WithinRel(2e-200 * std::pow(1.0 + std::pow(0.5, 50.0), 1.0 / 50.0), 1e-12));
}

TEST_CASE("lp_error is nonincreasing in p", "[core][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(7), b(7, 0.0);
    for (auto& x : a) x = u(rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double p : {1.0, 1.5, 2.0, 3.0, 8.0}) {
      const double v = lp_error(a, b, PNorm::finite(p));
      CHECK(v <= prev * (1.0 + 1e-12));
      prev = v;
    }
    CHECK(lp_error(a, b, PNorm::infinity()) <= prev * (1.0 + 1e-12));
  }
}

TEST_CASE("budget_spent sums cost times pulls per judge", "[core]") {
  Grid<std::int64_t> counts(2, 3, std::vector<std::int64_t>{1, 0, 2, 3, 1, 0});
  const std::vector<double> costs{0.5, 2.0, 1.0};
  CHECK_THAT(budget_spent(counts, costs), WithinAbs(0.5 * 4 + 2.0 * 1 + 1.0 * 2, 1e-15));
  IntegerAllocation alloc{counts, 10.0};
  CHECK(alloc.query_total(0) == 3);
  CHECK(alloc.query_total(1) == 4);
}

TEST_CASE("validate_allocation rejects negative and oversized weights", "[core]") {
  ContinuousAllocation ok{Grid<double>(1, 3, std::vector<double>{0.2, 0.3, 0.5})};
  CHECK_NOTHROW(validate_allocation(ok));
  ContinuousAllocation neg{Grid<double>(1, 2, std::vector<double>{-0.1, 0.5})};
  CHECK_THROWS_AS(validate_allocation(neg), ValidationError);
  ContinuousAllocation big{Grid<double>(1, 2, std::vector<double>{0.6, 0.5})};
  CHECK_THROWS_AS(validate_allocation(big), ValidationError);
}

TEST_CASE("argmin_lowest breaks ties toward the first index", "[core]") {
  CHECK(argmin_lowest(std::vector<double>{2.0, 1.0, 1.0}) == 1);
  CHECK(argmin_lowest(std::vector<double>{1.0, 1.0}) == 0);
  CHECK(argmin_lowest(std::vector<double>{3.0}) == 0);
}

TEST_CASE("Grid rejects data of the wrong size", "[core]") {
  CHECK_THROWS_AS(Grid<double>(2, 2, std::vector<double>{1.0, 2.0, 3.0}), ValidationError);
  Grid<int> g(2, 3, 7);
  g(1, 2) = 4;
  CHECK(g.row(1)[2] == 4);
  CHECK(g.data().size() == 6);
}

TEST_CASE("log_sum_exp survives large magnitudes", "[core]") {
  const std::vector<double> xs{1000.0, 1000.0};
  CHECK_THAT(detail::log_sum_exp(xs), WithinRel(1000.0 + std::log(2.0), 1e-15));
  const std::vector<double> ys{-1000.0, -1000.0 - std::log(3.0)};
  CHECK_THAT(detail::log_sum_exp(ys), WithinRel(-1000.0 + std::log(4.0 / 3.0), 1e-15));
}
