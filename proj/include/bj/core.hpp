#pragma once
// Domain types shared by every module: problem instances, allocations,
// the p-norm selector and the l_p error metric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bj {

/// Raised for malformed inputs: bad instances, bad configs, bad files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a policy's budget precondition does not hold.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query with positive weight ends up with zero pulls.
class StarvedQueryError : public BudgetError {
 public:
  using BudgetError::BudgetError;
};

namespace detail {

template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << args);
  return os.str();
}

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// log(sum_i exp(x_i)); -inf for an empty range.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  CompensatedSum s;
  for (double x : xs) s.add(std::exp(x - m));
  return m + std::log(s.value());
}

}  // namespace detail

/// Dense row-major matrix indexed by (query, judge).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T init = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, init) {}
  Grid(std::size_t rows, std::size_t cols, std::vector<T> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_) {
      throw ValidationError(detail::concat("grid data has ", data_.size(),
                                           " entries, expected ", rows_, "x",
                                           cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// The exponent p of the l_p error: a real p >= 1 or infinity.
class PNorm {
 public:
  static PNorm finite(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) {
      throw ValidationError(detail::concat("p must be a finite real >= 1, got ", p));
    }
    return PNorm(p);
  }
  static PNorm infinity() { return PNorm(std::nullopt); }

  /// Accepts "inf", "infinity" or a decimal real.
  static PNorm parse(const std::string& text) {
    if (text == "inf" || text == "infinity" || text == "Inf" || text == "INF") {
      return infinity();
    }
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &pos);
    } catch (const std::exception&) {
      throw ValidationError("cannot parse p value '" + text + "'");
    }
    if (pos != text.size()) throw ValidationError("cannot parse p value '" + text + "'");
    if (std::isinf(v)) return infinity();
    return finite(v);
  }

  bool is_infinite() const { return !p_.has_value(); }
  /// Only meaningful for finite p.
  double value() const { return p_.value_or(std::numeric_limits<double>::infinity()); }

  /// p/(p+2), with the convention 1 at p = infinity.
  double allocation_exponent() const { return p_ ? *p_ / (*p_ + 2.0) : 1.0; }
  /// (p+2)/p, with the convention 1 at p = infinity.
  double objective_exponent() const { return p_ ? (*p_ + 2.0) / *p_ : 1.0; }

  std::string to_string() const {
    if (!p_) return "inf";
    std::ostringstream os;
    os.precision(17);
    os << *p_;
    return os.str();
  }

  friend bool operator==(const PNorm&, const PNorm&) = default;

 private:
  explicit PNorm(std::optional<double> p) : p_(p) {}
  std::optional<double> p_;
};

/// Ground truth (s, sigma^2, c, R). Variances are stored squared.
struct ProblemInstance {
  std::vector<double> scores;
  Grid<double> variances;
  std::vector<double> costs;
  double score_range = 1.0;
  std::map<std::string, std::string> metadata;

  std::size_t num_queries() const { return scores.size(); }
  std::size_t num_judges() const { return costs.size(); }
};

/// Checks every instance invariant; throws ValidationError naming the
/// offending index otherwise.
inline const ProblemInstance& validate_instance(const ProblemInstance& inst) {
  const std::size_t k_count = inst.scores.size();
  const std::size_t j_count = inst.costs.size();
  if (k_count == 0) throw ValidationError("instance has no queries (K = 0)");
  if (j_count == 0) throw ValidationError("instance has no judges (J = 0)");
  if (inst.variances.rows() != k_count || inst.variances.cols() != j_count) {
    throw ValidationError(detail::concat(
        "dimension mismatch: variances are ", inst.variances.rows(), "x",
        inst.variances.cols(), " but K = ", k_count, ", J = ", j_count));
  }
  const double r = inst.score_range;
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw ValidationError(detail::concat("nonpositive score range R = ", r));
  }
  for (std::size_t j = 0; j < j_count; ++j) {
    if (!(inst.costs[j] > 0.0) || !std::isfinite(inst.costs[j])) {
      throw ValidationError(detail::concat("nonpositive cost c[", j, "] = ", inst.costs[j]));
    }
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    const double s = inst.scores[k];
    if (!(s >= 0.0 && s <= r)) {
      throw ValidationError(detail::concat("score s[", k, "] = ", s,
                                           " outside [0, R] with R = ", r));
    }
  }
  const double popoviciu = r * r / 4.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t j = 0; j < j_count; ++j) {
      const double v = inst.variances(k, j);
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(
            detail::concat("nonpositive variance sigma^2[", k, "][", j, "] = ", v));
      }
      if (v > popoviciu) {
        throw ValidationError(detail::concat("variance exceeds R^2/4: sigma^2[", k,
                                             "][", j, "] = ", v, " > ", popoviciu));
      }
    }
  }
  return inst;
}

/// Cost-weighted budget fractions omega_{k,j}.
struct ContinuousAllocation {
  Grid<double> weights;

  double total() const {
    detail::CompensatedSum s;
    for (double w : weights.data()) s.add(w);
    return s.value();
  }
};

inline void validate_allocation(const ContinuousAllocation& omega) {
  for (std::size_t i = 0; i < omega.weights.size(); ++i) {
    const double w = omega.weights.data()[i];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError(detail::concat("negative allocation weight at flat index ", i));
    }
  }
  if (omega.total() > 1.0 + 1e-12) {
    throw ValidationError(detail::concat("allocation weights sum to ", omega.total(), " > 1"));
  }
}

/// Total cost sum_j c_j sum_k N_{k,j}. Every budget comparison in the
/// library goes through this function so the arithmetic is identical.
inline double budget_spent(const Grid<std::int64_t>& counts, std::span<const double> costs) {
  detail::CompensatedSum s;
  for (std::size_t j = 0; j < counts.cols(); ++j) {
    std::int64_t n = 0;
    for (std::size_t k = 0; k < counts.rows(); ++k) n += counts(k, j);
    s.add(costs[j] * static_cast<double>(n));
  }
  return s.value();
}

/// Realized pull counts N_{k,j} under budget B.
struct IntegerAllocation {
  Grid<std::int64_t> counts;
  double budget = 0.0;

  double spent(std::span<const double> costs) const { return budget_spent(counts, costs); }

  std::int64_t query_total(std::size_t k) const {
    std::int64_t n = 0;
    for (auto c : counts.row(k)) n += c;
    return n;
  }

  friend bool operator==(const IntegerAllocation&, const IntegerAllocation&) = default;
};

/// (sum_k |a_k - b_k|^p)^(1/p), or max_k |a_k - b_k| at p = infinity.
inline double lp_error(std::span<const double> estimate, std::span<const double> truth,
                       const PNorm& p) {
  if (estimate.size() != truth.size()) {
    throw ValidationError(detail::concat("length mismatch: ", estimate.size(), " vs ",
                                         truth.size()));
  }
  double largest = 0.0;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    largest = std::max(largest, std::abs(estimate[k] - truth[k]));
  }
  if (p.is_infinite() || largest == 0.0) return largest;
  // Scale by the largest term to keep the powers in range.
  const double pv = p.value();
  detail::CompensatedSum s;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    s.add(std::pow(std::abs(estimate[k] - truth[k]) / largest, pv));
  }
  return largest * std::pow(s.value(), 1.0 / pv);
}

/// argmin_j of a row with ties going to the lowest index.
inline std::size_t argmin_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] < row[best]) best = j;
  }
  return best;
}

}  // namespace bj
