#pragma once
// Sample statistics, the optimistic variance estimate and the
// inverse-variance weighted estimator (IVWE).

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "bj/core.hpp"

namespace bj {

/// Relative floor applied to zero variance proxies (times R^2).
inline constexpr double kVarianceFloorRel = 1e-12;

inline double variance_floor(double score_range) {
  return kVarianceFloorRel * score_range * score_range;
}

/// Arithmetic mean; 0 for an empty list.
inline double sample_mean(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  detail::CompensatedSum s;
  for (double x : samples) s.add(x);
  return s.value() / static_cast<double>(samples.size());
}

/// Pairwise U-statistic (1/(2N(N-1))) sum_{n != n'} (x_n - x_n')^2,
/// evaluated in one pass through the identity
/// (sum x^2 - N xbar^2)/(N-1) on data shifted by the first sample.
inline double pairwise_variance(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) {
    throw ValidationError(detail::concat("pairwise variance needs >= 2 samples, got ", n));
  }
  const double shift = samples[0];
  detail::CompensatedSum s1;
  detail::CompensatedSum s2;
  for (double x : samples) {
    const double d = x - shift;
    s1.add(d);
    s2.add(d * d);
  }
  const double nd = static_cast<double>(n);
  const double sum = s1.value();
  const double v = (s2.value() - sum * sum / nd) / (nd - 1.0);
  return v > 0.0 ? v : 0.0;
}

/// Unbiased sample variance, two-pass: (1/(N-1)) sum (x - xbar)^2.
inline double sample_variance(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) {
    throw ValidationError(detail::concat("sample variance needs >= 2 samples, got ", n));
  }
  const double mean = sample_mean(samples);
  detail::CompensatedSum s;
  for (double x : samples) s.add((x - mean) * (x - mean));
  return s.value() / static_cast<double>(n - 1);
}

/// Standard-deviation scale estimate sigma_bar = sigma_hat + tau.
struct VarianceEstimate {
  double raw = 0.0;     // sigma_hat
  double biased = 0.0;  // sigma_hat + tau
  double tau = 0.0;

  /// The squared proxy (sigma_hat + tau)^2 used by allocation and IVWE.
  double proxy() const { return biased * biased; }
};

inline VarianceEstimate optimistic_variance(double raw, double tau) {
  if (!(raw >= 0.0)) throw ValidationError(detail::concat("negative raw estimate ", raw));
  if (!(tau >= 0.0)) throw ValidationError(detail::concat("negative bias tau ", tau));
  return {raw, raw + tau, tau};
}

/// IVWE for one query: (sum_j N_j/v_j)^-1 sum_j N_j mean_j / v_j.
/// Judges with zero pulls contribute nothing.
inline double ivwe_aggregate(std::span<const double> means, std::span<const std::int64_t> counts,
                             std::span<const double> proxies) {
  if (means.size() != counts.size() || means.size() != proxies.size()) {
    throw ValidationError("ivwe_aggregate: means, counts and proxies differ in length");
  }
  detail::CompensatedSum weight;
  detail::CompensatedSum weighted;
  bool any = false;
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (counts[j] < 0) throw ValidationError(detail::concat("negative count for judge ", j));
    if (counts[j] == 0) continue;
    if (!(proxies[j] > 0.0)) {
      throw ValidationError(
          detail::concat("nonpositive variance proxy ", proxies[j], " for judge ", j));
    }
    const double w = static_cast<double>(counts[j]) / proxies[j];
    weight.add(w);
    weighted.add(w * means[j]);
    any = true;
  }
  if (!any) throw ValidationError("ivwe_aggregate: every judge has zero samples");
  return weighted.value() / weight.value();
}

enum class Phase { exploration, exploitation };

/// Observed scores per (query, judge), split by phase. Exploration records
/// are rejected once the first exploitation record has been appended.
class SampleLog {
 public:
  SampleLog() = default;
  SampleLog(std::size_t queries, std::size_t judges)
      : exploration_(queries, judges), exploitation_(queries, judges) {}

  void record(std::size_t k, std::size_t j, Phase phase, double score) {
    if (phase == Phase::exploration) {
      if (exploiting_) {
        throw std::logic_error("exploration sample recorded after exploitation began");
      }
      exploration_(k, j).push_back(score);
    } else {
      exploiting_ = true;
      exploitation_(k, j).push_back(score);
    }
  }

  std::span<const double> samples(std::size_t k, std::size_t j, Phase phase) const {
    return phase == Phase::exploration ? std::span<const double>(exploration_(k, j))
                                       : std::span<const double>(exploitation_(k, j));
  }

  std::size_t num_queries() const { return exploration_.rows(); }
  std::size_t num_judges() const { return exploration_.cols(); }

  /// Per-pair sample counts for one phase.
  Grid<std::int64_t> counts(Phase phase) const {
    Grid<std::int64_t> out(num_queries(), num_judges(), 0);
    for (std::size_t k = 0; k < num_queries(); ++k) {
      for (std::size_t j = 0; j < num_judges(); ++j) {
        out(k, j) = static_cast<std::int64_t>(samples(k, j, phase).size());
      }
    }
    return out;
  }

 private:
  Grid<std::vector<double>> exploration_;
  Grid<std::vector<double>> exploitation_;
  bool exploiting_ = false;
};

}  // namespace bj
