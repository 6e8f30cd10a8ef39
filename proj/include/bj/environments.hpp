#pragma once
// Judge models: variance-preserving shifted Beta judges, Gaussian judges
// and an empirical resampling pool, plus the synthetic instance priors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bj/core.hpp"
#include "bj/estimation.hpp"
#include "bj/sampler.hpp"

namespace bj {

// ---------------------------------------------------------------------------
// Shifted Beta judges

/// X = shift + scale * Y with Y ~ Beta(alpha, beta).
struct BetaJudgeParams {
  double alpha = 1.0;
  double beta = 1.0;
  double shift = 0.0;
  double scale = 1.0;

  double mean() const { return shift + scale * alpha / (alpha + beta); }
  double variance() const {
    const double ab = alpha + beta;
    return scale * scale * alpha * beta / (ab * ab * (ab + 1.0));
  }
  friend bool operator==(const BetaJudgeParams&, const BetaJudgeParams&) = default;
};

/// R_k = min(s, R - s).
inline double half_width(double s, double score_range) {
  return std::min(s, score_range - s);
}

/// Beta judge with mean s* + delta and variance sigma_sq, supported on
/// [s* - R_k, s* + R_k]. With q = sigma^2/(4 R_k^2), d = delta/(2 R_k):
/// alpha = ((1 - 4d^2 - 4q)/(8q))(1 + 2d), beta = ((1 - 4d^2 - 4q)/(8q))(1 - 2d).
inline BetaJudgeParams beta_construction(double s_star, double score_range, double r_k,
                                         double sigma_sq, double delta) {
  if (!(score_range > 0.0)) {
    throw ValidationError(detail::concat("beta_construction: nonpositive R = ", score_range));
  }
  if (!(s_star >= 0.0 && s_star <= score_range)) {
    throw ValidationError(detail::concat("beta_construction: s* = ", s_star, " outside [0, ",
                                         score_range, "]"));
  }
  if (!(r_k > 0.0)) {
    throw ValidationError(detail::concat("beta_construction: R_k = ", r_k, " must be positive"));
  }
  if (r_k > half_width(s_star, score_range) * (1.0 + 1e-12)) {
    throw ValidationError(detail::concat("beta_construction: R_k = ", r_k,
                                         " exceeds min(s*, R - s*) = ",
                                         half_width(s_star, score_range)));
  }
  if (!(sigma_sq > 0.0)) {
    throw ValidationError(detail::concat("beta_construction: sigma^2 = ", sigma_sq,
                                         " must be positive"));
  }
  if (sigma_sq > r_k * r_k / 2.0) {
    throw ValidationError(detail::concat("beta_construction: sigma^2 = ", sigma_sq,
                                         " exceeds R_k^2/2 = ", r_k * r_k / 2.0));
  }
  if (!(std::abs(delta) <= r_k / 4.0)) {
    throw ValidationError(detail::concat("beta_construction: |delta| = ", std::abs(delta),
                                         " exceeds R_k/4 = ", r_k / 4.0));
  }
  const double q = sigma_sq / (4.0 * r_k * r_k);
  const double d = delta / (2.0 * r_k);
  const double common = (1.0 - 4.0 * d * d - 4.0 * q) / (8.0 * q);
  return {common * (1.0 + 2.0 * d), common * (1.0 - 2.0 * d), s_star - r_k, 2.0 * r_k};
}

/// One draw through the two-Gamma ratio G_a / (G_a + G_b).
inline double sample_beta_judge(const BetaJudgeParams& params, Rng& rng) {
  std::gamma_distribution<double> ga(params.alpha, 1.0);
  std::gamma_distribution<double> gb(params.beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  const double u = (x + y) > 0.0 ? x / (x + y) : (params.alpha >= params.beta ? 1.0 : 0.0);
  return params.shift + params.scale * u;
}

class BetaJudgeSampler final : public JudgeSampler {
 public:
  BetaJudgeSampler(Grid<BetaJudgeParams> params, double score_range)
      : params_(std::move(params)), score_range_(score_range) {}

  std::size_t num_queries() const override { return params_.rows(); }
  std::size_t num_judges() const override { return params_.cols(); }
  double sample(std::size_t k, std::size_t j, Rng& rng) const override {
    // Rounding in shift + scale * u can leave [0, R] by one ulp.
    return std::clamp(sample_beta_judge(params_(k, j), rng), 0.0, score_range_);
  }
  const Grid<BetaJudgeParams>& params() const { return params_; }

 private:
  Grid<BetaJudgeParams> params_;
  double score_range_;
};

/// Unperturbed Beta judges for every pair of a validated instance.
inline BetaJudgeSampler beta_judges(const ProblemInstance& inst) {
  Grid<BetaJudgeParams> params(inst.num_queries(), inst.num_judges());
  for (std::size_t k = 0; k < inst.num_queries(); ++k) {
    const double r_k = half_width(inst.scores[k], inst.score_range);
    for (std::size_t j = 0; j < inst.num_judges(); ++j) {
      params(k, j) = beta_construction(inst.scores[k], inst.score_range, r_k,
                                       inst.variances(k, j), 0.0);
    }
  }
  return BetaJudgeSampler(std::move(params), inst.score_range);
}

// ---------------------------------------------------------------------------
// Gaussian judges

inline double gaussian_judge(double s_k, double sigma_sq, Rng& rng) {
  std::normal_distribution<double> noise(0.0, std::sqrt(sigma_sq));
  return s_k + noise(rng);
}

class GaussianJudgeSampler final : public JudgeSampler {
 public:
  explicit GaussianJudgeSampler(const ProblemInstance& inst)
      : scores_(inst.scores), variances_(inst.variances) {}

  std::size_t num_queries() const override { return variances_.rows(); }
  std::size_t num_judges() const override { return variances_.cols(); }
  double sample(std::size_t k, std::size_t j, Rng& rng) const override {
    return gaussian_judge(scores_[k], variances_(k, j), rng);
  }

 private:
  std::vector<double> scores_;
  Grid<double> variances_;
};

// ---------------------------------------------------------------------------
// Synthetic priors

enum class Prior { default_prior, bad_is_expensive, bad_is_cheap };

inline Prior parse_prior(const std::string& name) {
  if (name == "default") return Prior::default_prior;
  if (name == "bad_is_expensive") return Prior::bad_is_expensive;
  if (name == "bad_is_cheap") return Prior::bad_is_cheap;
  throw ValidationError("unknown prior '" + name +
                        "' (expected default, bad_is_expensive or bad_is_cheap)");
}

inline std::string to_string(Prior prior) {
  switch (prior) {
    case Prior::default_prior:
      return "default";
    case Prior::bad_is_expensive:
      return "bad_is_expensive";
    case Prior::bad_is_cheap:
      return "bad_is_cheap";
  }
  return "default";
}

/// Random instance on R = 1 with s_k ~ U[0.1, 0.9].
///
/// default: sigma^2 ~ U[1e-4, 0.9 s(1-s)] redrawn until sigma^2 <= R_k^2/2,
/// costs ~ U[0.5, 1.5].
/// bad_is_expensive / bad_is_cheap: judge j (1-based) draws
/// sigma^2 ~ U[j, J+j-1] * (R_k^2/2) / (2J); costs proportional to
/// sum_k sigma^2 (resp. sum_k 1/sigma^2), rescaled to mean 0.1.
inline ProblemInstance synthetic_instance(std::size_t k_count, std::size_t j_count, Rng& rng,
                                          Prior prior = Prior::default_prior) {
  if (k_count == 0 || j_count == 0) {
    throw ValidationError(detail::concat("synthetic_instance: K = ", k_count, ", J = ",
                                         j_count, " must both be >= 1"));
  }
  ProblemInstance inst;
  inst.score_range = 1.0;
  inst.scores.resize(k_count);
  inst.variances = Grid<double>(k_count, j_count);
  inst.costs.resize(j_count);

  std::uniform_real_distribution<double> score_dist(0.1, 0.9);
  for (auto& s : inst.scores) s = score_dist(rng);

  std::uint64_t redraws = 0;
  if (prior == Prior::default_prior) {
    for (std::size_t k = 0; k < k_count; ++k) {
      const double s = inst.scores[k];
      const double r_k = half_width(s, inst.score_range);
      const double feasible = r_k * r_k / 2.0;
      std::uniform_real_distribution<double> var_dist(1e-4, 0.9 * s * (1.0 - s));
      for (std::size_t j = 0; j < j_count; ++j) {
        double v = var_dist(rng);
        while (v > feasible) {
          v = var_dist(rng);
          ++redraws;
        }
        inst.variances(k, j) = v;
      }
    }
    std::uniform_real_distribution<double> cost_dist(0.5, 1.5);
    for (auto& c : inst.costs) c = cost_dist(rng);
    inst.metadata["sigma2_redraws"] = std::to_string(redraws);
  } else {
    const double jd = static_cast<double>(j_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      const double r_k = half_width(inst.scores[k], inst.score_range);
      const double base = r_k * r_k / 2.0;
      for (std::size_t j = 0; j < j_count; ++j) {
        const double lo = static_cast<double>(j + 1);
        const double hi = jd + static_cast<double>(j);
        std::uniform_real_distribution<double> band(lo, hi);
        inst.variances(k, j) = (lo == hi ? lo : band(rng)) * base / (2.0 * jd);
      }
    }
    detail::CompensatedSum total;
    for (std::size_t j = 0; j < j_count; ++j) {
      detail::CompensatedSum col;
      for (std::size_t k = 0; k < k_count; ++k) {
        const double v = inst.variances(k, j);
        col.add(prior == Prior::bad_is_expensive ? v : 1.0 / v);
      }
      inst.costs[j] = col.value();
      total.add(col.value());
    }
    const double scale = 0.1 * jd / total.value();
    for (auto& c : inst.costs) c *= scale;
    inst.metadata["variance_band_base"] = "R_k^2/2";
  }
  inst.metadata["prior"] = to_string(prior);
  return inst;
}

// ---------------------------------------------------------------------------
// Resampling pool

struct ResamplingPool {
  std::vector<std::string> query_ids;
  std::vector<std::string> judge_ids;
  Grid<std::vector<double>> scores;  // (k, j) -> recorded scores
  std::vector<double> truth;
  double score_range = 1.0;
  std::map<std::string, std::string> metadata;

  std::size_t num_queries() const { return query_ids.size(); }
  std::size_t num_judges() const { return judge_ids.size(); }
};

struct PoolRejection {
  std::string query_id;
  std::string reason;
};

struct PoolLoadOptions {
  std::size_t min_samples = 25;
  std::optional<double> score_range;
};

struct PoolLoadResult {
  ResamplingPool pool;
  std::vector<PoolRejection> rejects;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Comma-separated fields with optional double quotes ("" escapes a quote).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(trim(field));
  return out;
}

inline double parse_real(const std::string& text, std::size_t line_no, const char* what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || !std::isfinite(v)) {
    throw ValidationError(concat("line ", line_no, ": cannot parse ", what, " '", text, "'"));
  }
  return v;
}

// Unique most frequent value, or nullopt on a tie.
inline std::optional<double> unique_mode(const std::vector<double>& xs) {
  std::map<double, std::size_t> freq;
  for (double x : xs) ++freq[x];
  std::size_t best = 0;
  std::size_t holders = 0;
  double mode = 0.0;
  for (const auto& [value, n] : freq) {
    if (n > best) {
      best = n;
      holders = 1;
      mode = value;
    } else if (n == best) {
      ++holders;
    }
  }
  if (holders != 1) return std::nullopt;
  return mode;
}

}  // namespace detail

/// Reads `query_id,judge_id,score[,truth]` (header required, any column
/// order). With a truth column the data pass through unfiltered and every
/// (query, judge) pair must be present. Without one, queries are kept only
/// when every judge has >= min_samples records and all judges share the
/// same unique mode, which becomes s_k.
inline PoolLoadResult parse_pool(std::istream& in, const PoolLoadOptions& opts = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw ValidationError("pool file is empty");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto c_query = column("query_id");
  const auto c_judge = column("judge_id");
  const auto c_score = column("score");
  const auto c_truth = column("truth");
  if (!c_query || !c_judge || !c_score) {
    throw ValidationError("pool header must contain query_id, judge_id and score columns");
  }

  std::vector<std::string> query_ids;
  std::vector<std::string> judge_ids;
  std::unordered_map<std::string, std::size_t> query_index;
  std::unordered_map<std::string, std::size_t> judge_index;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cells;
  std::vector<std::optional<double>> truth;
  double max_seen = 0.0;

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError(detail::concat("line ", line_no, ": expected ", header.size(),
                                           " fields, got ", fields.size()));
    }
    const std::string& qid = fields[*c_query];
    const std::string& jid = fields[*c_judge];
    if (qid.empty() || jid.empty()) {
      throw ValidationError(detail::concat("line ", line_no, ": empty query_id or judge_id"));
    }
    const double score = detail::parse_real(fields[*c_score], line_no, "score");
    if (score < 0.0) {
      throw ValidationError(detail::concat("line ", line_no, ": negative score ", score));
    }
    auto [qit, q_new] = query_index.try_emplace(qid, query_ids.size());
    if (q_new) {
      query_ids.push_back(qid);
      truth.emplace_back();
    }
    auto [jit, j_new] = judge_index.try_emplace(jid, judge_ids.size());
    if (j_new) judge_ids.push_back(jid);
    cells[{qit->second, jit->second}].push_back(score);
    max_seen = std::max(max_seen, score);
    if (c_truth) {
      const double t = detail::parse_real(fields[*c_truth], line_no, "truth");
      auto& slot = truth[qit->second];
      if (slot && *slot != t) {
        throw ValidationError(detail::concat("line ", line_no, ": query '", qid,
                                             "' has conflicting truth values ", *slot, " and ",
                                             t));
      }
      slot = t;
      max_seen = std::max(max_seen, t);
    }
  }
  if (query_ids.empty()) throw ValidationError("pool file has no observations");

  PoolLoadResult result;
  ResamplingPool& pool = result.pool;
  pool.judge_ids = judge_ids;
  pool.score_range = opts.score_range.value_or(max_seen);
  if (!(pool.score_range > 0.0)) {
    throw ValidationError(detail::concat("pool score range must be positive, got ",
                                         pool.score_range));
  }
  if (max_seen > pool.score_range) {
    throw ValidationError(detail::concat("pool score ", max_seen, " exceeds score range ",
                                         pool.score_range));
  }

  std::vector<std::size_t> kept;
  std::vector<double> kept_truth;
  const std::size_t j_count = judge_ids.size();
  for (std::size_t k = 0; k < query_ids.size(); ++k) {
    if (c_truth) {
      for (std::size_t j = 0; j < j_count; ++j) {
        if (!cells.count({k, j})) {
          throw ValidationError("pool has no records for query '" + query_ids[k] +
                                "', judge '" + judge_ids[j] + "'");
        }
      }
      kept.push_back(k);
      kept_truth.push_back(*truth[k]);
      continue;
    }
    std::string reason;
    std::optional<double> consensus;
    for (std::size_t j = 0; j < j_count && reason.empty(); ++j) {
      const auto it = cells.find({k, j});
      const std::size_t n = it == cells.end() ? 0 : it->second.size();
      if (n < opts.min_samples) {
        reason = detail::concat("insufficient samples: judge ", judge_ids[j], " has ", n,
                                " < ", opts.min_samples);
        break;
      }
      const auto mode = detail::unique_mode(it->second);
      if (!mode) {
        reason = "mode tie: judge " + judge_ids[j];
      } else if (consensus && *consensus != *mode) {
        reason = detail::concat("no consensus: judge ", judge_ids[j], " mode ", *mode,
                                " differs from ", *consensus);
      } else {
        consensus = mode;
      }
    }
    if (!reason.empty()) {
      result.rejects.push_back({query_ids[k], reason});
      continue;
    }
    kept.push_back(k);
    kept_truth.push_back(*consensus);
  }
  if (kept.empty()) throw ValidationError("pool is empty after consensus filtering");

  pool.scores = Grid<std::vector<double>>(kept.size(), j_count);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    pool.query_ids.push_back(query_ids[kept[i]]);
    for (std::size_t j = 0; j < j_count; ++j) {
      pool.scores(i, j) = cells.at({kept[i], j});
    }
  }
  pool.truth = std::move(kept_truth);
  pool.metadata["source"] = "pool";
  pool.metadata["truth"] = c_truth ? "column" : "consensus_mode";
  pool.metadata["rejected_queries"] = std::to_string(result.rejects.size());
  return result;
}

inline PoolLoadResult load_pool(const std::string& path, const PoolLoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open pool file '" + path + "'");
  auto result = parse_pool(in, opts);
  result.pool.metadata["path"] = path;
  return result;
}

/// Uniform draw with replacement from the recorded scores of (k, j).
inline double sample_pool(const ResamplingPool& pool, std::size_t k, std::size_t j, Rng& rng) {
  if (k >= pool.num_queries() || j >= pool.num_judges() || pool.scores(k, j).empty()) {
    throw ValidationError(detail::concat("pool has no entry for (", k, ", ", j, ")"));
  }
  const auto& xs = pool.scores(k, j);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  return xs[pick(rng)];
}

class PoolSampler final : public JudgeSampler {
 public:
  explicit PoolSampler(const ResamplingPool& pool) : pool_(&pool) {}
  std::size_t num_queries() const override { return pool_->num_queries(); }
  std::size_t num_judges() const override { return pool_->num_judges(); }
  double sample(std::size_t k, std::size_t j, Rng& rng) const override {
    return sample_pool(*pool_, k, j, rng);
  }

 private:
  const ResamplingPool* pool_;
};

/// The pool as a problem instance: s_k = truth, sigma^2 = mean squared
/// deviation of the recorded scores from s_k (floored), uniform cost.
inline ProblemInstance pool_instance(const ResamplingPool& pool, double cost = 0.1) {
  ProblemInstance inst;
  inst.scores = pool.truth;
  inst.score_range = pool.score_range;
  inst.costs.assign(pool.num_judges(), cost);
  inst.variances = Grid<double>(pool.num_queries(), pool.num_judges());
  const double floor = variance_floor(pool.score_range);
  for (std::size_t k = 0; k < pool.num_queries(); ++k) {
    for (std::size_t j = 0; j < pool.num_judges(); ++j) {
      detail::CompensatedSum s;
      for (double x : pool.scores(k, j)) s.add((x - inst.scores[k]) * (x - inst.scores[k]));
      const double v = s.value() / static_cast<double>(pool.scores(k, j).size());
      inst.variances(k, j) = std::max(v, floor);
    }
  }
  inst.metadata = pool.metadata;
  return validate_instance(inst);
}

}  // namespace bj
