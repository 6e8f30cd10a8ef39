#pragma once
// Experiment configuration, the budget sweep over policies and norms, and
// the raw/summary CSV outputs.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "bj/core.hpp"
#include "bj/environments.hpp"
#include "bj/io.hpp"
#include "bj/policies.hpp"
#include "bj/sampler.hpp"

namespace bj {

inline constexpr int kConfigSchemaVersion = 1;

enum class EnvironmentKind { synthetic, gaussian, pool };

struct EnvironmentSpec {
  EnvironmentKind kind = EnvironmentKind::synthetic;
  std::size_t k_count = 100;
  std::size_t j_count = 5;
  Prior prior = Prior::default_prior;
  std::string path;  // pool file
  double cost = 0.1;
  std::optional<double> score_range;
  std::size_t min_samples = 25;
  bool fixed_instance = false;
};

struct ExperimentConfig {
  EnvironmentSpec environment;
  std::vector<PolicyKind> policies;
  std::vector<PNorm> norms;
  std::vector<double> budgets;
  std::size_t repetitions = 50;
  double delta = 0.1;
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  bool record_timing = false;
};

/// Throws ValidationError unless budgets are positive and strictly
/// increasing, repetitions >= 1, delta in (0, 1) and the lists are nonempty.
inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.policies.empty()) throw ValidationError("config: policy list is empty");
  if (cfg.norms.empty()) throw ValidationError("config: p list is empty");
  if (cfg.budgets.empty()) throw ValidationError("config: budget grid is empty");
  for (std::size_t i = 0; i < cfg.budgets.size(); ++i) {
    if (!(cfg.budgets[i] > 0.0) || !std::isfinite(cfg.budgets[i])) {
      throw ValidationError(detail::concat("config: budget ", cfg.budgets[i], " is not positive"));
    }
    if (i > 0 && !(cfg.budgets[i] > cfg.budgets[i - 1])) {
      throw ValidationError("config: budgets must be strictly increasing");
    }
  }
  if (cfg.repetitions < 1) throw ValidationError("config: repetitions must be >= 1");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw ValidationError(detail::concat("config: delta = ", cfg.delta, " outside (0, 1)"));
  }
  const auto& env = cfg.environment;
  if (env.kind != EnvironmentKind::pool && (env.k_count == 0 || env.j_count == 0)) {
    throw ValidationError("config: K and J must be >= 1");
  }
  if (env.kind == EnvironmentKind::pool && env.path.empty()) {
    throw ValidationError("config: pool environment needs a path");
  }
  if (!(env.cost > 0.0)) throw ValidationError("config: pool cost must be positive");
}

/// n log-spaced points from lo to hi inclusive.
inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) {
    throw ValidationError(detail::concat("log_spaced: need 0 < min <= max and points >= 1, got ",
                                         lo, ", ", hi, ", ", n));
  }
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  ExperimentConfig cfg;
  try {
    const int version = j.value("schema_version", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion) {
      throw ValidationError(detail::concat("config: unsupported schema_version ", version));
    }
    if (j.contains("environment")) {
      const auto& e = j.at("environment");
      auto& env = cfg.environment;
      const std::string kind = e.value("kind", std::string("synthetic"));
      if (kind == "synthetic") {
        env.kind = EnvironmentKind::synthetic;
      } else if (kind == "gaussian") {
        env.kind = EnvironmentKind::gaussian;
      } else if (kind == "pool") {
        env.kind = EnvironmentKind::pool;
      } else {
        throw ValidationError("config: unknown environment kind '" + kind + "'");
      }
      env.k_count = e.value("K", env.k_count);
      env.j_count = e.value("J", env.j_count);
      env.prior = parse_prior(e.value("prior", std::string("default")));
      env.path = e.value("path", std::string());
      env.cost = e.value("cost", env.cost);
      if (e.contains("score_range")) env.score_range = e.at("score_range").get<double>();
      env.min_samples = e.value("min_samples", env.min_samples);
      env.fixed_instance = e.value("fixed_instance", false);
    }
    for (const auto& name : j.value("policies", std::vector<std::string>{"uniform", "oracle"})) {
      cfg.policies.push_back(parse_policy(name));
    }
    auto parse_norm = [](const nlohmann::json& v) {
      return v.is_string() ? PNorm::parse(v.get<std::string>()) : PNorm::finite(v.get<double>());
    };
    if (j.contains("p")) {
      const auto& p = j.at("p");
      if (p.is_array()) {
        for (const auto& v : p) cfg.norms.push_back(parse_norm(v));
      } else {
        cfg.norms.push_back(parse_norm(p));
      }
    } else {
      cfg.norms.push_back(PNorm::finite(2.0));
    }
    if (!j.contains("budgets")) throw ValidationError("config: 'budgets' is required");
    const auto& b = j.at("budgets");
    if (b.is_array()) {
      cfg.budgets = b.get<std::vector<double>>();
    } else if (b.is_object()) {
      cfg.budgets = log_spaced(b.at("min").get<double>(), b.at("max").get<double>(),
                               b.at("points").get<std::size_t>());
    } else {
      throw ValidationError("config: 'budgets' must be a list or {min, max, points}");
    }
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.record_timing = j.value("record_timing", false);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path));
}

struct RunRecord {
  double budget = 0.0;
  PolicyKind policy = PolicyKind::uniform;
  PNorm p = PNorm::finite(2.0);
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double error = 0.0;  // NaN unless status == "ok"
  double spent = 0.0;
  std::string status = "ok";
  double wall_ms = 0.0;
};

struct SummaryRow {
  double budget = 0.0;
  PolicyKind policy = PolicyKind::uniform;
  PNorm p = PNorm::finite(2.0);
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

/// Linear interpolation between order statistics at h = (n - 1) q.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// One row per (budget, policy, p) group with at least one ok run, in
/// first-appearance order. Failed runs are excluded.
inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ValidationError("summarize: no records");
  struct Group {
    SummaryRow row;
    std::vector<double> errors;
  };
  std::vector<Group> groups;
  for (const auto& r : records) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.row.budget == r.budget && g.row.policy == r.policy && g.row.p == r.p;
    });
    if (it == groups.end()) {
      groups.push_back({SummaryRow{r.budget, r.policy, r.p}, {}});
      it = std::prev(groups.end());
    }
    if (r.status == "ok") it->errors.push_back(r.error);
  }
  std::vector<SummaryRow> out;
  for (auto& g : groups) {
    if (g.errors.empty()) continue;
    std::sort(g.errors.begin(), g.errors.end());
    detail::CompensatedSum s;
    for (double e : g.errors) s.add(e);
    g.row.n = g.errors.size();
    g.row.mean = s.value() / static_cast<double>(g.errors.size());
    g.row.median = quantile_sorted(g.errors, 0.5);
    g.row.q10 = quantile_sorted(g.errors, 0.1);
    g.row.q90 = quantile_sorted(g.errors, 0.9);
    out.push_back(g.row);
  }
  return out;
}

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<SummaryRow> summary;
};

/// Worker count: BJ_THREADS if set and positive, else hardware concurrency.
inline std::size_t worker_count(std::size_t tasks) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BJ_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, tasks));
}

namespace detail {

// Seed domains keep instance and sampling streams apart.
inline constexpr std::uint64_t kInstanceStream = 0x1;
inline constexpr std::uint64_t kPolicyStream = 0x2;

struct RunEnvironment {
  ProblemInstance instance;
  std::unique_ptr<JudgeSampler> sampler;
};

}  // namespace detail

/// Runs one policy once. Budget precondition failures come back as a
/// non-ok status instead of an exception.
inline RunRecord run_policy_once(PolicyKind policy, const ProblemInstance& inst,
                                 const JudgeSampler& sampler, double budget, const PNorm& p,
                                 double delta, std::uint64_t seed) {
  RunRecord rec;
  rec.budget = budget;
  rec.policy = policy;
  rec.p = p;
  rec.seed = seed;
  Rng rng = make_rng(seed);
  try {
    PolicyResult result;
    switch (policy) {
      case PolicyKind::uniform:
        result = policy_uniform(sampler, inst.costs, inst.score_range, budget, rng);
        break;
      case PolicyKind::oracle:
        result = policy_oracle(inst, sampler, budget, p, rng);
        break;
      case PolicyKind::est_ivwe_bounded:
        result = policy_est_ivwe_bounded(sampler, inst.costs, inst.score_range, budget, p, delta,
                                         rng);
        break;
      case PolicyKind::est_ivwe_gaussian:
        result = policy_est_ivwe_gaussian(sampler, inst.costs, inst.score_range, budget, p,
                                          delta, rng);
        break;
    }
    if (result.spent > budget) {
      throw std::logic_error(detail::concat("policy ", to_string(policy), " spent ",
                                            result.spent, " > budget ", budget));
    }
    rec.error = lp_error(result.estimate, inst.scores, p);
    rec.spent = result.spent;
  } catch (const StarvedQueryError&) {
    rec.status = "starved_query";
  } catch (const BudgetError&) {
    rec.status = "insufficient_budget";
  }
  if (rec.status != "ok") {
    rec.error = std::numeric_limits<double>::quiet_NaN();
    rec.spent = 0.0;
  }
  return rec;
}

/// The full sweep. Records are ordered by (budget, policy, p, run) in
/// config order whatever the thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto& env = cfg.environment;

  // Environments: one per run, or a single shared one.
  std::optional<ResamplingPool> pool;
  std::vector<detail::RunEnvironment> envs;
  const bool shared = env.kind == EnvironmentKind::pool || env.fixed_instance;
  const std::size_t env_count = shared ? 1 : cfg.repetitions;
  if (env.kind == EnvironmentKind::pool) {
    PoolLoadOptions opts;
    opts.min_samples = env.min_samples;
    opts.score_range = env.score_range;
    pool = load_pool(env.path, opts).pool;
  }
  for (std::size_t r = 0; r < env_count; ++r) {
    detail::RunEnvironment e;
    if (env.kind == EnvironmentKind::pool) {
      e.instance = pool_instance(*pool, env.cost);
      e.sampler = std::make_unique<PoolSampler>(*pool);
    } else {
      Rng rng = make_rng(derive_seed(cfg.seed, {detail::kInstanceStream, shared ? 0 : r}));
      e.instance = synthetic_instance(env.k_count, env.j_count, rng, env.prior);
      if (env.kind == EnvironmentKind::synthetic) {
        e.sampler = std::make_unique<BetaJudgeSampler>(beta_judges(e.instance));
      } else {
        e.sampler = std::make_unique<GaussianJudgeSampler>(e.instance);
      }
    }
    envs.push_back(std::move(e));
  }

  struct Task {
    std::size_t budget, policy, norm, run;
  };
  std::vector<Task> tasks;
  for (std::size_t b = 0; b < cfg.budgets.size(); ++b) {
    for (std::size_t q = 0; q < cfg.policies.size(); ++q) {
      for (std::size_t n = 0; n < cfg.norms.size(); ++n) {
        for (std::size_t r = 0; r < cfg.repetitions; ++r) tasks.push_back({b, q, n, r});
      }
    }
  }

  ExperimentResult result;
  result.records.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      try {
        const auto& e = envs[shared ? 0 : t.run];
        const std::uint64_t seed =
            derive_seed(cfg.seed, {detail::kPolicyStream, t.budget, t.policy, t.norm, t.run});
        const auto start = std::chrono::steady_clock::now();
        RunRecord rec = run_policy_once(cfg.policies[t.policy], e.instance, *e.sampler,
                                        cfg.budgets[t.budget], cfg.norms[t.norm], cfg.delta,
                                        seed);
        const auto stop = std::chrono::steady_clock::now();
        rec.run = t.run;
        if (cfg.record_timing) {
          rec.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        }
        result.records[i] = std::move(rec);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  const std::size_t n_workers = worker_count(tasks.size());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool_threads;
    for (std::size_t w = 0; w < n_workers; ++w) pool_threads.emplace_back(worker);
    for (auto& th : pool_threads) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  bool any_ok = false;
  for (const auto& r : result.records) any_ok = any_ok || r.status == "ok";
  if (any_ok) result.summary = summarize(result.records);
  return result;
}

inline void write_raw_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << "budget,policy,p,run,seed,error,spent,status,wall_ms\n";
  for (const auto& r : records) {
    out << format_real(r.budget) << ',' << to_string(r.policy) << ',' << r.p.to_string() << ','
        << r.run << ',' << r.seed << ',' << (r.status == "ok" ? format_real(r.error) : "")
        << ',' << format_real(r.spent) << ',' << r.status << ',' << format_real(r.wall_ms)
        << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "budget,policy,p,n,mean,median,q10,q90\n";
  for (const auto& r : rows) {
    out << format_real(r.budget) << ',' << to_string(r.policy) << ',' << r.p.to_string() << ','
        << r.n << ',' << format_real(r.mean) << ',' << format_real(r.median) << ','
        << format_real(r.q10) << ',' << format_real(r.q90) << '\n';
  }
}

/// Writes raw.csv and summary.csv into the output directory.
inline void write_outputs(const std::string& dir, const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  const auto base = std::filesystem::path(dir);
  std::ofstream raw(base / "raw.csv");
  std::ofstream summary(base / "summary.csv");
  if (!raw || !summary) throw ValidationError("cannot write outputs into '" + dir + "'");
  write_raw_csv(raw, result.records);
  write_summary_csv(summary, result.summary);
}

}  // namespace bj
