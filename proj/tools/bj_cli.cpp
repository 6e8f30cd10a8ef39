// Command-line front end: simulate, allocate, hardness, validate, ingest,
// generate.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bj/allocation.hpp"
#include "bj/environments.hpp"
#include "bj/hardness.hpp"
#include "bj/harness.hpp"
#include "bj/io.hpp"

namespace {

using nlohmann::json;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    const std::string item = text.substr(start, end == std::string::npos ? end : end - start);
    out.push_back(bj::detail::parse_real(bj::detail::trim(item), 0, "list entry"));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

json allocation_json(const bj::ProblemInstance& inst, const bj::PNorm& p,
                     std::optional<double> budget) {
  const auto opt = bj::optimal_allocation(inst, p);
  const auto value = bj::allocation_objective(opt.weights, inst, p);
  json out;
  out["p"] = p.to_string();
  out["objective"] = opt.objective;
  out["lower_order_term"] = value.b_p;
  out["best_judge"] = opt.best_judge;
  std::vector<double> w(inst.num_queries());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = opt.weights.weights(k, opt.best_judge[k]);
  out["weights"] = w;
  if (budget) {
    const auto counts = bj::round_allocation(opt.weights, inst.costs, *budget);
    std::vector<std::int64_t> n(inst.num_queries());
    for (std::size_t k = 0; k < n.size(); ++k) n[k] = counts.counts(k, opt.best_judge[k]);
    out["budget"] = *budget;
    out["counts"] = n;
    out["spent"] = counts.spent(inst.costs);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted multi-judge score estimation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a budget sweep from a JSON config");
  std::string sim_config;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_output;
  bool sim_fixed = false;
  sim->add_option("--config", sim_config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", sim_seed, "override the master seed");
  sim->add_option("--output", sim_output, "override the output directory");
  sim->add_flag("--fixed-instance", sim_fixed, "reuse one synthetic instance across runs");

  // allocate
  auto* alloc = app.add_subcommand("allocate", "print the optimal allocation for an instance");
  std::string alloc_instance;
  std::string alloc_p = "2";
  std::optional<double> alloc_budget;
  alloc->add_option("--instance", alloc_instance, "instance file (JSON)")->required()->check(CLI::ExistingFile);
  alloc->add_option("--p", alloc_p, "norm exponent (real >= 1 or inf)");
  alloc->add_option("--budget", alloc_budget, "also round to integer pulls under this budget");

  // hardness
  auto* hard = app.add_subcommand("hardness", "lower-bound constructions");
  hard->require_subcommand(1);
  auto* kl = hard->add_subcommand("kl-grid", "check the Beta KL bounds on the feasibility grid");
  int kl_steps = 80;
  std::string kl_output;
  kl->add_option("--steps", kl_steps, "grid steps per unit (grid spacing 1/steps)");
  kl->add_option("--output", kl_output, "CSV path (default stdout)");
  auto* hinst = hard->add_subcommand("instance", "closed-form hard perturbation");
  std::string h_weights;
  std::string h_scores;
  double h_eps = 0.1;
  std::string h_p = "2";
  hinst->add_option("--weights", h_weights, "comma-separated w_k > 0")->required();
  hinst->add_option("--scores", h_scores, "comma-separated s*_k (default zeros)");
  hinst->add_option("--eps", h_eps, "error radius eps");
  hinst->add_option("--p", h_p, "norm exponent");
  auto* cube = hard->add_subcommand("assouad", "perturbation cube for an instance");
  std::string c_instance;
  std::string c_p = "2";
  double c_budget = 0.0;
  cube->add_option("--instance", c_instance, "instance file (JSON)")->required()->check(CLI::ExistingFile);
  cube->add_option("--p", c_p, "norm exponent");
  cube->add_option("--budget", c_budget, "budget B")->required();

  // validate
  auto* val = app.add_subcommand("validate", "lint an instance or pool file");
  std::string v_instance;
  std::string v_pool;
  std::size_t v_min = 25;
  val->add_option("--instance", v_instance, "instance file (JSON)");
  val->add_option("--pool", v_pool, "pool file (CSV)");
  val->add_option("--min-samples", v_min, "minimum records per pair for consensus filtering");

  // ingest
  auto* ing = app.add_subcommand("ingest", "consensus-filter a pool file");
  std::string i_input;
  std::string i_output;
  std::string i_rejects;
  std::size_t i_min = 25;
  std::optional<double> i_range;
  ing->add_option("--input", i_input, "raw pool CSV")->required()->check(CLI::ExistingFile);
  ing->add_option("--output", i_output, "filtered CSV with a truth column")->required();
  ing->add_option("--rejects", i_rejects, "rejects report CSV");
  ing->add_option("--min-samples", i_min, "minimum records per pair");
  ing->add_option("--score-range", i_range, "score range R (default: max observed)");

  // generate
  auto* gen = app.add_subcommand("generate", "write a random synthetic instance");
  std::size_t g_k = 10;
  std::size_t g_j = 3;
  std::string g_prior = "default";
  std::uint64_t g_seed = 0;
  std::string g_output;
  gen->add_option("--K", g_k, "number of queries");
  gen->add_option("--J", g_j, "number of judges");
  gen->add_option("--prior", g_prior, "default | bad_is_expensive | bad_is_cheap");
  gen->add_option("--seed", g_seed, "seed");
  gen->add_option("--output", g_output, "instance path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      auto cfg = bj::load_config(sim_config);
      if (sim_seed) cfg.seed = *sim_seed;
      if (!sim_output.empty()) cfg.output_dir = sim_output;
      if (sim_fixed) cfg.environment.fixed_instance = true;
      const auto result = bj::run_experiment(cfg);
      bj::write_outputs(cfg.output_dir, result);
      std::size_t failed = 0;
      for (const auto& r : result.records) failed += r.status == "ok" ? 0 : 1;
      std::cout << "wrote " << result.records.size() << " runs (" << failed
                << " precondition failures) to " << cfg.output_dir << "/raw.csv and "
                << cfg.output_dir << "/summary.csv\n";
    } else if (*alloc) {
      const auto inst = bj::load_instance(alloc_instance);
      std::cout << allocation_json(inst, bj::PNorm::parse(alloc_p), alloc_budget).dump(2) << '\n';
    } else if (*hard) {
      if (*kl) {
        const auto report = bj::validate_kl_bounds(kl_steps);
        std::ofstream file;
        if (!kl_output.empty()) {
          file.open(kl_output);
          if (!file) throw bj::ValidationError("cannot write '" + kl_output + "'");
        }
        std::ostream& out = kl_output.empty() ? std::cout : file;
        out << "q,d,kl_null,kl_adjacent,ratio_null,ratio_adjacent,bound_c1,bound_c2,pass\n";
        for (const auto& r : report.rows) {
          out << bj::format_real(r.q) << ',' << bj::format_real(r.d) << ','
              << bj::format_real(r.kl_null) << ',' << bj::format_real(r.kl_adjacent) << ','
              << bj::format_real(r.ratio_null) << ',' << bj::format_real(r.ratio_adjacent) << ','
              << bj::format_real(bj::kKlBoundNull) << ',' << bj::format_real(bj::kKlBoundAdjacent)
              << ',' << (r.pass ? "true" : "false") << '\n';
        }
        std::cerr << report.rows.size() << " grid points, " << report.violations
                  << " violations, max ratios " << report.max_ratio_null << " / "
                  << report.max_ratio_adjacent << '\n';
        return report.violations == 0 ? 0 : 1;
      }
      if (*hinst) {
        const auto w = parse_list(h_weights);
        const auto s = h_scores.empty() ? std::vector<double>(w.size(), 0.0) : parse_list(h_scores);
        const auto h = bj::hard_instance(s, w, h_eps, bj::PNorm::parse(h_p));
        json out;
        out["perturbed_scores"] = h.perturbed_scores;
        out["objective_value"] = h.objective_value;
        out["regime"] = h.regime == bj::HardRegime::dense_p_lt_2 ? "dense_p_lt_2" : "sparse_p_ge_2";
        std::cout << out.dump(2) << '\n';
      } else if (*cube) {
        const auto inst = bj::load_instance(c_instance);
        const auto c = bj::assouad_cube(inst, bj::PNorm::parse(c_p), c_budget);
        json out;
        out["center"] = c.center;
        out["deltas"] = c.deltas;
        out["threshold"] = c.threshold;
        out["radius"] = c.radius;
        std::cout << out.dump(2) << '\n';
      }
    } else if (*val) {
      if (v_instance.empty() == v_pool.empty()) {
        throw bj::ValidationError("validate needs exactly one of --instance or --pool");
      }
      if (!v_instance.empty()) {
        const auto inst = bj::load_instance(v_instance);
        std::cout << "instance ok: K = " << inst.num_queries() << ", J = " << inst.num_judges()
                  << ", R = " << inst.score_range << '\n';
      } else {
        bj::PoolLoadOptions opts;
        opts.min_samples = v_min;
        const auto loaded = bj::load_pool(v_pool, opts);
        bj::pool_instance(loaded.pool);
        std::cout << "pool ok: " << loaded.pool.num_queries() << " queries kept, "
                  << loaded.rejects.size() << " rejected, J = " << loaded.pool.num_judges()
                  << ", R = " << loaded.pool.score_range << '\n';
      }
    } else if (*ing) {
      bj::PoolLoadOptions opts;
      opts.min_samples = i_min;
      opts.score_range = i_range;
      const auto loaded = bj::load_pool(i_input, opts);
      std::ofstream out(i_output);
      if (!out) throw bj::ValidationError("cannot write '" + i_output + "'");
      out << "query_id,judge_id,score,truth\n";
      const auto& pool = loaded.pool;
      for (std::size_t k = 0; k < pool.num_queries(); ++k) {
        for (std::size_t j = 0; j < pool.num_judges(); ++j) {
          for (double x : pool.scores(k, j)) {
            out << pool.query_ids[k] << ',' << pool.judge_ids[j] << ',' << bj::format_real(x)
                << ',' << bj::format_real(pool.truth[k]) << '\n';
          }
        }
      }
      if (!i_rejects.empty()) {
        std::ofstream rej(i_rejects);
        if (!rej) throw bj::ValidationError("cannot write '" + i_rejects + "'");
        rej << "query_id,reason\n";
        for (const auto& r : loaded.rejects) rej << r.query_id << ",\"" << r.reason << "\"\n";
      }
      std::cout << "kept " << pool.num_queries() << " queries, rejected "
                << loaded.rejects.size() << '\n';
    } else if (*gen) {
      bj::Rng rng = bj::make_rng(g_seed);
      const auto inst = bj::synthetic_instance(g_k, g_j, rng, bj::parse_prior(g_prior));
      if (g_output.empty()) {
        std::cout << bj::instance_to_json(inst).dump(2) << '\n';
      } else {
        bj::save_instance(inst, g_output);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
