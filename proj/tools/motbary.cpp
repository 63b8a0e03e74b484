#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "motbary/motbary.hpp"

namespace fs = std::filesystem;
using namespace motbary;

namespace {

/// Parses "uniform" or a comma-separated list.
std::optional<std::vector<double>> parse_lambda(const std::string& s) {
  if (s.empty() || s == "uniform") return std::nullopt;
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(detail::parse_double(tok, 1));
  return out;
}

/// Options shared by the subcommands that read measures.
struct CommonOptions {
  std::vector<std::string> inputs;
  std::string algo = "greedy";
  std::string lambda = "uniform";
  std::uint64_t seed = 0;
  std::size_t oracle_guard = kDefaultOracleGuard;
  std::string format;
  std::string report;

  void add_to(CLI::App* app, bool with_algo) {
    app->add_option("inputs", inputs, "Measure files")->required();
    if (with_algo) {
      app->add_option("--algo", algo, "reference | greedy | reference-random | greedy-random | oracle")
          ->capture_default_str();
    }
    app->add_option("--lambda", lambda, "Comma-separated weights or 'uniform'")->capture_default_str();
    app->add_option("--seed", seed, "Seed for the randomized variants")->capture_default_str();
    app->add_option("--oracle-guard", oracle_guard, "Maximum dense LP variable count")->capture_default_str();
    app->add_option("--format", format, "Input format: json | csv | image (default: by extension)");
    app->add_option("--report", report, "Write the cost report JSON here");
  }

  RunConfig config() const {
    RunConfig cfg;
    const auto a = parse_algorithm(algo);
    if (!a) throw InvalidArgument("unknown algorithm '" + algo + "'");
    cfg.algorithm = *a;
    cfg.lambda = parse_lambda(lambda);
    cfg.seed = seed;
    cfg.oracle_guard = oracle_guard;
    for (const auto& p : inputs) cfg.inputs.emplace_back(p);
    if (!format.empty()) cfg.input_format = parse_measure_format(format);
    cfg.report_out = report;
    return cfg;
  }
};

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return exit_code_for(e, std::cerr);
  }
}

void write_instance(const fs::path& dir, const std::vector<DiscreteMeasure>& ms, MeasureFormat fmt,
                    const std::string& prefix = "mu") {
  const std::string ext = fmt == MeasureFormat::csv ? ".csv" : ".json";
  for (std::size_t i = 0; i < ms.size(); ++i) {
    save_measure(dir / (prefix + std::to_string(i + 1) + ext), ms[i], fmt);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse multi-marginal transport and Wasserstein-2 barycenters"};
  app.require_subcommand(1);

  // barycenter / mot
  CommonOptions bary_opts;
  std::string bary_plan, bary_out, bary_out_format = "json";
  bool bary_oracle = false;
  auto* bary = app.add_subcommand("barycenter", "Compute a barycenter from an approximate or exact plan");
  bary_opts.add_to(bary, true);
  bary->add_option("--plan", bary_plan, "Write the plan JSON here");
  bary->add_option("--out", bary_out, "Write the barycenter measure here")->required();
  bary->add_option("--out-format", bary_out_format, "json | csv")->capture_default_str();
  bary->add_flag("--oracle", bary_oracle, "Include the exact optimum in the report");

  CommonOptions mot_opts;
  std::string mot_plan;
  bool mot_oracle = false;
  auto* mot = app.add_subcommand("mot", "Compute a multi-marginal plan only");
  mot_opts.add_to(mot, true);
  mot->add_option("--plan", mot_plan, "Write the plan JSON here")->required();
  mot->add_flag("--oracle", mot_oracle, "Include the exact optimum in the report");

  CommonOptions orc_opts;
  std::string orc_plan;
  auto* orc = app.add_subcommand("oracle", "Solve the multi-marginal LP exactly (small instances)");
  orc_opts.add_to(orc, false);
  orc->add_option("--plan", orc_plan, "Write the optimal plan JSON here");

  // gen
  std::string gen_kind, gen_dir = ".", gen_format = "json";
  std::size_t gen_n = 10, gen_m = 0, gen_res = 60, gen_atoms = 5, gen_dim = 2;
  double gen_eps = 1e-3;
  std::uint64_t gen_seed = 0;
  bool gen_torus = false;
  auto* gen = app.add_subcommand("gen", "Generate benchmark and worst-case instances");
  gen->add_option("kind", gen_kind, "ellipses | clouds | reference-worst | greedy-worst | neither")
      ->required()
      ->check(CLI::IsMember({"ellipses", "clouds", "reference-worst", "greedy-worst", "neither"}));
  gen->add_option("-n,--count", gen_n, "Number of measures")->capture_default_str();
  gen->add_option("-m,--atoms-per-circle", gen_m, "Atoms per circle for worst cases (default 64 / 128)");
  gen->add_option("--eps", gen_eps, "Perturbation for the reference worst case")->capture_default_str();
  gen->add_option("--res", gen_res, "Ellipse image resolution")->capture_default_str();
  gen->add_option("--atoms", gen_atoms, "Atoms per random cloud")->capture_default_str();
  gen->add_option("--dim", gen_dim, "Dimension of random clouds")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--out-dir", gen_dir, "Output directory")->capture_default_str();
  gen->add_option("--format", gen_format, "json | csv | image (image: ellipses only)")->capture_default_str();
  gen->add_flag("--torus", gen_torus, "Keep raw circle angles instead of the planar embedding");

  // grid
  CommonOptions grid_opts;
  std::size_t grid_k = 5, grid_workers = 0;
  std::string grid_mode = "reuse", grid_dir = ".", grid_out_format = "json";
  auto* grid = app.add_subcommand("grid", "Barycenters over a grid of weight vectors");
  grid->add_option("inputs", grid_opts.inputs, "Measure files")->required();
  grid->add_option("--format", grid_opts.format, "Input format: json | csv | image");
  grid->add_option("-k", grid_k, "Grid points per side")->capture_default_str();
  grid->add_option("--mode", grid_mode, "reuse | recompute")->capture_default_str();
  grid->add_option("--out-dir", grid_dir, "Output directory")->capture_default_str();
  grid->add_option("--out-format", grid_out_format, "json | csv")->capture_default_str();
  grid->add_option("--workers", grid_workers, "Worker threads (0: all cores)")->capture_default_str();

  // check
  CommonOptions chk_opts;
  std::string chk_plan;
  bool chk_oracle = false;
  auto* chk = app.add_subcommand("check", "Run the plan invariants on a plan file");
  chk_opts.add_to(chk, false);
  chk->add_option("--plan", chk_plan, "Plan JSON to check")->required();
  chk->add_flag("--oracle", chk_oracle, "Also compare against the exact optimum");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (*bary || *mot) {
    const bool is_bary = bary->parsed();
    return guarded([&] {
      auto cfg = (is_bary ? bary_opts : mot_opts).config();
      cfg.plan_out = is_bary ? bary_plan : mot_plan;
      cfg.report_with_oracle = is_bary ? bary_oracle : mot_oracle;
      if (is_bary) {
        cfg.barycenter_out = bary_out;
        cfg.output_format = parse_measure_format(bary_out_format);
      }
      return run_barycenter(cfg, std::cout, std::cerr);
    });
  }

  if (*orc) {
    return guarded([&] {
      auto cfg = orc_opts.config();
      const auto ms = load_inputs(cfg);
      const auto w = resolve_weights(cfg, ms.size());
      const auto r = exact_mot_lp(ms, w, cfg.oracle_guard);
      if (!orc_plan.empty()) save_plan(orc_plan, r.plan);
      if (!cfg.report_out.empty()) {
        ReportOptions ro;
        ro.algorithm = Algorithm::oracle;
        save_report(cfg.report_out, make_report(r.plan, ms, w, ro));
      }
      std::printf("phi=%.17g dual=%.17g gap=%.3g supp=%zu/%zu iterations=%zu\n", r.phi, r.dual_value,
                  r.duality_gap, r.plan.size(), sparsity_bound(r.plan), r.iterations);
      return int(kExitOk);
    });
  }

  if (*gen) {
    return guarded([&] {
      const fs::path dir = gen_dir;
      const auto fmt = parse_measure_format(gen_format);
      if (fmt == MeasureFormat::image && gen_kind != "ellipses") {
        throw InvalidArgument("image output is only available for ellipses");
      }
      if (gen_kind == "ellipses") {
        if (fmt == MeasureFormat::image) {
          const auto imgs = gen_nested_ellipse_images(gen_n, gen_res, gen_seed);
          for (std::size_t i = 0; i < imgs.size(); ++i) {
            save_pgm(dir / ("ellipse" + std::to_string(i + 1) + ".pgm"), imgs[i]);
          }
        } else {
          write_instance(dir, gen_nested_ellipses(gen_n, gen_res, gen_seed), fmt, "ellipse");
        }
      } else if (gen_kind == "clouds") {
        write_instance(dir, gen_random_clouds(gen_n, gen_atoms, gen_dim, gen_seed), fmt);
      } else if (gen_kind == "neither") {
        const auto inst = gen_neither_better();
        write_instance(dir / "order_a", inst.order_a, fmt);
        write_instance(dir / "order_b", inst.order_b, fmt);
        save_plan(dir / "order_a" / "optimal_plan.json", inst.optimal_a);
        save_plan(dir / "order_b" / "optimal_plan.json", inst.optimal_b);
      } else {
        const bool ref = gen_kind == "reference-worst";
        const std::size_t m = gen_m != 0 ? gen_m : (ref ? 64 : 128);
        const auto inst = ref ? gen_reference_worst_case(gen_n, m, gen_eps, !gen_torus)
                              : gen_greedy_worst_case(gen_n, m, {}, !gen_torus);
        write_instance(dir, inst.measures, fmt);
        save_plan(dir / "competitor_plan.json", inst.competitor);
        save_plan(dir / "predicted_plan.json", inst.predicted);
      }
      std::cout << "wrote " << gen_kind << " instance to " << dir.string() << "\n";
      return int(kExitOk);
    });
  }

  if (*grid) {
    return guarded([&] {
      auto cfg = grid_opts.config();
      cfg.output_format = parse_measure_format(grid_out_format);
      GridSpec spec;
      spec.k = grid_k;
      spec.mode = parse_grid_mode(grid_mode);
      spec.out_dir = grid_dir;
      spec.workers = grid_workers;
      return run_weight_grid(cfg, spec, std::cout, std::cerr);
    });
  }

  if (*chk) {
    return guarded([&] {
      auto cfg = chk_opts.config();
      auto ms = load_inputs(cfg);
      const auto w = resolve_weights(cfg, ms.size());
      const auto plan = load_plan(chk_plan, ms);
      ReportOptions ro;
      ro.use_oracle = chk_oracle;
      ro.oracle_guard = cfg.oracle_guard;
      const auto r = make_report(plan, ms, w, ro);
      if (!cfg.report_out.empty()) save_report(cfg.report_out, r);
      const auto diag = validate_plan(plan);
      std::printf("feasible=%s marginal_error=%.3g supp=%zu/%zu phi=%.17g psi=%.17g lb=%.17g\n",
                  diag.feasible ? "yes" : "no", diag.max_marginal_discrepancy, r.atoms, r.sparsity_bound, r.phi,
                  r.psi, r.pairwise_lb);
      for (const auto& v : r.violations) std::cout << "violation: " << v << "\n";
      return r.ok() ? int(kExitOk) : int(kExitSolver);
    });
  }
  return kExitConfig;
}
