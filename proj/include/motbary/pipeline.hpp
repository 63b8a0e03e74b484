#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "motbary/analysis.hpp"
#include "motbary/detail/parallel.hpp"
#include "motbary/error.hpp"
#include "motbary/exact_oracle.hpp"
#include "motbary/io.hpp"
#include "motbary/measures.hpp"
#include "motbary/mot_approx.hpp"

namespace motbary {

/// Process exit statuses of the command-line runs.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitSolver = 3,
  kExitGuard = 4,
};

/// Everything a barycenter run needs; paths left empty are not written.
struct RunConfig {
  Algorithm algorithm = Algorithm::greedy;
  std::optional<std::vector<double>> lambda;  ///< nullopt means uniform
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;
  std::optional<MeasureFormat> input_format;  ///< nullopt: from extension
  std::filesystem::path plan_out;
  std::filesystem::path barycenter_out;
  std::filesystem::path report_out;
  MeasureFormat output_format = MeasureFormat::json;
  bool report_with_oracle = false;
  std::size_t oracle_guard = kDefaultOracleGuard;
};

/// Resolves lambda and enforces algorithm/weight compatibility.
inline SimplexWeights resolve_weights(const RunConfig& cfg, std::size_t n) {
  if (n < 2) throw InvalidArgument("at least two measures are required");
  SimplexWeights w = SimplexWeights::uniform(n);
  if (cfg.lambda) {
    if (cfg.lambda->size() != n) {
      throw InvalidArgument("lambda has " + std::to_string(cfg.lambda->size()) + " entries for " +
                            std::to_string(n) + " measures");
    }
    w = SimplexWeights(*cfg.lambda);
  }
  if (cfg.algorithm == Algorithm::greedy_random && !w.is_uniform()) {
    throw InvalidArgument("greedy-random requires uniform lambda");
  }
  return w;
}

/// Runs one algorithm on an instance. seed only affects the randomized variants.
inline MultiMarginalPlan solve_mot(std::span<const DiscreteMeasure> measures, const SimplexWeights& weights,
                                   Algorithm algo, std::uint64_t seed = 0,
                                   std::size_t oracle_guard = kDefaultOracleGuard) {
  switch (algo) {
    case Algorithm::reference:
      return reference_algorithm(measures, weights);
    case Algorithm::greedy:
      return greedy_algorithm(measures, weights);
    case Algorithm::reference_random:
      return randomized_reference(measures, weights, seed);
    case Algorithm::greedy_random:
      return randomized_greedy(measures, weights, seed);
    case Algorithm::oracle:
      return exact_mot_lp(measures, weights, oracle_guard).plan;
  }
  throw InvalidArgument("unknown algorithm");
}

struct RunResult {
  MultiMarginalPlan plan;
  DiscreteMeasure barycenter;
  CostReport report;
  double seconds = 0.0;
};

inline std::vector<DiscreteMeasure> load_inputs(const RunConfig& cfg) {
  std::vector<DiscreteMeasure> ms;
  ms.reserve(cfg.inputs.size());
  for (const auto& p : cfg.inputs) {
    ms.push_back(cfg.input_format ? load_measure(p, *cfg.input_format) : load_measure(p));
  }
  return ms;
}

/// Solve, push forward and evaluate; writes nothing.
inline RunResult compute_barycenter(std::span<const DiscreteMeasure> measures, const RunConfig& cfg) {
  const auto weights = resolve_weights(cfg, measures.size());
  const auto start = std::chrono::steady_clock::now();
  auto plan = solve_mot(measures, weights, cfg.algorithm, cfg.seed, cfg.oracle_guard);
  auto bary = pushforward_mean(plan, weights);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  W2Cache cache;
  ReportOptions ro;
  ro.use_oracle = cfg.report_with_oracle;
  ro.oracle_guard = cfg.oracle_guard;
  ro.algorithm = cfg.algorithm;
  ro.cache = &cache;
  auto report = make_report(plan, measures, weights, ro);
  return {std::move(plan), std::move(bary), std::move(report), secs};
}

inline std::string summary_line(const RunResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "phi=%.10g ratio_vs_lb=%.6g supp=%zu/%zu time=%.3fs", r.report.phi,
                r.report.ratio_vs_lb, r.report.atoms, r.report.sparsity_bound, r.seconds);
  std::string s = buf;
  if (r.report.phi_exact) {
    std::snprintf(buf, sizeof buf, " phi_exact=%.10g ratio=%.6g", *r.report.phi_exact, *r.report.ratio_vs_exact);
    s += buf;
  }
  return s;
}

/// Maps an exception to its exit status and prints it.
inline int exit_code_for(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const OracleGuardExceeded*>(&e)) return kExitGuard;
  if (dynamic_cast<const SolverError*>(&e)) return kExitSolver;
  if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const IoError*>(&e)) return kExitConfig;
  return kExitSolver;
}

/**
 * @brief Loads the inputs, runs the configured algorithm and writes the plan,
 * barycenter and report files.
 *
 * Prints a one-line summary to out. Returns kExitOk, kExitConfig,
 * kExitSolver (also when the report flags a violated guarantee) or kExitGuard.
 */
inline int run_barycenter(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const auto measures = load_inputs(cfg);
    resolve_weights(cfg, measures.size());
    const auto r = compute_barycenter(measures, cfg);
    if (!cfg.plan_out.empty()) save_plan(cfg.plan_out, r.plan);
    if (!cfg.barycenter_out.empty()) save_measure(cfg.barycenter_out, r.barycenter, cfg.output_format);
    if (!cfg.report_out.empty()) save_report(cfg.report_out, r.report);
    out << summary_line(r) << "\n";
    for (const auto& v : r.report.violations) err << "violation: " << v << "\n";
    return r.report.ok() ? kExitOk : kExitSolver;
  } catch (const std::exception& e) {
    return exit_code_for(e, err);
  }
}

// ---------------------------------------------------------------------------
// Weight grids

enum class GridMode { reuse, recompute };

inline GridMode parse_grid_mode(std::string_view s) {
  if (s == "reuse") return GridMode::reuse;
  if (s == "recompute") return GridMode::recompute;
  throw InvalidArgument("unknown grid mode '" + std::string(s) + "'");
}

inline constexpr double kGridClamp = 1e-6;

/**
 * @brief Weight vectors of a K-point-per-side grid.
 *
 * N = 4: bilinear interpolation between the unit vectors placed at the
 * corners of a K x K square, so K^2 vectors in row-major (t, s) order.
 * Other N: the simplex lattice {c / (K - 1) : c in N^N, sum c = K - 1} in
 * lexicographic order of c. Coordinates are clamped to kGridClamp.
 */
inline std::vector<SimplexWeights> grid_weights(std::size_t n, std::size_t k) {
  if (n < 2) throw InvalidArgument("weight grids need at least two measures");
  if (k < 2) throw InvalidArgument("weight grid needs K >= 2");
  std::vector<SimplexWeights> out;
  const double step = 1.0 / static_cast<double>(k - 1);
  if (n == 4) {
    for (std::size_t b = 0; b < k; ++b) {
      for (std::size_t a = 0; a < k; ++a) {
        const double s = static_cast<double>(a) * step;
        const double t = static_cast<double>(b) * step;
        out.push_back(SimplexWeights::clamped({(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t}, kGridClamp));
      }
    }
    return out;
  }
  std::vector<std::size_t> c(n, 0);
  auto fill = [&](auto&& self, std::size_t i, std::size_t left) -> void {
    if (i + 1 == n) {
      c[i] = left;
      std::vector<double> raw(n);
      for (std::size_t j = 0; j < n; ++j) raw[j] = static_cast<double>(c[j]) * step;
      out.push_back(SimplexWeights::clamped(std::move(raw), kGridClamp));
      return;
    }
    for (std::size_t v = 0; v <= left; ++v) {
      c[i] = v;
      self(self, i + 1, left - v);
    }
  };
  fill(fill, 0, k - 1);
  return out;
}

/// File name encoding lambda, e.g. "lambda_0.25_0.25_0.25_0.25".
inline std::string lambda_file_stem(const SimplexWeights& w) {
  std::string s = "lambda";
  char buf[32];
  for (double v : w.values()) {
    std::snprintf(buf, sizeof buf, "_%.6f", v);
    s += buf;
  }
  return s;
}

/**
 * @brief Barycenters for every weight vector.
 *
 * reuse: one greedy plan at uniform lambda, pushed forward with each
 * weight vector. recompute: one greedy plan per weight vector.
 */
inline std::vector<DiscreteMeasure> weight_grid_barycenters(std::span<const DiscreteMeasure> measures,
                                                            std::span<const SimplexWeights> grid, GridMode mode,
                                                            std::size_t workers = 0) {
  std::optional<MultiMarginalPlan> shared;
  if (mode == GridMode::reuse) shared = greedy_algorithm(measures, SimplexWeights::uniform(measures.size()));
  return detail::parallel_map<DiscreteMeasure>(
      grid.size(),
      [&](std::size_t k) {
        if (shared) return pushforward_mean(*shared, grid[k]);
        return pushforward_mean(greedy_algorithm(measures, grid[k]), grid[k]);
      },
      workers);
}

struct GridSpec {
  std::size_t k = 3;
  GridMode mode = GridMode::reuse;
  std::filesystem::path out_dir = ".";
  std::size_t workers = 0;  ///< 0: hardware concurrency
};

/// Writes one barycenter file per grid point; returns the written paths.
inline std::vector<std::filesystem::path> write_weight_grid(std::span<const DiscreteMeasure> measures,
                                                            const GridSpec& spec, MeasureFormat fmt) {
  const auto grid = grid_weights(measures.size(), spec.k);
  const auto bary = weight_grid_barycenters(measures, grid, spec.mode, spec.workers);
  const std::string ext = fmt == MeasureFormat::csv ? ".csv" : ".json";
  std::vector<std::filesystem::path> paths(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) paths[k] = spec.out_dir / (lambda_file_stem(grid[k]) + ext);
  detail::parallel_for(grid.size(), [&](std::size_t k) { save_measure(paths[k], bary[k], fmt); }, spec.workers);
  return paths;
}

inline int run_weight_grid(const RunConfig& cfg, const GridSpec& spec, std::ostream& out, std::ostream& err) {
  try {
    const auto measures = load_inputs(cfg);
    if (measures.size() < 2) throw InvalidArgument("at least two measures are required");
    const auto paths = write_weight_grid(measures, spec, cfg.output_format);
    out << "wrote " << paths.size() << " barycenters to " << spec.out_dir.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    return exit_code_for(e, err);
  }
}

// ---------------------------------------------------------------------------
// Plan checks

/// Runs the plan invariants (feasibility, sparsity, cost inequalities) and
/// returns every violation found.
inline std::vector<std::string> check_plan(const MultiMarginalPlan& plan, const SimplexWeights& weights,
                                           bool with_oracle = false, std::size_t guard = kDefaultOracleGuard) {
  ReportOptions ro;
  ro.use_oracle = with_oracle;
  ro.oracle_guard = guard;
  return make_report(plan, plan.measures(), weights, ro).violations;
}

}  // namespace motbary
