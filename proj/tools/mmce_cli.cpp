// Command-line front end: selection-set reports, single-trial estimation,
// Monte-Carlo sweeps, and plot-ready data for the standard experiment set.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmce/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_array(const std::string& type, int n, int m, int m1, int m2,
              bool as_json) {
  const mmce::SelectionSet s = [&] {
    if (type == "nested") return mmce::nested_array(n, m);
    if (type == "mra") return mmce::mra(m, n);
    if (type == "coprime") return mmce::coprime_array(m1, m2, n);
    if (type == "ula") return mmce::ula_prefix(m, n);
    throw CLI::ValidationError("--type must be nested|mra|coprime|ula");
  }();
  const mmce::CoarrayReport r = mmce::difference_coarray(s);
  if (as_json) {
    json j;
    j["type"] = type;
    j["aperture"] = s.aperture();
    j["rf_chains"] = s.size();
    j["indices"] = s.indices();
    j["coarray"] = {{"lags", r.lags},
                    {"contiguous_span", r.contiguous_span},
                    {"holes", r.holes}};
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::cout << "selection (" << type << ", N=" << s.aperture()
            << ", M=" << s.size() << "):";
  for (int idx : s.indices()) std::cout << ' ' << idx;
  std::cout << "\ncoarray: contiguous span " << r.contiguous_span << ", "
            << r.lags.size() << " distinct lags, ";
  if (r.holes.empty()) {
    std::cout << "hole-free\n";
  } else {
    std::cout << r.holes.size() << " hole(s):";
    for (int h : r.holes) std::cout << ' ' << h;
    std::cout << '\n';
  }
  return 0;
}

void write_outputs(const fs::path& dir, const mmce::ExperimentResult& result) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "trials.csv");
    mmce::write_trials_csv(out, result.records);
  }
  {
    std::ofstream out(dir / "scatter.csv");
    mmce::write_scatter_csv(out, result.records);
  }
  {
    std::ofstream out(dir / "summary.json");
    out << mmce::summary_json(result).dump(2) << '\n';
  }
  std::cout << "wrote " << (dir / "trials.csv").string() << ", scatter.csv, "
            << "summary.json\n";
}

void apply_overrides(mmce::ScenarioConfig& c, std::uint64_t seed, bool has_seed,
                     const std::string& method, int threads, bool trace,
                     const fs::path& out) {
  if (has_seed) c.seed = seed;
  if (!method.empty()) {
    if (method == "all")
      c.methods = {"primal", "dual", "anm"};
    else
      c.methods = {method};
  }
  if (threads > 0) c.threads = threads;
  if (trace) c.solver.trace_path = (out / "solver_trace.csv").string();
}

int run_bench(const std::string& config_path, const fs::path& out,
              std::uint64_t seed, bool has_seed, const std::string& method,
              int threads, bool trace) {
  mmce::ScenarioConfig c = mmce::load_scenario(config_path);
  fs::create_directories(out);
  apply_overrides(c, seed, has_seed, method, threads, trace, out);
  const mmce::ExperimentResult result = mmce::run_experiment(c);
  write_outputs(out, result);
  for (const auto& a : result.aggregates)
    std::printf("%-7s snr %6.1f dB  median nmse %.4e  mean se %7.3f  "
                "median solve %.3fs  failures %d/%d\n",
                a.method.c_str(), a.snr_db, a.median_nmse, a.mean_se,
                a.median_solve_time_s, a.failures, a.trials);
  return 0;
}

int run_estimate(const std::string& config_path, const fs::path& out,
                 std::uint64_t seed, bool has_seed, const std::string& method,
                 bool trace) {
  mmce::ScenarioConfig c = mmce::load_scenario(config_path);
  if (!out.empty()) fs::create_directories(out);
  apply_overrides(c, seed, has_seed, method, 1, trace && !out.empty(), out);
  c.trials = 1;
  c.snr_db = {c.snr_db.front()};
  const mmce::ExperimentResult result = mmce::run_experiment(c);
  for (const auto& r : result.records) {
    std::printf("method %-7s snr %.1f dB  nmse %.4e  se %.3f (ideal %.3f)  "
                "K %d->%d  sigma^ %.3e  solve %.3fs%s%s\n",
                r.method.c_str(), r.snr_db, r.nmse, r.se_bits, r.se_ideal,
                r.k_true, r.k_hat, r.sigma_hat, r.solve_time_s,
                r.failed ? "  FAILED: " : "", r.failure.c_str());
    for (std::size_t i = 0; i < r.theta_true_deg.size(); ++i) {
      std::printf("  path %zu: theta %8.4f deg, f %7.5f", i,
                  r.theta_true_deg[i], r.f_true[i]);
      if (i < r.theta_err_deg.size())
        std::printf("   matched err: %.2e deg, %.2e cycles", r.theta_err_deg[i],
                    r.f_err[i]);
      std::printf("\n");
    }
  }
  if (!out.empty()) write_outputs(out, result);
  return 0;
}

mmce::ScenarioConfig figure_preset(int fig) {
  mmce::ScenarioConfig c;
  c.solver.max_iterations = 16000;
  c.solver.rel_tolerance = 3e-5;
  c.solver.abs_tolerance = 3e-7;
  switch (fig) {
    case 3:
      c.id = "fig3";
      c.n = 32; c.m = 11; c.array_type = "nested";
      c.l = 5; c.k = 7;
      c.snr_db = {20.0};
      c.trials = 1;
      c.methods = {"primal", "dual"};
      c.solver.max_iterations = 20000;
      c.solver.rel_tolerance = 1e-6;
      c.solver.abs_tolerance = 1e-8;
      break;
    case 4:
      // array-structure comparison; M = 6 keeps every strategy constructible
      c.id = "fig4";
      c.n = 32; c.m = 6;
      c.coprime_m1 = 3; c.coprime_m2 = 2;
      c.l = 5; c.k = 3;
      c.snr_db = {0.0, 10.0, 20.0, 30.0};
      c.trials = 25;
      c.methods = {"primal"};
      break;
    case 5:
    case 6:
      c.id = fig == 5 ? "fig5" : "fig6";
      c.n = 32; c.m = 11; c.array_type = "nested";
      c.l = 3; c.k = 3;
      c.snr_db = {-20.0, -10.0, 0.0, 10.0, 20.0, 30.0};
      c.trials = 25;
      c.methods = {"primal", "dual", "anm"};
      break;
    default:
      throw CLI::ValidationError("--fig must be one of 3, 4, 5, 6");
  }
  return c;
}

int run_figures(int fig, const fs::path& out, int trials, std::uint64_t seed,
                bool has_seed, int threads) {
  mmce::ScenarioConfig base = figure_preset(fig);
  if (trials > 0) base.trials = trials;
  if (has_seed) base.seed = seed;
  if (threads > 0) base.threads = threads;
  fs::create_directories(out);

  if (fig == 4) {
    // one sweep per selection strategy, merged into a single table
    mmce::ExperimentResult merged;
    merged.config = base;
    for (const std::string type : {"mra", "nested", "coprime", "ula"}) {
      mmce::ScenarioConfig c = base;
      c.array_type = type;
      c.id = type;
      const mmce::ExperimentResult r = mmce::run_experiment(c);
      merged.records.insert(merged.records.end(), r.records.begin(),
                            r.records.end());
      merged.aggregates.insert(merged.aggregates.end(), r.aggregates.begin(),
                               r.aggregates.end());
      for (const auto& a : r.aggregates)
        std::printf("%-8s snr %6.1f dB  median nmse %.4e  failures %d/%d\n",
                    type.c_str(), a.snr_db, a.median_nmse, a.failures,
                    a.trials);
    }
    write_outputs(out, merged);
    return 0;
  }
  const mmce::ExperimentResult result = mmce::run_experiment(base);
  write_outputs(out, result);
  for (const auto& a : result.aggregates)
    std::printf("%-7s snr %6.1f dB  median nmse %.4e  mean se %7.3f  "
                "median solve %.3fs\n",
                a.method.c_str(), a.snr_db, a.median_nmse, a.mean_se,
                a.median_solve_time_s);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Gridless joint AoA-Doppler channel estimation for switch-network "
      "mmWave receivers"};
  app.require_subcommand(1);

  // array
  auto* array_cmd =
      app.add_subcommand("array", "Build a selection set, print its coarray");
  std::string type = "nested";
  int n = 32, m = 11, m1 = 2, m2 = 3;
  bool as_json = false;
  array_cmd->add_option("--type", type, "nested|mra|coprime|ula")
      ->capture_default_str();
  array_cmd->add_option("--n", n, "total antennas N")->capture_default_str();
  array_cmd->add_option("--m", m, "RF chains M")->capture_default_str();
  array_cmd->add_option("--m1", m1, "coprime M1")->capture_default_str();
  array_cmd->add_option("--m2", m2, "coprime M2")->capture_default_str();
  array_cmd->add_flag("--json", as_json, "machine-readable output");

  // shared options
  std::string config_path, method;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0, trials = 0, fig = 5;
  bool trace = false;

  auto* est_cmd =
      app.add_subcommand("estimate", "Run a single trial from a scenario file");
  est_cmd->add_option("--config", config_path, "scenario JSON")->required();
  auto* est_seed = est_cmd->add_option("--seed", seed, "master seed override");
  est_cmd->add_option("--method", method, "primal|dual|anm|all");
  est_cmd->add_option("--out", out_dir, "output directory (optional)");
  est_cmd->add_flag("--trace", trace, "emit solver trace CSV");

  auto* bench_cmd =
      app.add_subcommand("bench", "Monte-Carlo sweep from a scenario file");
  bench_cmd->add_option("--config", config_path, "scenario JSON")->required();
  bench_cmd->add_option("--out", out_dir, "output directory")->required();
  auto* bench_seed = bench_cmd->add_option("--seed", seed, "master seed override");
  bench_cmd->add_option("--method", method, "primal|dual|anm|all");
  bench_cmd->add_option("--threads", threads, "worker threads (0 = auto)");
  bench_cmd->add_flag("--trace", trace, "emit solver trace CSV");

  auto* fig_cmd = app.add_subcommand(
      "figures", "Emit plot-ready CSV for the standard experiment set");
  fig_cmd->add_option("--fig", fig, "3: scatter, 4: arrays, 5: vs ANM, 6: SE")
      ->required();
  fig_cmd->add_option("--out", out_dir, "output directory")->required();
  fig_cmd->add_option("--trials", trials, "trials per cell override");
  auto* fig_seed = fig_cmd->add_option("--seed", seed, "master seed override");
  fig_cmd->add_option("--threads", threads, "worker threads (0 = auto)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (array_cmd->parsed()) return run_array(type, n, m, m1, m2, as_json);
    if (est_cmd->parsed())
      return run_estimate(config_path, out_dir, seed, !est_seed->empty(),
                          method, trace);
    if (bench_cmd->parsed())
      return run_bench(config_path, out_dir, seed, !bench_seed->empty(), method,
                       threads, trace);
    if (fig_cmd->parsed())
      return run_figures(fig, out_dir, trials, seed, !fig_seed->empty(),
                         threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
