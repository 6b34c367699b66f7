#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mmce/matching.hpp"
#include "mmce/pipeline.hpp"
#include "mmce/rng.hpp"

namespace mmce {

struct ScenarioConfig {
  std::string id = "scenario";
  int n = 32;
  int m = 11;
  std::string array_type = "nested";  // nested | mra | coprime | ula
  int coprime_m1 = 2;
  int coprime_m2 = 3;
  int l = 5;
  int k = 3;
  double theta_min_deg = -30.0;
  double theta_max_deg = 30.0;
  double f_min = 0.1;
  double f_max = 0.7;
  std::vector<double> snr_db{20.0};
  int trials = 50;
  std::uint64_t seed = 1;
  std::vector<std::string> methods{"primal"};
  std::string gains = "gaussian";  // gaussian | unit
  double model_order_tau = 1e-3;
  double angle_match_scale_deg = 1.0;
  double doppler_match_scale = 0.01;
  int threads = 0;  // 0: hardware concurrency
  SdpOptions<double> solver;
};

inline SelectionSet make_selection(const ScenarioConfig& c) {
  if (c.array_type == "nested") return nested_array(c.n, c.m);
  if (c.array_type == "mra") return mra(c.m, c.n);
  if (c.array_type == "coprime") return coprime_array(c.coprime_m1, c.coprime_m2, c.n);
  if (c.array_type == "ula") return ula_prefix(c.m, c.n);
  throw std::invalid_argument("unknown array_type: " + c.array_type);
}

inline SolverPath parse_method(const std::string& name) {
  if (name == "primal") return SolverPath::kPrimal;
  if (name == "dual") return SolverPath::kDual;
  if (name == "anm") return SolverPath::kAnm;
  throw std::invalid_argument("unknown method: " + name);
}

namespace detail {

inline void require_keys(const nlohmann::json& j,
                         const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " +
                                  where);
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const nlohmann::json& j) {
  detail::require_keys(
      j,
      {"id", "n", "m", "array_type", "coprime", "l", "k", "theta_range_deg",
       "f_range", "snr_db", "trials", "seed", "methods", "gains",
       "model_order_tau", "angle_match_scale_deg", "doppler_match_scale",
       "threads", "solver"},
      "scenario");
  ScenarioConfig c;
  if (j.contains("id")) c.id = j.at("id").get<std::string>();
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("m")) c.m = j.at("m").get<int>();
  if (j.contains("array_type")) c.array_type = j.at("array_type").get<std::string>();
  if (j.contains("coprime")) {
    const auto arr = j.at("coprime");
    if (!arr.is_array() || arr.size() != 2)
      throw std::invalid_argument("config: coprime must be [M1, M2]");
    c.coprime_m1 = arr[0].get<int>();
    c.coprime_m2 = arr[1].get<int>();
  }
  if (j.contains("l")) c.l = j.at("l").get<int>();
  if (j.contains("k")) c.k = j.at("k").get<int>();
  if (j.contains("theta_range_deg")) {
    const auto arr = j.at("theta_range_deg");
    if (!arr.is_array() || arr.size() != 2)
      throw std::invalid_argument("config: theta_range_deg must be [lo, hi]");
    c.theta_min_deg = arr[0].get<double>();
    c.theta_max_deg = arr[1].get<double>();
  }
  if (j.contains("f_range")) {
    const auto arr = j.at("f_range");
    if (!arr.is_array() || arr.size() != 2)
      throw std::invalid_argument("config: f_range must be [lo, hi]");
    c.f_min = arr[0].get<double>();
    c.f_max = arr[1].get<double>();
  }
  if (j.contains("snr_db")) c.snr_db = j.at("snr_db").get<std::vector<double>>();
  if (j.contains("trials")) c.trials = j.at("trials").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("methods"))
    c.methods = j.at("methods").get<std::vector<std::string>>();
  if (j.contains("gains")) c.gains = j.at("gains").get<std::string>();
  if (j.contains("model_order_tau"))
    c.model_order_tau = j.at("model_order_tau").get<double>();
  if (j.contains("angle_match_scale_deg"))
    c.angle_match_scale_deg = j.at("angle_match_scale_deg").get<double>();
  if (j.contains("doppler_match_scale"))
    c.doppler_match_scale = j.at("doppler_match_scale").get<double>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::require_keys(s,
                         {"max_iterations", "abs_tolerance", "rel_tolerance",
                          "tbt_psd", "rho", "over_relaxation", "check_every",
                          "anm_lambda_scale"},
                         "solver");
    if (s.contains("max_iterations"))
      c.solver.max_iterations = s.at("max_iterations").get<int>();
    if (s.contains("abs_tolerance"))
      c.solver.abs_tolerance = s.at("abs_tolerance").get<double>();
    if (s.contains("rel_tolerance"))
      c.solver.rel_tolerance = s.at("rel_tolerance").get<double>();
    if (s.contains("rho")) c.solver.rho = s.at("rho").get<double>();
    if (s.contains("over_relaxation"))
      c.solver.over_relaxation = s.at("over_relaxation").get<double>();
    if (s.contains("check_every"))
      c.solver.check_every = s.at("check_every").get<int>();
    if (s.contains("anm_lambda_scale"))
      c.solver.anm_lambda_scale = s.at("anm_lambda_scale").get<double>();
    if (s.contains("tbt_psd")) {
      const std::string mode = s.at("tbt_psd").get<std::string>();
      if (mode == "auto")
        c.solver.tbt_psd = TbtPsdMode::kAuto;
      else if (mode == "always")
        c.solver.tbt_psd = TbtPsdMode::kAlways;
      else if (mode == "off")
        c.solver.tbt_psd = TbtPsdMode::kOff;
      else
        throw std::invalid_argument("config: tbt_psd must be auto|always|off");
    }
  }
  if (c.trials < 1) throw std::invalid_argument("config: trials >= 1");
  if (c.snr_db.empty()) throw std::invalid_argument("config: snr_db empty");
  if (c.methods.empty()) throw std::invalid_argument("config: methods empty");
  for (const auto& m : c.methods) parse_method(m);
  make_selection(c);  // validates the geometry early
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  return parse_scenario(j);
}

struct TrialRecord {
  std::string scenario_id;
  std::string method;
  double snr_db = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double nmse = 0;
  double se_bits = 0;
  double se_ideal = 0;
  int k_true = 0;
  int k_hat = 0;
  double sigma_true = 0;
  double sigma_hat = 0;
  double objective = 0;
  double gap = 0;
  double solve_time_s = 0;
  double wall_time_s = 0;
  std::vector<double> theta_true_deg, f_true;
  std::vector<double> theta_hat_deg, f_hat;      // raw estimates
  std::vector<double> theta_err_deg, f_err;      // matched, per true path
};

struct CellAggregate {
  std::string method;
  double snr_db = 0;
  int trials = 0;
  int failures = 0;
  double median_nmse = 0;
  double mean_nmse = 0;
  double mean_se = 0;
  double mean_se_ideal = 0;
  double median_solve_time_s = 0;
  double median_wall_time_s = 0;
};

struct ExperimentResult {
  ScenarioConfig config;
  std::vector<TrialRecord> records;
  std::vector<CellAggregate> aggregates;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string fmt_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

inline std::string join_nums(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += fmt_num(v[i]);
  }
  return out;
}

}  // namespace detail

/// Draws the ground truth for one trial: angles and Doppler shifts uniform in
/// the configured ranges, gains per the configured model, unit average power.
inline PathSet<double> draw_paths(const ScenarioConfig& c, Rng& rng) {
  PathSet<double> ps;
  const double deg = pi<double> / 180.0;
  for (int k = 0; k < c.k; ++k) {
    Path<double> p;
    p.theta = rng.uniform(c.theta_min_deg * deg, c.theta_max_deg * deg);
    p.doppler = rng.uniform(c.f_min, c.f_max);
    if (c.gains == "unit")
      p.gain = std::polar(1.0, rng.uniform(0.0, 2.0 * pi<double>));
    else
      p.gain = rng.complex_gaussian<double>(1.0);
    ps.paths.push_back(p);
  }
  ps.validate();
  return ps;
}

inline TrialRecord run_trial(const ScenarioConfig& c, const SelectionSet& sel,
                             const std::string& method, double snr_db, int trial,
                             int snr_idx) {
  TrialRecord rec;
  rec.scenario_id = c.id;
  rec.method = method;
  rec.snr_db = snr_db;
  rec.trial = trial;
  rec.seed = c.seed;
  rec.k_true = c.k;

  const double snr_linear = std::pow(10.0, snr_db / 10.0);
  const double sigma = 1.0 / snr_linear;
  rec.sigma_true = sigma;

  Rng path_rng(derive_seed(c.seed, std::uint64_t(snr_idx), std::uint64_t(trial), 0));
  const PathSet<double> paths = draw_paths(c, path_rng);
  NoiseSpec<double> noise;
  noise.variance = sigma;
  noise.seed = derive_seed(c.seed, std::uint64_t(snr_idx), std::uint64_t(trial), 1);
  const SnapshotBlock<double> block =
      synthesize_snapshots(paths, sel, c.l, noise);
  const CVector<double> h = true_channel(paths, c.n);

  EstimateConfig<double> ec;
  ec.path = parse_method(method);
  ec.sdp = c.solver;
  ec.model_order_tau = c.model_order_tau;
  ec.sigma_true = sigma;
  const EstimationResult<double> est = estimate(block, ec);

  rec.failed = !est.ok();
  rec.failure = est.failure;
  rec.k_hat = est.k_hat;
  rec.sigma_hat = est.sigma_hat;
  rec.objective = est.objective;
  rec.gap = est.gap;
  rec.solve_time_s = est.solve_time_s;
  rec.wall_time_s = est.wall_time_s;
  rec.nmse = nmse(est.h_hat, h);
  rec.se_ideal = spectral_efficiency_ideal(h, snr_linear);
  rec.se_bits = est.h_hat.norm() > 0
                    ? spectral_efficiency(est.h_hat, h, snr_linear)
                    : 0.0;

  const double rad2deg = 180.0 / pi<double>;
  for (const auto& p : paths.paths) {
    rec.theta_true_deg.push_back(p.theta * rad2deg);
    rec.f_true.push_back(p.doppler);
  }
  for (const auto& a : est.atoms.atoms) {
    rec.theta_hat_deg.push_back(a.theta * rad2deg);
    rec.f_hat.push_back(a.doppler);
  }
  const MatchedErrors match =
      match_paths(rec.theta_true_deg, rec.f_true, rec.theta_hat_deg, rec.f_hat,
                  c.angle_match_scale_deg, c.doppler_match_scale);
  rec.theta_err_deg = match.theta_err_deg;
  rec.f_err = match.doppler_err;
  return rec;
}

/// Runs the whole sweep: every (method, snr, trial) cell is an independent
/// job on a small worker pool; per-trial RNG streams split from the master
/// seed keep the output deterministic regardless of scheduling.
inline ExperimentResult run_experiment(const ScenarioConfig& c) {
  const SelectionSet sel = make_selection(c);
  ExperimentResult result;
  result.config = c;

  struct Job {
    std::string method;
    double snr_db;
    int snr_idx;
    int trial;
  };
  std::vector<Job> jobs;
  for (const auto& method : c.methods)
    for (std::size_t si = 0; si < c.snr_db.size(); ++si)
      for (int t = 0; t < c.trials; ++t)
        jobs.push_back({method, c.snr_db[si], int(si), t});
  result.records.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      result.records[i] =
          run_trial(c, sel, job.method, job.snr_db, job.trial, job.snr_idx);
    }
  };
  int nthreads = c.threads > 0 ? c.threads
                               : int(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min<int>(nthreads, int(jobs.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // aggregates per (method, snr); failed trials excluded from the medians but
  // counted in the failure rate
  for (const auto& method : c.methods) {
    for (double snr : c.snr_db) {
      CellAggregate agg;
      agg.method = method;
      agg.snr_db = snr;
      std::vector<double> nm, st, wt;
      double se_sum = 0, sei_sum = 0, nm_sum = 0;
      int ok_count = 0;
      for (const auto& r : result.records) {
        if (r.method != method || r.snr_db != snr) continue;
        ++agg.trials;
        if (r.failed) {
          ++agg.failures;
          continue;
        }
        ++ok_count;
        nm.push_back(r.nmse);
        st.push_back(r.solve_time_s);
        wt.push_back(r.wall_time_s);
        nm_sum += r.nmse;
        se_sum += r.se_bits;
        sei_sum += r.se_ideal;
      }
      agg.median_nmse = detail::median(nm);
      agg.mean_nmse = ok_count ? nm_sum / ok_count : std::nan("");
      agg.mean_se = ok_count ? se_sum / ok_count : std::nan("");
      agg.mean_se_ideal = ok_count ? sei_sum / ok_count : std::nan("");
      agg.median_solve_time_s = detail::median(st);
      agg.median_wall_time_s = detail::median(wt);
      result.aggregates.push_back(agg);
    }
  }
  return result;
}

inline const char* trials_csv_header() {
  return "scenario_id,method,snr_db,trial,seed,failed,nmse,se_bits,se_ideal,"
         "k_true,k_hat,sigma_true,sigma_hat,objective,gap,solve_time_s,"
         "wall_time_s,theta_err_deg,f_err,failure";
}

inline void write_trials_csv(std::ostream& out,
                             const std::vector<TrialRecord>& records) {
  out << trials_csv_header() << '\n';
  for (const auto& r : records) {
    std::string failure = r.failure;
    std::replace(failure.begin(), failure.end(), ',', ';');
    std::replace(failure.begin(), failure.end(), '\n', ' ');
    out << r.scenario_id << ',' << r.method << ',' << detail::fmt_num(r.snr_db)
        << ',' << r.trial << ',' << r.seed << ',' << (r.failed ? 1 : 0) << ','
        << detail::fmt_num(r.nmse) << ',' << detail::fmt_num(r.se_bits) << ','
        << detail::fmt_num(r.se_ideal) << ',' << r.k_true << ',' << r.k_hat
        << ',' << detail::fmt_num(r.sigma_true) << ','
        << detail::fmt_num(r.sigma_hat) << ',' << detail::fmt_num(r.objective)
        << ',' << detail::fmt_num(r.gap) << ','
        << detail::fmt_num(r.solve_time_s) << ','
        << detail::fmt_num(r.wall_time_s) << ','
        << detail::join_nums(r.theta_err_deg) << ','
        << detail::join_nums(r.f_err) << ',' << failure << '\n';
  }
}

/// True-versus-estimated pairs for scatter plots; unmatched estimates get
/// empty truth fields.
inline void write_scatter_csv(std::ostream& out,
                              const std::vector<TrialRecord>& records) {
  out << "scenario_id,method,snr_db,trial,path,theta_true_deg,f_true,"
         "theta_hat_deg,f_hat\n";
  for (const auto& r : records) {
    const MatchedErrors match = match_paths(r.theta_true_deg, r.f_true,
                                            r.theta_hat_deg, r.f_hat);
    std::vector<bool> used(r.theta_hat_deg.size(), false);
    for (std::size_t i = 0; i < r.theta_true_deg.size(); ++i) {
      out << r.scenario_id << ',' << r.method << ','
          << detail::fmt_num(r.snr_db) << ',' << r.trial << ',' << i << ','
          << detail::fmt_num(r.theta_true_deg[i]) << ','
          << detail::fmt_num(r.f_true[i]) << ',';
      const int j = i < match.assignment.size() ? match.assignment[i] : -1;
      if (j >= 0) {
        used[std::size_t(j)] = true;
        out << detail::fmt_num(r.theta_hat_deg[std::size_t(j)]) << ','
            << detail::fmt_num(r.f_hat[std::size_t(j)]);
      } else {
        out << ',';
      }
      out << '\n';
    }
    for (std::size_t j = 0; j < used.size(); ++j)
      if (!used[j])
        out << r.scenario_id << ',' << r.method << ','
            << detail::fmt_num(r.snr_db) << ',' << r.trial << ','
            << (r.theta_true_deg.size() + j) << ",,,"
            << detail::fmt_num(r.theta_hat_deg[j]) << ','
            << detail::fmt_num(r.f_hat[j]) << '\n';
  }
}

inline nlohmann::json summary_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["scenario"] = {{"id", result.config.id},
                   {"n", result.config.n},
                   {"m", result.config.m},
                   {"array_type", result.config.array_type},
                   {"l", result.config.l},
                   {"k", result.config.k},
                   {"trials", result.config.trials},
                   {"seed", result.config.seed}};
  j["cells"] = nlohmann::json::array();
  for (const auto& a : result.aggregates) {
    j["cells"].push_back({{"method", a.method},
                          {"snr_db", a.snr_db},
                          {"trials", a.trials},
                          {"failures", a.failures},
                          {"median_nmse", a.median_nmse},
                          {"mean_nmse", a.mean_nmse},
                          {"mean_se", a.mean_se},
                          {"mean_se_ideal", a.mean_se_ideal},
                          {"median_solve_time_s", a.median_solve_time_s},
                          {"median_wall_time_s", a.median_wall_time_s}});
  }
  return j;
}

/// FNV-1a digest of the trial table with the wall-clock columns left out;
/// identical config and seed must reproduce it exactly.
inline std::uint64_t determinism_digest(const std::vector<TrialRecord>& records) {
  std::uint64_t h = 1469598103934665603ULL;
  auto eat = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& r : records) {
    eat(r.scenario_id);
    eat(r.method);
    eat(detail::fmt_num(r.snr_db));
    eat(std::to_string(r.trial));
    eat(std::to_string(r.failed));
    eat(detail::fmt_num(r.nmse));
    eat(detail::fmt_num(r.se_bits));
    eat(std::to_string(r.k_hat));
    eat(detail::fmt_num(r.sigma_hat));
    eat(detail::fmt_num(r.objective));
    eat(detail::join_nums(r.theta_err_deg));
    eat(detail::join_nums(r.f_err));
  }
  return h;
}

}  // namespace mmce
