#include "sysid/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "sysid/baseline.hpp"
#include "sysid/bounds.hpp"
#include "sysid/errors.hpp"
#include "sysid/estimation.hpp"
#include "sysid/io.hpp"
#include "sysid/random.hpp"

namespace sysid {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct AlgorithmName {
  Algorithm alg;
  const char* name;
};

constexpr AlgorithmName kAlgorithmNames[] = {
    {Algorithm::OfflineSgd, "offline-sgd"},
    {Algorithm::OnlineSgd, "online-sgd"},
    {Algorithm::OnlinePinv, "online-pinv"},
    {Algorithm::OfflineCombined, "offline-combined"},
    {Algorithm::OnlineCombined, "online-combined"},
    {Algorithm::HoKalman, "ho-kalman"},
};

bool recovers_params(Algorithm alg) {
  return alg != Algorithm::OfflineSgd && alg != Algorithm::OnlineSgd;
}

bool is_offline(Algorithm alg) {
  return alg == Algorithm::OfflineSgd || alg == Algorithm::OfflineCombined;
}

}  // namespace

std::string to_string(Algorithm alg) {
  for (const auto& entry : kAlgorithmNames) {
    if (entry.alg == alg) return entry.name;
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (const auto& entry : kAlgorithmNames) {
    if (name == entry.name) return entry.alg;
  }
  throw DomainError("unknown algorithm '" + name + "'");
}

double ExperimentConfig::resolved_eta() const {
  if (eta) return *eta;
  return default_step_size(dims.m, truncation, input_variance());
}

std::string ExperimentConfig::eta_warning() const {
  if (!eta) return {};
  const double cap = step_size_cap(dims.m, truncation, input_variance());
  if (*eta <= cap) return {};
  return "step size " + io::format_double(*eta) + " exceeds the cap " + io::format_double(cap) +
         "; SGD may diverge";
}

CheckpointSchedule ExperimentConfig::checkpoint_schedule() const {
  if (schedule == ScheduleKind::Log2) {
    return CheckpointSchedule::powers_of_two(1, std::max(n_samples, n_iters));
  }
  CheckpointSchedule s;
  s.every = checkpoint_every;
  return s;
}

void ExperimentConfig::validate() const {
  dims.validate();
  if (!(rho_max > 0.0 && rho_max < 1.0)) throw DomainError("rho_max must lie in (0, 1)");
  if (truncation < 2) throw DomainError("T must be at least 2");
  if (n_samples < 1) throw DomainError("N must be positive");
  if (eta && !(*eta > 0.0)) throw DomainError("eta must be positive");
  if (!(noise_std >= 0.0)) throw DomainError("noise_std must be nonnegative");
  if (!(input_std > 0.0)) throw DomainError("input_std must be positive");
  if (seeds.empty()) throw DomainError("at least one seed is required");
  if (checkpoint_every < 1) throw DomainError("checkpoint_every must be positive");
  if (n_iters < 0) throw DomainError("n_iters must be nonnegative");
  if (recovers_params(algorithm) && algorithm != Algorithm::HoKalman &&
      truncation < dims.n + 1) {
    throw PreconditionError("recovery needs T >= n + 1");
  }
  if ((is_offline(algorithm) || algorithm == Algorithm::OnlinePinv ||
       algorithm == Algorithm::HoKalman) &&
      n_samples < 2 * static_cast<std::int64_t>(truncation)) {
    throw PreconditionError("N must be at least 2T");
  }
}

ExperimentConfig config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "n", "m", "p", "rho_max", "T", "N", "eta", "noise_std", "input_std", "algorithm",
      "seeds", "checkpoint_every", "n_iters", "output_dir", "system_seed",
      "checkpoint_schedule"};
  if (!j.is_object()) throw DomainError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw DomainError("unknown config field '" + key + "'");
  }
  ExperimentConfig cfg;
  try {
    cfg.dims = SystemDims{j.value("n", 3), j.value("m", 1), j.value("p", 1)};
    cfg.rho_max = j.value("rho_max", cfg.rho_max);
    cfg.truncation = j.value("T", cfg.truncation);
    cfg.n_samples = j.value("N", cfg.n_samples);
    if (j.contains("eta")) {
      const auto& e = j.at("eta");
      if (e.is_string()) {
        if (e.get<std::string>() != "auto") throw DomainError("eta must be a number or \"auto\"");
      } else {
        cfg.eta = e.get<double>();
      }
    }
    cfg.noise_std = j.value("noise_std", cfg.noise_std);
    cfg.input_std = j.value("input_std", cfg.input_std);
    if (j.contains("algorithm")) cfg.algorithm = algorithm_from_string(j.at("algorithm"));
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.n_iters = j.value("n_iters", cfg.n_iters);
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("system_seed")) cfg.system_seed = j.at("system_seed").get<std::uint64_t>();
    if (j.contains("checkpoint_schedule")) {
      const auto kind = j.at("checkpoint_schedule").get<std::string>();
      if (kind == "linear") cfg.schedule = ScheduleKind::Linear;
      else if (kind == "log2") cfg.schedule = ScheduleKind::Log2;
      else throw DomainError("checkpoint_schedule must be \"linear\" or \"log2\"");
    }
  } catch (const json::exception& e) {
    throw DomainError(std::string("bad config: ") + e.what());
  }
  if (cfg.n_iters == 0 && is_offline(cfg.algorithm)) cfg.n_iters = cfg.n_samples;
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j{{"n", cfg.dims.n},
         {"m", cfg.dims.m},
         {"p", cfg.dims.p},
         {"rho_max", cfg.rho_max},
         {"T", cfg.truncation},
         {"N", cfg.n_samples},
         {"noise_std", cfg.noise_std},
         {"input_std", cfg.input_std},
         {"algorithm", to_string(cfg.algorithm)},
         {"seeds", cfg.seeds},
         {"checkpoint_every", cfg.checkpoint_every},
         {"n_iters", cfg.n_iters},
         {"checkpoint_schedule", cfg.schedule == ScheduleKind::Log2 ? "log2" : "linear"}};
  if (cfg.eta) j["eta"] = *cfg.eta;
  else j["eta"] = "auto";
  if (cfg.system_seed) j["system_seed"] = *cfg.system_seed;
  if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir.string();
  return j;
}

SlopeFit fit_log_slope(std::span<const double> iterations, std::span<const double> errors,
                       bool loglog) {
  if (iterations.size() != errors.size()) throw DomainError("iterations and errors differ in size");
  std::vector<double> xs, es;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double x = loglog ? std::log(iterations[i]) : iterations[i];
    if (std::isfinite(errors[i]) && errors[i] > 0.0 && std::isfinite(x)) {
      xs.push_back(x);
      es.push_back(errors[i]);
    }
  }
  SlopeFit fit;
  fit.loglog = loglog;
  const int total = static_cast<int>(es.size());
  if (total < 2) {
    fit.points = total;
    fit.slope = kNaN;
    fit.r_squared = kNaN;
    return fit;
  }

  const double final_err = es.back();
  int pre = total;
  for (int i = 0; i + 5 <= total; ++i) {
    bool flat = true;
    for (int k = i; k < i + 5; ++k) flat = flat && es[k] <= 2.0 * final_err;
    if (flat) {
      fit.floor_index = i;
      pre = i;
      break;
    }
  }
  if (pre < 3) pre = total;
  const int trim = static_cast<int>(0.1 * pre);
  int begin = trim, end = pre - trim;
  if (end - begin < 2) begin = 0, end = pre;

  const int count = end - begin;
  double mx = 0.0, my = 0.0;
  for (int i = begin; i < end; ++i) {
    mx += xs[i];
    my += std::log(es[i]);
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i = begin; i < end; ++i) {
    const double dx = xs[i] - mx, dy = std::log(es[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.points = count;
  if (sxx == 0.0) {
    fit.slope = kNaN;
    fit.r_squared = kNaN;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = syy - fit.slope * sxy;
  fit.r_squared = syy > 0.0 ? 1.0 - std::max(0.0, ss_res) / syy : 1.0;
  return fit;
}

Quantiles quantiles(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return {kNaN, kNaN, kNaN};
  std::sort(values.begin(), values.end());
  // Linear interpolation between order statistics.
  auto at = [&](double q) {
    const double pos = q * (values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - lo) * (values[hi] - values[lo]);
  };
  return {at(0.1), at(0.5), at(0.9)};
}

namespace {

struct SeedSetup {
  BrunovskySystem sys;
  Trajectory data;
  MarkovMatrix truth;
  int truncation = 0;
  double eta = 0.0;
};

SeedSetup setup_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedSetup s;
  const std::uint64_t sys_seed =
      cfg.system_seed ? *cfg.system_seed : derive_seed(seed, kSystemStream);
  s.sys = generate_system(cfg.dims, cfg.rho_max, sys_seed);
  SimulationOptions sim;
  sim.n_steps = static_cast<int>(cfg.n_samples);
  sim.input_variances = Eigen::VectorXd::Constant(cfg.dims.m, cfg.input_variance());
  sim.meas_noise_variances = Eigen::VectorXd::Constant(cfg.dims.p, cfg.noise_variance());
  sim.seed = derive_seed(seed, kDataStream);
  s.data = simulate(s.sys, sim);
  s.truncation = cfg.truncation;
  s.truth = true_markov(s.sys, s.truncation);
  s.eta = cfg.resolved_eta();
  return s;
}

TraceRow markov_row(std::int64_t iter, const MarkovMatrix& theta, const SeedSetup& s) {
  return {iter, markov_error(theta, s.truth), kNaN, kNaN,
          (theta.block(0) - s.sys.d_matrix).norm()};
}

TraceRow recovery_row(const RecoveryCheckpoint& cp, const SeedSetup& s) {
  TraceRow row = markov_row(cp.iteration, cp.theta_hat, s);
  if (cp.params) {
    row.a_err = (cp.params->char_coeffs - s.sys.char_coeffs).norm();
    row.c_err = (cp.params->c_matrix - s.sys.c_matrix).norm();
    row.d_err = (cp.params->d_matrix - s.sys.d_matrix).norm();
  }
  return row;
}

Eigen::MatrixXd true_observability(const SeedSetup& s) {
  const StateMatrices sm = assemble_state_matrices(s.sys);
  return observability_matrix(sm.a, s.sys.c_matrix, s.truncation / 2);
}

// Ho-Kalman realization errors use the full matrices A and C.
TraceRow ho_kalman_row(std::int64_t iter, const MarkovMatrix& theta, const SeedSetup& s,
                       const Eigen::MatrixXd& obs) {
  TraceRow row = markov_row(iter, theta, s);
  const HankelDecomposition hk = ho_kalman(theta, s.sys.dims, obs);
  row.a_err = (hk.a_hat - assemble_state_matrices(s.sys).a).norm();
  row.c_err = (hk.c_hat - s.sys.c_matrix).norm();
  return row;
}

void run_markov_sgd(const ExperimentConfig& cfg, const SeedSetup& s, SeedResult& out) {
  const CheckpointSchedule schedule = cfg.checkpoint_schedule();
  if (cfg.algorithm == Algorithm::OfflineSgd) {
    OfflineSgd sgd(s.data, s.truncation, s.eta, derive_seed(out.seed, kSgdStream));
    out.trace.push_back(markov_row(0, sgd.state().theta_hat, s));
    for (std::int64_t tau = 1; tau <= cfg.n_iters; ++tau) {
      sgd.run(1);
      if (tau == cfg.n_iters || schedule.includes(tau)) {
        out.trace.push_back(markov_row(tau, sgd.state().theta_hat, s));
      }
    }
    return;
  }
  OnlineSgd sgd(s.sys.dims.p, s.sys.dims.m, s.truncation, s.eta);
  out.trace.push_back(markov_row(0, sgd.state().theta_hat, s));
  for (int k = 0; k < s.data.length(); ++k) {
    if (!sgd.feed(s.data.inputs.col(k), s.data.outputs.col(k))) continue;
    const auto it = sgd.state().iteration;
    if (k + 1 == s.data.length() || schedule.includes(it)) {
      out.trace.push_back(markov_row(it, sgd.state().theta_hat, s));
    }
  }
}

void run_ho_kalman(const ExperimentConfig& cfg, const SeedSetup& s, SeedResult& out) {
  const CheckpointSchedule schedule = cfg.checkpoint_schedule();
  const Eigen::MatrixXd obs = true_observability(s);
  InputWindow window(s.sys.dims.m, s.truncation);
  NormalEquations sums(s.sys.dims.p, s.sys.dims.m, s.truncation);
  const std::int64_t total = s.data.length();
  for (std::int64_t t = 1; t <= total; ++t) {
    window.push(s.data.inputs.col(t - 1));
    if (!window.full()) continue;
    sums.add(window.regressor(), s.data.outputs.col(t - 1));
    if (t >= 2 * s.truncation && (t == total || schedule.includes(t))) {
      try {
        out.trace.push_back(ho_kalman_row(t, sums.solve(), s, obs));
      } catch (const std::runtime_error&) {
        if (t == total) throw;
        ++out.skipped_checkpoints;
      }
    }
  }
}

// Squared-error bound at each trace row; NaN where it does not apply.
std::vector<double> bound_for_trace(const ExperimentConfig& cfg, const SeedSetup& s,
                                    const std::vector<TraceRow>& trace) {
  std::vector<double> out(trace.size(), kNaN);
  BoundInputs in = bound_inputs_from_system(s.sys, s.truncation, cfg.n_samples,
                                            cfg.input_variance(), cfg.noise_variance());
  in.eta = s.eta;
  if (!(in.eta <= step_size_prescription(in).eta_cap)) return out;
  switch (cfg.algorithm) {
    case Algorithm::OfflineSgd:
    case Algorithm::OfflineCombined: {
      std::vector<std::int64_t> iters;
      for (const auto& r : trace) iters.push_back(r.iter);
      return sgd_bound_curve(in, iters);
    }
    case Algorithm::OnlineSgd:
    case Algorithm::OnlineCombined: {
      // Update tau is taken at time t = tau + T - 1.
      std::vector<std::int64_t> ts;
      for (const auto& r : trace) ts.push_back(r.iter + s.truncation - 1);
      return online_sgd_bound_curve(in, ts);
    }
    case Algorithm::OnlinePinv:
    case Algorithm::HoKalman:
      for (std::size_t i = 0; i < trace.size(); ++i) {
        if (trace[i].iter < 2 * s.truncation) continue;
        in.batch_size = trace[i].iter;
        out[i] = chi_N_sq(in);
      }
      return out;
  }
  return out;
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SeedResult out;
  out.seed = seed;
  const SeedSetup s = setup_seed(cfg, seed);

  CombinedOptions opts;
  opts.schedule = cfg.checkpoint_schedule();
  std::vector<RecoveryCheckpoint> cps;
  try {
    switch (cfg.algorithm) {
      case Algorithm::OfflineSgd:
      case Algorithm::OnlineSgd:
        run_markov_sgd(cfg, s, out);
        break;
      case Algorithm::HoKalman:
        run_ho_kalman(cfg, s, out);
        break;
      case Algorithm::OnlinePinv:
        cps = run_online_pseudoinverse(s.data, s.sys.dims, s.truncation, opts);
        break;
      case Algorithm::OfflineCombined:
        cps = run_offline_combined(s.data, s.sys.dims, s.truncation, s.eta, cfg.n_iters,
                                   derive_seed(seed, kSgdStream), opts);
        break;
      case Algorithm::OnlineCombined:
        cps = run_online_combined(s.data, s.sys.dims, s.truncation, s.eta, opts);
        break;
    }
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.message = e.what();
  }
  for (const auto& cp : cps) {
    out.trace.push_back(recovery_row(cp, s));
    if (!cp.params) ++out.skipped_checkpoints;
  }

  std::vector<double> iters, errs;
  const bool use_params = recovers_params(cfg.algorithm);
  for (const auto& r : out.trace) {
    if (r.iter <= 0) continue;
    iters.push_back(static_cast<double>(r.iter));
    errs.push_back(use_params ? r.param_err() : r.markov_err);
  }
  out.fit = fit_log_slope(iters, errs, cfg.schedule == ScheduleKind::Log2);

  if (!out.diverged) {
    const auto bounds = bound_for_trace(cfg, s, out.trace);
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (!std::isfinite(bounds[i])) continue;
      ++out.bound_checks;
      if (out.trace[i].markov_err * out.trace[i].markov_err > bounds[i]) ++out.bound_violations;
    }
  }
  return out;
}

unsigned seed_threads(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SYSID_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, static_cast<unsigned>(cap));
  }
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

namespace {

template <typename Result, typename Fn>
std::vector<Result> run_seeds_parallel(const std::vector<std::uint64_t>& seeds, Fn fn) {
  std::vector<Result> results(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        results[i] = fn(seeds[i]);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mutex);
        if (first_error.empty()) {
          first_error = "seed " + std::to_string(seeds[i]) + ": " + e.what();
        }
      }
    }
  };
  const unsigned n = seed_threads(seeds.size());
  std::vector<std::jthread> pool;
  for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (!first_error.empty()) throw std::runtime_error(first_error);
  return results;
}

double final_value(const SeedResult& r, double TraceRow::*field) {
  return r.trace.empty() ? kNaN : r.trace.back().*field;
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "iter,markov_err,a_err,c_err,d_err\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << io::format_double(r.markov_err) << ',' << io::format_double(r.a_err)
        << ',' << io::format_double(r.c_err) << ',' << io::format_double(r.d_err) << '\n';
  }
}

SummaryReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  SummaryReport rep;
  rep.config = cfg;
  if (auto w = cfg.eta_warning(); !w.empty()) rep.warnings.push_back(w);
  rep.seeds = run_seeds_parallel<SeedResult>(
      cfg.seeds, [&](std::uint64_t seed) { return run_seed(cfg, seed); });

  std::vector<double> mk, pa, ae, ce, de, slopes, r2s;
  for (const auto& r : rep.seeds) {
    mk.push_back(final_value(r, &TraceRow::markov_err));
    ae.push_back(final_value(r, &TraceRow::a_err));
    ce.push_back(final_value(r, &TraceRow::c_err));
    de.push_back(final_value(r, &TraceRow::d_err));
    pa.push_back(r.trace.empty() ? kNaN : r.trace.back().param_err());
    slopes.push_back(r.fit.slope);
    r2s.push_back(r.fit.r_squared);
    rep.bound_checks += r.bound_checks;
    rep.bound_violations += r.bound_violations;
    rep.diverged_seeds += r.diverged ? 1 : 0;
  }
  rep.final_markov_err = quantiles(mk);
  rep.final_param_err = quantiles(pa);
  rep.final_a_err = quantiles(ae);
  rep.final_c_err = quantiles(ce);
  rep.final_d_err = quantiles(de);
  rep.median_slope = quantiles(slopes).median;
  rep.median_r_squared = quantiles(r2s).median;

  if (!cfg.output_dir.empty()) {
    for (const auto& r : rep.seeds) {
      write_trace_csv(cfg.output_dir / ("trace_seed" + std::to_string(r.seed) + ".csv"), r.trace);
    }
    io::write_json(cfg.output_dir / "summary.json", summary_to_json(rep));
  }
  return rep;
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json quantiles_json(const Quantiles& q) {
  return json{{"q10", number_or_null(q.q10)},
              {"median", number_or_null(q.median)},
              {"q90", number_or_null(q.q90)}};
}

}  // namespace

json summary_to_json(const SummaryReport& rep) {
  json seeds = json::array();
  for (const auto& r : rep.seeds) {
    json s{{"seed", r.seed},
           {"slope", number_or_null(r.fit.slope)},
           {"r_squared", number_or_null(r.fit.r_squared)},
           {"fit_points", r.fit.points},
           {"floor_index", r.fit.floor_index},
           {"bound_checks", r.bound_checks},
           {"bound_violations", r.bound_violations},
           {"skipped_checkpoints", r.skipped_checkpoints},
           {"diverged", r.diverged}};
    if (!r.trace.empty()) {
      const auto& f = r.trace.back();
      s["final"] = json{{"iter", f.iter},
                        {"markov_err", number_or_null(f.markov_err)},
                        {"a_err", number_or_null(f.a_err)},
                        {"c_err", number_or_null(f.c_err)},
                        {"d_err", number_or_null(f.d_err)}};
    }
    if (!r.message.empty()) s["message"] = r.message;
    seeds.push_back(std::move(s));
  }
  return json{{"config", config_to_json(rep.config)},
              {"seeds", std::move(seeds)},
              {"final_markov_err", quantiles_json(rep.final_markov_err)},
              {"final_param_err", quantiles_json(rep.final_param_err)},
              {"final_a_err", quantiles_json(rep.final_a_err)},
              {"final_c_err", quantiles_json(rep.final_c_err)},
              {"final_d_err", quantiles_json(rep.final_d_err)},
              {"median_slope", number_or_null(rep.median_slope)},
              {"median_r_squared", number_or_null(rep.median_r_squared)},
              {"slope_axis", rep.config.schedule == ScheduleKind::Log2 ? "log_iter" : "iter"},
              {"bound_checks", rep.bound_checks},
              {"bound_violations", rep.bound_violations},
              {"diverged_seeds", rep.diverged_seeds},
              {"warnings", rep.warnings}};
}

CompareResult run_compare_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const SeedSetup s = setup_seed(cfg, seed);
  const Eigen::MatrixXd obs = true_observability(s);
  const Eigen::MatrixXd a_true = assemble_state_matrices(s.sys).a;

  CombinedOptions opts;
  opts.schedule = cfg.checkpoint_schedule();
  std::vector<RecoveryCheckpoint> cps;
  switch (cfg.algorithm) {
    case Algorithm::OnlineCombined:
      cps = run_online_combined(s.data, s.sys.dims, s.truncation, s.eta, opts);
      break;
    case Algorithm::OfflineCombined:
      cps = run_offline_combined(s.data, s.sys.dims, s.truncation, s.eta, cfg.n_iters,
                                 derive_seed(seed, kSgdStream), opts);
      break;
    case Algorithm::OnlinePinv:
    case Algorithm::HoKalman:
      cps = run_online_pseudoinverse(s.data, s.sys.dims, s.truncation, opts);
      break;
    default:
      throw DomainError("compare needs a recovering algorithm");
  }

  CompareResult res;
  res.seed = seed;
  for (const auto& cp : cps) {
    CompareRow row{cp.iteration, markov_error(cp.theta_hat, s.truth), kNaN, kNaN};
    if (cp.params) {
      row.direct_a_err =
          (assemble_state_matrices(as_system(*cp.params, s.sys.dims)).a - a_true).norm();
    }
    try {
      row.hk_a_err = (ho_kalman(cp.theta_hat, s.sys.dims, obs).a_hat - a_true).norm();
    } catch (const std::runtime_error&) {
    }
    res.rows.push_back(row);
  }
  return res;
}

std::vector<CompareResult> run_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  auto results = run_seeds_parallel<CompareResult>(
      cfg.seeds, [&](std::uint64_t seed) { return run_compare_seed(cfg, seed); });
  if (!cfg.output_dir.empty()) {
    for (const auto& r : results) {
      const auto path = cfg.output_dir / ("compare_seed" + std::to_string(r.seed) + ".csv");
      std::filesystem::create_directories(cfg.output_dir);
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
      out << "iter,markov_err,direct_a_err,hk_a_err\n";
      for (const auto& row : r.rows) {
        out << row.iter << ',' << io::format_double(row.markov_err) << ','
            << io::format_double(row.direct_a_err) << ',' << io::format_double(row.hk_a_err)
            << '\n';
      }
    }
  }
  return results;
}

}  // namespace sysid
