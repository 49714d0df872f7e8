#include "sysid/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sysid/bounds.hpp"
#include "sysid/errors.hpp"
#include "sysid/estimation.hpp"
#include "sysid/harness.hpp"
#include "sysid/io.hpp"
#include "sysid/random.hpp"
#include "sysid/recovery.hpp"

namespace sysid {

namespace {

using nlohmann::json;

void emit_json(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    io::write_json(out_path, j);
  }
}

std::vector<std::int64_t> parse_iters(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const long long v = std::stoll(item, &used);
    if (used != item.size() || v < 0) throw CLI::ValidationError("--iters", "bad iteration " + item);
    out.push_back(v);
  }
  return out;
}

std::optional<double> parse_eta(const std::string& text) {
  if (text == "auto") return std::nullopt;
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw CLI::ValidationError("--eta", "expected a number or auto");
  return v;
}

struct GenerateArgs {
  int n = 3, m = 1, p = 1;
  double rho_max = 0.5;
  std::uint64_t seed = 0;
  std::string out;
};

void run_generate(const GenerateArgs& a) {
  const auto sys = generate_system(SystemDims{a.n, a.m, a.p}, a.rho_max, a.seed);
  emit_json(io::system_to_json(sys), a.out);
}

struct SimulateArgs {
  std::string system;
  int steps = 1000;
  double input_std = 1.0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_simulate(const SimulateArgs& a) {
  const auto sys = io::system_from_json(io::read_json(a.system));
  SimulationOptions sim;
  sim.n_steps = a.steps;
  sim.input_variances = Eigen::VectorXd::Constant(sys.dims.m, a.input_std * a.input_std);
  sim.meas_noise_variances = Eigen::VectorXd::Constant(sys.dims.p, a.noise_std * a.noise_std);
  sim.seed = a.seed;
  const auto traj = simulate(sys, sim);
  if (a.out.empty()) throw CLI::ValidationError("--out", "an output path is required");
  io::write_trajectory_csv(a.out, traj);
}

struct EstimateArgs {
  std::string data;
  int truncation = 20;
  std::string method = "online-sgd";
  std::string eta = "auto";
  std::int64_t iters = 0;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 100;
  std::string truth;
  std::string trace;
  std::string out;
};

std::string optional_field(double v) { return std::isfinite(v) ? io::format_double(v) : ""; }

void run_estimate(const EstimateArgs& a) {
  const Trajectory data = io::read_trajectory_csv(a.data);
  const int m = data.input_dim(), p = data.output_dim();
  const double max_var = data.input_variances.maxCoeff();
  const auto explicit_eta = parse_eta(a.eta);
  const double eta =
      explicit_eta ? *explicit_eta : default_step_size(m, a.truncation, max_var);
  if (explicit_eta && eta > step_size_cap(m, a.truncation, max_var)) {
    std::cerr << "warning: step size exceeds the cap " << step_size_cap(m, a.truncation, max_var)
              << '\n';
  }

  std::optional<BrunovskySystem> truth;
  std::optional<MarkovMatrix> truth_markov;
  if (!a.truth.empty()) {
    truth = io::system_from_json(io::read_json(a.truth));
    truth_markov = true_markov(*truth, a.truncation);
  }
  if (!a.trace.empty() && !truth) {
    throw CLI::ValidationError("--trace", "a trace needs --truth for error columns");
  }

  std::vector<std::pair<std::int64_t, MarkovMatrix>> snapshots;
  MarkovMatrix final_theta;
  if (a.method == "least-squares") {
    final_theta = least_squares_markov(data, a.truncation);
  } else if (a.method == "offline-sgd") {
    OfflineSgd sgd(data, a.truncation, eta, a.seed);
    const std::int64_t iters = a.iters > 0 ? a.iters : data.length();
    for (std::int64_t tau = 1; tau <= iters; ++tau) {
      sgd.run(1);
      if (tau % a.checkpoint_every == 0 || tau == iters) {
        snapshots.emplace_back(tau, sgd.state().theta_hat);
      }
    }
    final_theta = sgd.state().theta_hat;
  } else if (a.method == "online-sgd") {
    OnlineSgd sgd(p, m, a.truncation, eta);
    for (int k = 0; k < data.length(); ++k) {
      if (!sgd.feed(data.inputs.col(k), data.outputs.col(k))) continue;
      const auto it = sgd.state().iteration;
      if (it % a.checkpoint_every == 0 || k + 1 == data.length()) {
        snapshots.emplace_back(it, sgd.state().theta_hat);
      }
    }
    final_theta = sgd.state().theta_hat;
  } else {
    throw CLI::ValidationError("--method", "expected offline-sgd, online-sgd or least-squares");
  }

  if (!a.trace.empty()) {
    if (snapshots.empty()) snapshots.emplace_back(0, final_theta);
    std::ofstream out(a.trace);
    if (!out) throw std::runtime_error("cannot open " + a.trace);
    out << "iter,frob_error_markov,frob_error_A,frob_error_C,frob_error_D\n";
    const Eigen::MatrixXd a_true = assemble_state_matrices(*truth).a;
    for (const auto& [it, theta] : snapshots) {
      double ea = NAN, ec = NAN, ed = NAN;
      try {
        const RecoveredParams rp = recover_from_markov(theta, truth->dims);
        ea = (assemble_state_matrices(as_system(rp, truth->dims)).a - a_true).norm();
        ec = (rp.c_matrix - truth->c_matrix).norm();
        ed = (rp.d_matrix - truth->d_matrix).norm();
      } catch (const std::runtime_error&) {
      } catch (const std::logic_error&) {
      }
      out << it << ',' << io::format_double(markov_error(theta, *truth_markov)) << ','
          << optional_field(ea) << ',' << optional_field(ec) << ',' << optional_field(ed) << '\n';
    }
  }
  json result = io::markov_to_json(final_theta);
  if (truth_markov) result["markov_err"] = markov_error(final_theta, *truth_markov);
  emit_json(result, a.out);
}

struct RecoverArgs {
  std::string markov;
  int n = 0;
  std::string method = "direct";
  std::string truth;
  std::string out;
};

void run_recover(const RecoverArgs& a) {
  const MarkovMatrix theta = io::markov_from_json(io::read_json(a.markov));
  const SystemDims dims{a.n, theta.input_dim(), theta.output_dim()};
  if (a.method == "direct") {
    const RecoveredParams rp = recover_from_markov(theta, dims);
    if (rp.imag_warning) {
      std::cerr << "warning: imaginary residual " << rp.imag_residual << " discarded\n";
    }
    emit_json(io::params_to_json(rp), a.out);
  } else if (a.method == "ho-kalman") {
    std::optional<Eigen::MatrixXd> obs;
    if (!a.truth.empty()) {
      const auto sys = io::system_from_json(io::read_json(a.truth));
      obs = observability_matrix(assemble_state_matrices(sys).a, sys.c_matrix,
                                 theta.truncation() / 2);
    }
    emit_json(io::params_to_json(ho_kalman(theta, dims, obs)), a.out);
  } else {
    throw CLI::ValidationError("--method", "expected direct or ho-kalman");
  }
}

struct ConfigArgs {
  std::string config;
  std::string output_dir;
};

ExperimentConfig load_config(const ConfigArgs& a) {
  const auto j = io::read_json(a.config);
  ExperimentConfig cfg;
  try {
    cfg = config_from_json(j);
  } catch (const std::logic_error& err) {
    throw CLI::ValidationError("--config", err.what());
  } catch (const nlohmann::json::exception& err) {
    throw CLI::ValidationError("--config", err.what());
  }
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  return cfg;
}

struct BoundArgs {
  ConfigArgs cfg;
  std::string iters;
  std::string out;
};

void run_bound(const BoundArgs& a) {
  const ExperimentConfig cfg = load_config(a.cfg);
  const std::uint64_t sys_seed =
      cfg.system_seed ? *cfg.system_seed : derive_seed(cfg.seeds.front(), kSystemStream);
  const auto sys = generate_system(cfg.dims, cfg.rho_max, sys_seed);
  BoundInputs in = bound_inputs_from_system(sys, cfg.truncation, cfg.n_samples,
                                            cfg.input_variance(), cfg.noise_variance());
  in.eta = cfg.resolved_eta();
  const BoundReport rep = evaluate_bounds(in);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::cerr << "truncation_bound=" << rep.truncation_bound
            << " transfer_tail_bound=" << rep.transfer_tail_bound << " chi_N_sq=" << rep.chi_N_sq
            << " contraction_factor=" << rep.contraction_factor << " delta_N=" << rep.delta_N
            << " eta_cap=" << rep.eta_cap << " eta_star=" << rep.eta_star << '\n';

  std::vector<std::int64_t> iters = parse_iters(a.iters);
  if (iters.empty()) {
    for (std::int64_t k = 0; k <= cfg.n_iters; k += cfg.checkpoint_every) iters.push_back(k);
  }
  std::vector<double> values;
  switch (cfg.algorithm) {
    case Algorithm::OfflineSgd:
    case Algorithm::OfflineCombined:
      values = sgd_bound_curve(in, iters);
      break;
    case Algorithm::OnlineSgd:
    case Algorithm::OnlineCombined:
      values = online_sgd_bound_curve(in, iters);
      break;
    default:
      for (const auto t : iters) {
        if (t < 2 * static_cast<std::int64_t>(cfg.truncation)) {
          values.push_back(NAN);
        } else {
          in.batch_size = t;
          values.push_back(chi_N_sq(in));
        }
      }
  }
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw std::runtime_error("cannot open " + a.out);
  }
  std::ostream& os = a.out.empty() ? std::cout : file;
  os << "iter,bound_value\n";
  for (std::size_t i = 0; i < iters.size(); ++i) {
    os << iters[i] << ',' << io::format_double(values[i]) << '\n';
  }
}

void run_experiment_cmd(const ConfigArgs& a) {
  const ExperimentConfig cfg = load_config(a);
  const SummaryReport rep = run_experiment(cfg);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << summary_to_json(rep).dump(2) << '\n';
}

void run_compare_cmd(const ConfigArgs& a) {
  const ExperimentConfig cfg = load_config(a);
  const auto results = run_compare(cfg);
  json out = json::array();
  int direct_wins = 0;
  for (const auto& r : results) {
    const CompareRow& f = r.rows.back();
    const bool win = f.direct_a_err <= f.hk_a_err;
    direct_wins += win ? 1 : 0;
    out.push_back(json{{"seed", r.seed},
                       {"iter", f.iter},
                       {"markov_err", f.markov_err},
                       {"direct_a_err", f.direct_a_err},
                       {"hk_a_err", f.hk_a_err}});
  }
  std::cout << json{{"final", out}, {"direct_not_worse", direct_wins},
                    {"seeds", results.size()}}
                   .dump(2)
            << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Brunovsky-form LTI system identification"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "draw a random stable Brunovsky system");
  g->add_option("--n", gen.n, "block order")->check(CLI::PositiveNumber);
  g->add_option("--m", gen.m, "input dimension")->check(CLI::PositiveNumber);
  g->add_option("--p", gen.p, "output dimension")->check(CLI::PositiveNumber);
  g->add_option("--rho-max", gen.rho_max, "spectral radius cap")->check(CLI::Range(0.0, 1.0));
  g->add_option("--seed", gen.seed);
  g->add_option("-o,--out", gen.out, "system JSON path (stdout when omitted)");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "simulate a trajectory with Gaussian inputs");
  s->add_option("--system", sim.system, "system JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--steps", sim.steps)->check(CLI::PositiveNumber);
  s->add_option("--input-std", sim.input_std)->check(CLI::PositiveNumber);
  s->add_option("--noise-std", sim.noise_std)->check(CLI::NonNegativeNumber);
  s->add_option("--seed", sim.seed);
  s->add_option("-o,--out", sim.out, "trajectory CSV path")->required();

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "estimate Markov parameters from a trajectory");
  e->add_option("--data", est.data, "trajectory CSV")->required()->check(CLI::ExistingFile);
  e->add_option("--T", est.truncation, "truncation length")->check(CLI::Range(2, 1 << 20));
  e->add_option("--method", est.method)
      ->check(CLI::IsMember({"offline-sgd", "online-sgd", "least-squares"}));
  e->add_option("--eta", est.eta, "step size or auto");
  e->add_option("--iters", est.iters, "offline SGD iterations (default N)");
  e->add_option("--seed", est.seed);
  e->add_option("--checkpoint-every", est.checkpoint_every)->check(CLI::PositiveNumber);
  e->add_option("--truth", est.truth, "ground-truth system JSON")->check(CLI::ExistingFile);
  e->add_option("--trace", est.trace, "trace CSV path");
  e->add_option("-o,--out", est.out, "Markov JSON path (stdout when omitted)");

  RecoverArgs rec;
  auto* r = app.add_subcommand("recover", "recover {a_i}, C, D from Markov parameters");
  r->add_option("--markov", rec.markov, "Markov JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--n", rec.n, "block order")->required()->check(CLI::PositiveNumber);
  r->add_option("--method", rec.method)->check(CLI::IsMember({"direct", "ho-kalman"}));
  r->add_option("--truth", rec.truth, "system JSON used to align Ho-Kalman")
      ->check(CLI::ExistingFile);
  r->add_option("-o,--out", rec.out, "parameters JSON path (stdout when omitted)");

  BoundArgs bnd;
  auto* b = app.add_subcommand("bound", "evaluate the error-bound curve for a configuration");
  b->add_option("--config", bnd.cfg.config)->required()->check(CLI::ExistingFile);
  b->add_option("--iters", bnd.iters, "comma-separated iterations");
  b->add_option("-o,--out", bnd.out, "bound-curve CSV path (stdout when omitted)");

  ConfigArgs exp;
  auto* x = app.add_subcommand("experiment", "run a seeded experiment");
  x->add_option("--config", exp.config)->required()->check(CLI::ExistingFile);
  x->add_option("--output-dir", exp.output_dir, "overrides output_dir in the config");

  ConfigArgs cmp;
  auto* c = app.add_subcommand("compare", "direct recovery vs aligned Ho-Kalman");
  c->add_option("--config", cmp.config)->required()->check(CLI::ExistingFile);
  c->add_option("--output-dir", cmp.output_dir, "overrides output_dir in the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (g->parsed()) run_generate(gen);
    else if (s->parsed()) run_simulate(sim);
    else if (e->parsed()) run_estimate(est);
    else if (r->parsed()) run_recover(rec);
    else if (b->parsed()) run_bound(bnd);
    else if (x->parsed()) run_experiment_cmd(exp);
    else if (c->parsed()) run_compare_cmd(cmp);
  } catch (const CLI::ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sysid
