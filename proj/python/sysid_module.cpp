#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sysid/baseline.hpp"
#include "sysid/bounds.hpp"
#include "sysid/errors.hpp"
#include "sysid/estimation.hpp"
#include "sysid/harness.hpp"
#include "sysid/io.hpp"
#include "sysid/lti.hpp"
#include "sysid/recovery.hpp"

namespace py = pybind11;
using namespace sysid;

namespace {

MarkovMatrix to_markov(const Eigen::MatrixXd& blocks, int m) { return MarkovMatrix(blocks, m); }

Trajectory make_trajectory(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& outputs,
                           double input_variance) {
  Trajectory t;
  t.inputs = inputs;
  t.outputs = outputs;
  t.input_variances = Eigen::VectorXd::Constant(inputs.rows(), input_variance);
  t.meas_noise_variances = Eigen::VectorXd::Zero(outputs.rows());
  return t;
}

}  // namespace

PYBIND11_MODULE(_sysid, mod) {
  mod.doc() = "LTI system identification in Brunovsky form";

  py::register_exception<DomainError>(mod, "DomainError", PyExc_ValueError);
  py::register_exception<PreconditionError>(mod, "PreconditionError", PyExc_ValueError);
  py::register_exception<RankError>(mod, "RankError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(mod, "DivergenceError", PyExc_RuntimeError);
  py::register_exception<SingularityError>(mod, "SingularityError", PyExc_RuntimeError);
  py::register_exception<DegenerateEstimateError>(mod, "DegenerateEstimateError",
                                                  PyExc_RuntimeError);

  py::class_<SystemDims>(mod, "SystemDims")
      .def(py::init([](int n, int m, int p) { return SystemDims{n, m, p}; }), py::arg("n"),
           py::arg("m") = 1, py::arg("p") = 1)
      .def_readwrite("n", &SystemDims::n)
      .def_readwrite("m", &SystemDims::m)
      .def_readwrite("p", &SystemDims::p)
      .def_property_readonly("state_dim", &SystemDims::state_dim)
      .def("__repr__", [](const SystemDims& d) {
        return "SystemDims(n=" + std::to_string(d.n) + ", m=" + std::to_string(d.m) +
               ", p=" + std::to_string(d.p) + ")";
      });

  py::class_<BrunovskySystem>(mod, "BrunovskySystem")
      .def(py::init([](const SystemDims& dims, const Eigen::VectorXd& a, const Eigen::MatrixXd& c,
                       const Eigen::MatrixXd& d) {
             BrunovskySystem sys{dims, a, c, d};
             sys.validate();
             return sys;
           }),
           py::arg("dims"), py::arg("char_coeffs"), py::arg("C"), py::arg("D"))
      .def_readonly("dims", &BrunovskySystem::dims)
      .def_readonly("char_coeffs", &BrunovskySystem::char_coeffs)
      .def_readonly("C", &BrunovskySystem::c_matrix)
      .def_readonly("D", &BrunovskySystem::d_matrix)
      .def_property_readonly("A", [](const BrunovskySystem& s) {
        return assemble_state_matrices(s).a;
      })
      .def_property_readonly("B", [](const BrunovskySystem& s) {
        return assemble_state_matrices(s).b;
      })
      .def_property_readonly("spectral_radius", &spectral_radius);

  mod.def("generate_system", &generate_system, py::arg("dims"), py::arg("rho_max"),
          py::arg("seed"));

  mod.def(
      "simulate",
      [](const BrunovskySystem& sys, int n_steps, double input_std, double noise_std,
         std::uint64_t seed) {
        SimulationOptions opts;
        opts.n_steps = n_steps;
        opts.input_variances = Eigen::VectorXd::Constant(sys.dims.m, input_std * input_std);
        opts.meas_noise_variances = Eigen::VectorXd::Constant(sys.dims.p, noise_std * noise_std);
        opts.seed = seed;
        const Trajectory t = simulate(sys, opts);
        return py::make_tuple(t.inputs, t.outputs);
      },
      py::arg("system"), py::arg("n_steps"), py::arg("input_std") = 1.0,
      py::arg("noise_std") = 0.0, py::arg("seed") = 0,
      "Returns (inputs m x N, outputs p x N).");

  mod.def(
      "true_markov", [](const BrunovskySystem& s, int T) { return true_markov(s, T).matrix(); },
      py::arg("system"), py::arg("T"));

  mod.def(
      "transfer_function",
      [](const BrunovskySystem& s, std::complex<double> z) { return transfer_function(s, z); },
      py::arg("system"), py::arg("z"));

  mod.def(
      "least_squares_markov",
      [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& y, int T) {
        return least_squares_markov(make_trajectory(u, y, 1.0), T).matrix();
      },
      py::arg("inputs"), py::arg("outputs"), py::arg("T"));

  mod.def(
      "offline_sgd",
      [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& y, int T, double eta,
         std::int64_t n_iters, std::uint64_t seed) {
        return offline_sgd(make_trajectory(u, y, 1.0), T, eta, n_iters, seed).theta_hat.matrix();
      },
      py::arg("inputs"), py::arg("outputs"), py::arg("T"), py::arg("eta"), py::arg("n_iters"),
      py::arg("seed") = 0);

  py::class_<OnlineSgd>(mod, "OnlineSgd")
      .def(py::init<int, int, int, double>(), py::arg("p"), py::arg("m"), py::arg("T"),
           py::arg("eta"))
      .def(
          "feed",
          [](OnlineSgd& s, const Eigen::VectorXd& u, const Eigen::VectorXd& y) {
            return s.feed(u, y);
          },
          py::arg("u"), py::arg("y"))
      .def_property_readonly("theta", [](const OnlineSgd& s) { return s.state().theta_hat.matrix(); })
      .def_property_readonly("iteration", [](const OnlineSgd& s) { return s.state().iteration; });

  mod.def("step_size_cap", &step_size_cap, py::arg("m"), py::arg("T"), py::arg("max_variance"));
  mod.def("default_step_size", &default_step_size, py::arg("m"), py::arg("T"),
          py::arg("max_variance"));

  py::class_<RecoveredParams>(mod, "RecoveredParams")
      .def_readonly("char_coeffs", &RecoveredParams::char_coeffs)
      .def_readonly("C", &RecoveredParams::c_matrix)
      .def_readonly("D", &RecoveredParams::d_matrix)
      .def_readonly("imag_residual", &RecoveredParams::imag_residual)
      .def_readonly("ls_residual", &RecoveredParams::ls_residual)
      .def_readonly("imag_warning", &RecoveredParams::imag_warning);

  mod.def(
      "recover",
      [](const Eigen::MatrixXd& theta, const SystemDims& dims) {
        return recover_from_markov(to_markov(theta, dims.m), dims);
      },
      py::arg("theta"), py::arg("dims"));

  mod.def(
      "recovery_system",
      [](const Eigen::MatrixXd& theta, const SystemDims& dims) {
        const MarkovMatrix mk = to_markov(theta, dims.m);
        const RecoverySystem rs = build_recovery_system(mk, dims, make_frequency_grid(dims, mk));
        return py::make_tuple(rs.gamma, rs.kappa);
      },
      py::arg("theta"), py::arg("dims"), "Returns (Gamma, kappa).");

  mod.def(
      "ho_kalman",
      [](const Eigen::MatrixXd& theta, const SystemDims& dims,
         std::optional<Eigen::MatrixXd> true_observability) {
        const HankelDecomposition hk = ho_kalman(to_markov(theta, dims.m), dims, true_observability);
        py::dict out;
        out["A"] = hk.a_hat;
        out["B"] = hk.b_hat;
        out["C"] = hk.c_hat;
        out["D"] = hk.d_hat;
        out["aligned"] = hk.aligned;
        return out;
      },
      py::arg("theta"), py::arg("dims"), py::arg("true_observability") = py::none());

  mod.def("observability_matrix", &observability_matrix, py::arg("A"), py::arg("C"),
          py::arg("blocks"));

  mod.def(
      "bound_report",
      [](const BrunovskySystem& sys, int T, std::int64_t N, double input_std, double noise_std) {
        const BoundInputs in =
            bound_inputs_from_system(sys, T, N, input_std * input_std, noise_std * noise_std);
        const BoundReport r = evaluate_bounds(in);
        py::dict out;
        out["truncation_bound"] = r.truncation_bound;
        out["transfer_tail_bound"] = r.transfer_tail_bound;
        out["chi_N_sq"] = r.chi_N_sq;
        out["contraction_factor"] = r.contraction_factor;
        out["delta_N"] = r.delta_N;
        out["eta_cap"] = r.eta_cap;
        out["eta_star"] = r.eta_star;
        out["warnings"] = r.warnings;
        return out;
      },
      py::arg("system"), py::arg("T"), py::arg("N"), py::arg("input_std") = 1.0,
      py::arg("noise_std") = 0.0);

  mod.def(
      "run_experiment_json",
      [](const std::string& config) {
        const ExperimentConfig cfg = config_from_json(nlohmann::json::parse(config));
        SummaryReport rep;
        {
          py::gil_scoped_release release;
          rep = run_experiment(cfg);
        }
        return summary_to_json(rep).dump();
      },
      py::arg("config"));
}
