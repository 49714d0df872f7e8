#include "sysid/lti.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "sysid/errors.hpp"

namespace sysid {

namespace {

constexpr double kMaxCoeffMagnitude = 1e12;
constexpr int kMaxRootResamples = 100;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

void SystemDims::validate() const {
  if (n < 1 || m < 1 || p < 1) {
    throw DomainError("system dimensions must be positive (n=" + std::to_string(n) +
                      ", m=" + std::to_string(m) + ", p=" + std::to_string(p) + ")");
  }
}

void BrunovskySystem::validate() const {
  dims.validate();
  if (char_coeffs.size() != dims.n) throw DomainError("char_coeffs must have n entries");
  if (c_matrix.rows() != dims.p || c_matrix.cols() != dims.state_dim()) {
    throw DomainError("C must be p x (n*m)");
  }
  if (d_matrix.rows() != dims.p || d_matrix.cols() != dims.m) {
    throw DomainError("D must be p x m");
  }
  if (!char_coeffs.allFinite() || !all_finite(c_matrix) || !all_finite(d_matrix)) {
    throw DomainError("system matrices contain non-finite entries");
  }
  if (spectral_radius(*this) >= 1.0) throw DomainError("system is not stable: rho(A) >= 1");
}

MarkovMatrix::MarkovMatrix(Eigen::MatrixXd blocks, int input_dim)
    : blocks_(std::move(blocks)), m_(input_dim) {
  if (m_ < 1 || blocks_.cols() % m_ != 0) {
    throw DomainError("Markov matrix width must be a multiple of the input dimension");
  }
  truncation_ = static_cast<int>(blocks_.cols()) / m_;
  if (truncation_ < 2) throw DomainError("Markov matrix needs at least two blocks (T >= 2)");
}

MarkovMatrix MarkovMatrix::Zero(int p, int m, int truncation) {
  return MarkovMatrix(Eigen::MatrixXd::Zero(p, static_cast<Eigen::Index>(m) * truncation), m);
}

Eigen::VectorXd char_coeffs_from_roots(std::span<const Complex> roots) {
  // Sequential multiplication by (z - r); poly[k] holds the coefficient of z^{deg-k}.
  std::vector<Complex> poly{1.0};
  for (const Complex& r : roots) {
    std::vector<Complex> next(poly.size() + 1, 0.0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k] += poly[k];
      next[k + 1] -= r * poly[k];
    }
    poly = std::move(next);
  }
  Eigen::VectorXd coeffs(static_cast<Eigen::Index>(roots.size()));
  for (std::size_t k = 1; k < poly.size(); ++k) {
    const double scale = 1.0 + std::abs(poly[k].real());
    if (std::abs(poly[k].imag()) > 1e-9 * scale) {
      throw DomainError("roots do not form conjugate pairs: polynomial is not real");
    }
    coeffs(static_cast<Eigen::Index>(k - 1)) = poly[k].real();
  }
  return coeffs;
}

Eigen::VectorXcd characteristic_roots(const Eigen::VectorXd& char_coeffs) {
  const auto n = char_coeffs.size();
  if (n == 0) return {};
  if (n == 1) return Eigen::VectorXcd::Constant(1, Complex(-char_coeffs(0), 0.0));
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  companion.topRightCorner(n - 1, n - 1).setIdentity();
  for (Eigen::Index b = 0; b < n; ++b) companion(n - 1, b) = -char_coeffs(n - 1 - b);
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  if (es.info() != Eigen::Success) throw DomainError("eigenvalue solve of companion failed");
  return es.eigenvalues();
}

double spectral_radius(const BrunovskySystem& sys) {
  const Eigen::VectorXcd roots = characteristic_roots(sys.char_coeffs);
  return roots.size() == 0 ? 0.0 : roots.cwiseAbs().maxCoeff();
}

BrunovskySystem generate_system(const SystemDims& dims, double rho_max, std::uint64_t seed) {
  dims.validate();
  if (!(rho_max > 0.0 && rho_max < 1.0)) {
    throw DomainError("rho_max must lie in (0, 1), got " + std::to_string(rho_max));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  BrunovskySystem sys;
  sys.dims = dims;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxRootResamples) {
      throw DomainError("could not draw characteristic coefficients within magnitude limits");
    }
    std::vector<Complex> roots;
    roots.reserve(dims.n);
    for (int k = 0; k < dims.n / 2; ++k) {
      // Modulus in (0, rho_max], phase in (0, pi).
      const double r = rho_max * (1.0 - unit(rng));
      const double phase = std::numbers::pi * (1.0 - unit(rng));
      const Complex root = std::polar(r, phase);
      roots.push_back(root);
      roots.push_back(std::conj(root));
    }
    if (dims.n % 2 == 1) roots.emplace_back(rho_max * (2.0 * unit(rng) - 1.0), 0.0);
    sys.char_coeffs = char_coeffs_from_roots(roots);
    if (sys.char_coeffs.cwiseAbs().maxCoeff() <= kMaxCoeffMagnitude) break;
  }
  sys.c_matrix.resize(dims.p, dims.state_dim());
  for (Eigen::Index j = 0; j < sys.c_matrix.cols(); ++j) {
    for (Eigen::Index i = 0; i < sys.c_matrix.rows(); ++i) sys.c_matrix(i, j) = gauss(rng);
  }
  sys.d_matrix.resize(dims.p, dims.m);
  for (Eigen::Index j = 0; j < sys.d_matrix.cols(); ++j) {
    for (Eigen::Index i = 0; i < sys.d_matrix.rows(); ++i) sys.d_matrix(i, j) = gauss(rng);
  }
  return sys;
}

StateMatrices assemble_state_matrices(const BrunovskySystem& sys) {
  const int n = sys.dims.n;
  const int m = sys.dims.m;
  const int nm = sys.dims.state_dim();
  StateMatrices out;
  out.a = Eigen::MatrixXd::Zero(nm, nm);
  if (n > 1) out.a.topRightCorner(nm - m, nm - m).setIdentity();
  // Bottom block row: [-a_n I, -a_{n-1} I, ..., -a_1 I].
  for (int b = 0; b < n; ++b) {
    out.a.block((n - 1) * m, b * m, m, m).diagonal().setConstant(-sys.char_coeffs(n - 1 - b));
  }
  out.b = Eigen::MatrixXd::Zero(nm, m);
  out.b.bottomRows(m).setIdentity();
  return out;
}

Eigen::VectorXd advance_state(const BrunovskySystem& sys, const Eigen::VectorXd& h,
                              const Eigen::VectorXd& u) {
  const int n = sys.dims.n;
  const int m = sys.dims.m;
  Eigen::VectorXd next(h.size());
  if (n > 1) next.head((n - 1) * m) = h.tail((n - 1) * m);
  Eigen::VectorXd last = u;
  for (int b = 0; b < n; ++b) last.noalias() -= sys.char_coeffs(n - 1 - b) * h.segment(b * m, m);
  next.tail(m) = last;
  return next;
}

namespace {

void check_variances(const Eigen::VectorXd& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected) {
    throw DomainError(std::string(what) + " has size " + std::to_string(v.size()) +
                      ", expected " + std::to_string(expected));
  }
  if ((v.array() < 0.0).any() || !v.allFinite()) {
    throw DomainError(std::string(what) + " must be finite and nonnegative");
  }
}

}  // namespace

Trajectory simulate(const BrunovskySystem& sys, const SimulationOptions& opts) {
  sys.validate();
  const SystemDims& d = sys.dims;
  if (opts.n_steps < 1) throw DomainError("n_steps must be >= 1");
  check_variances(opts.input_variances, d.m, "input_variances");
  check_variances(opts.meas_noise_variances, d.p, "meas_noise_variances");
  if (opts.process_noise_variances) {
    check_variances(*opts.process_noise_variances, d.state_dim(), "process_noise_variances");
  }
  Eigen::VectorXd h = Eigen::VectorXd::Zero(d.state_dim());
  if (opts.initial_state) {
    if (opts.initial_state->size() != d.state_dim()) throw DomainError("initial_state has wrong size");
    h = *opts.initial_state;
  }

  Trajectory traj;
  traj.inputs.resize(d.m, opts.n_steps);
  traj.outputs.resize(d.p, opts.n_steps);
  if (opts.store_states) traj.hidden_states.emplace(d.state_dim(), opts.n_steps);
  traj.input_variances = opts.input_variances;
  traj.meas_noise_variances = opts.meas_noise_variances;
  traj.initial_state = h;

  const Eigen::ArrayXd u_std = opts.input_variances.array().sqrt();
  const Eigen::ArrayXd zeta_std = opts.meas_noise_variances.array().sqrt();
  Eigen::ArrayXd w_std;
  if (opts.process_noise_variances) w_std = opts.process_noise_variances->array().sqrt();

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u(d.m), zeta(d.p), w(d.state_dim());
  for (int k = 0; k < opts.n_steps; ++k) {
    for (int i = 0; i < d.m; ++i) u(i) = u_std(i) * gauss(rng);
    for (int i = 0; i < d.p; ++i) zeta(i) = zeta_std(i) * gauss(rng);
    if (opts.store_states) traj.hidden_states->col(k) = h;
    traj.inputs.col(k) = u;
    traj.outputs.col(k).noalias() = sys.c_matrix * h + sys.d_matrix * u + zeta;
    h = advance_state(sys, h, u);
    if (opts.process_noise_variances) {
      for (int i = 0; i < d.state_dim(); ++i) w(i) = w_std(i) * gauss(rng);
      h += w;
    }
  }
  return traj;
}

Trajectory simulate_inputs(const BrunovskySystem& sys, const Eigen::MatrixXd& inputs,
                           const Eigen::VectorXd& initial_state,
                           const Eigen::VectorXd& meas_noise_variances, std::uint64_t seed,
                           bool store_states) {
  sys.validate();
  const SystemDims& d = sys.dims;
  if (inputs.rows() != d.m || inputs.cols() < 1) throw DomainError("inputs must be m x N with N >= 1");
  if (initial_state.size() != d.state_dim()) throw DomainError("initial_state has wrong size");
  check_variances(meas_noise_variances, d.p, "meas_noise_variances");

  const auto n_steps = inputs.cols();
  Trajectory traj;
  traj.inputs = inputs;
  traj.outputs.resize(d.p, n_steps);
  if (store_states) traj.hidden_states.emplace(d.state_dim(), n_steps);
  traj.input_variances = Eigen::VectorXd::Zero(d.m);
  traj.meas_noise_variances = meas_noise_variances;
  traj.initial_state = initial_state;

  const Eigen::ArrayXd zeta_std = meas_noise_variances.array().sqrt();
  const bool noisy = (zeta_std > 0.0).any();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd h = initial_state;
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(d.p);
  for (Eigen::Index k = 0; k < n_steps; ++k) {
    if (noisy) {
      for (int i = 0; i < d.p; ++i) zeta(i) = zeta_std(i) * gauss(rng);
    }
    if (store_states) traj.hidden_states->col(k) = h;
    traj.outputs.col(k).noalias() = sys.c_matrix * h + sys.d_matrix * inputs.col(k) + zeta;
    h = advance_state(sys, h, inputs.col(k));
  }
  return traj;
}

MarkovMatrix true_markov(const BrunovskySystem& sys, int truncation) {
  if (truncation < 2) throw DomainError("truncation T must be >= 2");
  sys.validate();
  const int m = sys.dims.m;
  Eigen::MatrixXd blocks(sys.dims.p, static_cast<Eigen::Index>(m) * truncation);
  blocks.leftCols(m) = sys.d_matrix;
  // Columns of A^{k-1} B, advanced one step at a time.
  Eigen::MatrixXd power_b = assemble_state_matrices(sys).b;
  const Eigen::VectorXd zero_u = Eigen::VectorXd::Zero(m);
  for (int k = 1; k < truncation; ++k) {
    blocks.middleCols(static_cast<Eigen::Index>(k) * m, m).noalias() = sys.c_matrix * power_b;
    for (int j = 0; j < m; ++j) power_b.col(j) = advance_state(sys, power_b.col(j), zero_u);
  }
  return MarkovMatrix(std::move(blocks), m);
}

Eigen::MatrixXcd transfer_function(const BrunovskySystem& sys, Complex z) {
  sys.validate();
  const Eigen::VectorXcd roots = characteristic_roots(sys.char_coeffs);
  for (Eigen::Index k = 0; k < roots.size(); ++k) {
    if (std::abs(z - roots(k)) <= 1e-10 * (1.0 + std::abs(z))) {
      throw SingularityError("transfer function evaluated at an eigenvalue of A");
    }
  }
  const StateMatrices ab = assemble_state_matrices(sys);
  Eigen::MatrixXcd resolvent = -ab.a.cast<Complex>();
  resolvent.diagonal().array() += z;
  const Eigen::MatrixXcd x = resolvent.partialPivLu().solve(ab.b.cast<Complex>());
  return sys.c_matrix.cast<Complex>() * x + sys.d_matrix.cast<Complex>();
}

Eigen::MatrixXcd truncated_transfer(const MarkovMatrix& theta, Complex z) {
  if (z == Complex(0.0)) throw DomainError("z must be nonzero");
  const Complex zinv = 1.0 / z;
  // Horner in z^{-1} from the last block down to block 1.
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(theta.output_dim(), theta.input_dim());
  for (int k = theta.truncation() - 1; k >= 1; --k) {
    acc = (acc + theta.block(k).cast<Complex>()) * zinv;
  }
  return acc + theta.block(0).cast<Complex>();
}

}  // namespace sysid
