#include "sysid/recovery.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sysid/errors.hpp"
#include "sysid/estimation.hpp"

namespace sysid {

namespace {

void check_theta_dims(const MarkovMatrix& theta, const SystemDims& dims) {
  dims.validate();
  if (theta.output_dim() != dims.p || theta.input_dim() != dims.m) {
    throw DomainError("Markov estimate shape does not match the system dimensions");
  }
}

}  // namespace

FrequencyGrid unit_circle_grid(int num_points) {
  if (num_points < 1) throw DomainError("grid needs at least one point");
  FrequencyGrid grid;
  grid.points.reserve(num_points);
  for (int k = 0; k < num_points; ++k) {
    grid.points.push_back(std::polar(1.0, std::numbers::pi * k / num_points));
  }
  return grid;
}

FrequencyGrid make_frequency_grid(const SystemDims& dims, const MarkovMatrix& theta_hat) {
  check_theta_dims(theta_hat, dims);
  const double scale = theta_hat.matrix().norm();
  if (!(scale > 0.0)) throw DegenerateEstimateError("Markov estimate is zero");
  const double tau_zero = kZeroScreenRelTol * scale;
  const int K = dims.num_unknowns();
  const double delta = std::numbers::pi / (7.0 * K);

  FrequencyGrid grid;
  grid.points.reserve(K);
  for (int k = 0; k < K; ++k) {
    const double base = std::numbers::pi * k / K;
    bool accepted = false;
    for (int retry = 0; retry <= kMaxGridRetries && !accepted; ++retry) {
      const Complex z = std::polar(1.0, base + retry * delta);
      if (theta_vartheta(theta_hat, z).norm() > tau_zero) {
        grid.points.push_back(z);
        accepted = true;
      }
    }
    if (!accepted) {
      throw DegenerateEstimateError("no usable matching frequency near exp(j*" +
                                    std::to_string(base) + ")");
    }
  }
  return grid;
}

Eigen::MatrixXcd vartheta(Complex z, int m, int truncation) {
  if (z == Complex(0.0)) throw DomainError("z must be nonzero");
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(m) * truncation, m);
  Complex zpow = 1.0;
  for (int t = 1; t < truncation; ++t) {
    zpow /= z;
    v.block(static_cast<Eigen::Index>(t) * m, 0, m, m).diagonal().setConstant(zpow);
  }
  return v;
}

Eigen::MatrixXcd theta_vartheta(const MarkovMatrix& theta, Complex z) {
  if (z == Complex(0.0)) throw DomainError("z must be nonzero");
  const Complex zinv = 1.0 / z;
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(theta.output_dim(), theta.input_dim());
  for (int k = theta.truncation() - 1; k >= 1; --k) {
    acc = (acc + theta.block(k).cast<Complex>()) * zinv;
  }
  return acc;
}

namespace {

void require_rank_condition(const MarkovMatrix& theta, const SystemDims& dims) {
  if (theta.truncation() < dims.n + 1) {
    throw PreconditionError("recovery needs T >= n + 1 (T=" + std::to_string(theta.truncation()) +
                            ", n=" + std::to_string(dims.n) + ")");
  }
}

// z^0..z^n for one grid point.
Eigen::VectorXcd powers(Complex z, int n) {
  Eigen::VectorXcd out(n + 1);
  out(0) = 1.0;
  for (int v = 1; v <= n; ++v) out(v) = out(v - 1) * z;
  return out;
}

}  // namespace

RecoveryBlock recovery_block(const MarkovMatrix& theta_hat, const SystemDims& dims,
                             const FrequencyGrid& grid, int i, int j) {
  check_theta_dims(theta_hat, dims);
  if (i < 0 || i >= dims.m || j < 0 || j >= dims.p) throw DomainError("block index out of range");
  const int n = dims.n;
  const int K = grid.size();
  RecoveryBlock blk{Eigen::MatrixXcd(K, 2 * n), Eigen::VectorXcd(K)};
  for (int k = 0; k < K; ++k) {
    const Complex z = grid.points[k];
    const Eigen::VectorXcd zp = powers(z, n);
    // [(Theta vartheta)']_{ij} is entry (j, i) of the p x m product.
    const Complex g = theta_vartheta(theta_hat, z)(j, i);
    for (int v = 1; v <= n; ++v) blk.coeffs(k, v - 1) = -g * zp(n - v);
    for (int v = 0; v < n; ++v) blk.coeffs(k, n + v) = zp(v);
    blk.rhs(k) = g * zp(n);
  }
  return blk;
}

RecoverySystem build_recovery_system(const MarkovMatrix& theta_hat, const SystemDims& dims,
                                     const FrequencyGrid& grid) {
  check_theta_dims(theta_hat, dims);
  require_rank_condition(theta_hat, dims);
  const int n = dims.n, m = dims.m, p = dims.p;
  const int nm = dims.state_dim();
  const int K = grid.size();
  if (K < 1) throw DomainError("frequency grid is empty");

  std::vector<Eigen::MatrixXcd> products;
  std::vector<Eigen::VectorXcd> zpowers;
  products.reserve(K);
  zpowers.reserve(K);
  for (const Complex& z : grid.points) {
    products.push_back(theta_vartheta(theta_hat, z));
    zpowers.push_back(powers(z, n));
  }

  RecoverySystem rs;
  rs.dims = dims;
  rs.truncation = theta_hat.truncation();
  rs.d_estimate = theta_hat.block(0);
  rs.gamma = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(m) * p * K, dims.num_unknowns());
  rs.kappa = Eigen::VectorXcd::Zero(rs.gamma.rows());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < p; ++j) {
      const Eigen::Index row0 = static_cast<Eigen::Index>(i * p + j) * K;
      for (int k = 0; k < K; ++k) {
        const Complex g = products[k](j, i);
        const Eigen::VectorXcd& zp = zpowers[k];
        for (int v = 1; v <= n; ++v) rs.gamma(row0 + k, v - 1) = -g * zp(n - v);
        // Unknown c_{j, i + v m} sits at column n + j n m + i + v m.
        for (int v = 0; v < n; ++v) rs.gamma(row0 + k, n + j * nm + i + v * m) = zp(v);
        rs.kappa(row0 + k) = g * zp(n);
      }
    }
  }
  return rs;
}

RecoveredParams solve_recovery(const RecoverySystem& rs, const RecoveryOptions& opts) {
  const SystemDims& d = rs.dims;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(rs.gamma);
  if (qr.rank() < rs.gamma.cols()) {
    throw RankError("recovery matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(rs.gamma.cols()) + ")");
  }
  const Eigen::VectorXcd rho = qr.solve(rs.kappa);

  RecoveredParams out;
  out.char_coeffs = rho.head(d.n).real();
  out.c_matrix.resize(d.p, d.state_dim());
  for (int j = 0; j < d.p; ++j) {
    out.c_matrix.row(j) = rho.segment(d.n + j * d.state_dim(), d.state_dim()).real().transpose();
  }
  out.d_matrix = rs.d_estimate;
  out.imag_residual = rho.imag().cwiseAbs().maxCoeff();
  out.ls_residual = (rs.gamma * rho - rs.kappa).norm();
  out.imag_warning = out.imag_residual > opts.imag_warn_threshold;
  return out;
}

RecoveredParams recover_from_markov(const MarkovMatrix& theta_hat, const SystemDims& dims,
                                    const RecoveryOptions& opts) {
  const FrequencyGrid grid = make_frequency_grid(dims, theta_hat);
  return solve_recovery(build_recovery_system(theta_hat, dims, grid), opts);
}

BrunovskySystem as_system(const RecoveredParams& params, const SystemDims& dims) {
  return BrunovskySystem{dims, params.char_coeffs, params.c_matrix, params.d_matrix};
}

bool CheckpointSchedule::includes(std::int64_t iteration) const {
  if (!points.empty()) {
    for (const auto pt : points) {
      if (pt == iteration) return true;
    }
    return false;
  }
  return every > 0 && iteration % every == 0;
}

CheckpointSchedule CheckpointSchedule::powers_of_two(std::int64_t first, std::int64_t last) {
  CheckpointSchedule s;
  s.every = 0;
  std::int64_t v = 1;
  while (v < first) v *= 2;
  for (; v <= last; v *= 2) s.points.push_back(v);
  return s;
}

namespace {

RecoveryCheckpoint solve_checkpoint(std::int64_t iteration, const MarkovMatrix& theta,
                                    const SystemDims& dims, const RecoveryOptions& opts,
                                    bool is_final) {
  RecoveryCheckpoint cp{iteration, theta, std::nullopt, {}};
  try {
    cp.params = recover_from_markov(theta, dims, opts);
  } catch (const DegenerateEstimateError& e) {
    if (is_final) throw;
    cp.failure = e.what();
  } catch (const RankError& e) {
    if (is_final) throw;
    cp.failure = e.what();
  }
  return cp;
}

void check_stream(const Trajectory& data, const SystemDims& dims) {
  dims.validate();
  if (data.input_dim() != dims.m || data.output_dim() != dims.p) {
    throw DomainError("trajectory dimensions do not match the system dimensions");
  }
}

}  // namespace

std::vector<RecoveryCheckpoint> run_online_combined(const Trajectory& stream,
                                                    const SystemDims& dims, int truncation,
                                                    double eta, const CombinedOptions& opts) {
  check_stream(stream, dims);
  if (truncation < dims.n + 1) throw PreconditionError("online recovery needs T >= n + 1");
  OnlineSgd sgd(dims.p, dims.m, truncation, eta);
  std::vector<RecoveryCheckpoint> trace;
  std::int64_t last_recorded = -1;
  for (int k = 0; k < stream.length(); ++k) {
    if (!sgd.feed(stream.inputs.col(k), stream.outputs.col(k))) continue;
    const std::int64_t it = sgd.state().iteration;
    const bool is_last = k + 1 == stream.length();
    if (opts.schedule.includes(it) && !is_last) {
      trace.push_back(solve_checkpoint(it, sgd.state().theta_hat, dims, opts.recovery, false));
      last_recorded = it;
    }
  }
  if (sgd.state().iteration != last_recorded) {
    trace.push_back(
        solve_checkpoint(sgd.state().iteration, sgd.state().theta_hat, dims, opts.recovery, true));
  }
  return trace;
}

std::vector<RecoveryCheckpoint> run_offline_combined(const Trajectory& batch,
                                                     const SystemDims& dims, int truncation,
                                                     double eta, std::int64_t n_iters,
                                                     std::uint64_t seed,
                                                     const CombinedOptions& opts) {
  check_stream(batch, dims);
  if (truncation < dims.n + 1) throw PreconditionError("offline recovery needs T >= n + 1");
  if (n_iters < 0) throw DomainError("n_iters must be nonnegative");
  OfflineSgd sgd(batch, truncation, eta, seed);
  std::vector<RecoveryCheckpoint> trace;
  for (std::int64_t tau = 1; tau <= n_iters; ++tau) {
    sgd.run(1);
    if (tau < n_iters && opts.schedule.includes(tau)) {
      trace.push_back(solve_checkpoint(tau, sgd.state().theta_hat, dims, opts.recovery, false));
    }
  }
  trace.push_back(solve_checkpoint(n_iters, sgd.state().theta_hat, dims, opts.recovery, true));
  return trace;
}

std::vector<RecoveryCheckpoint> run_online_pseudoinverse(const Trajectory& stream,
                                                         const SystemDims& dims, int truncation,
                                                         const CombinedOptions& opts) {
  check_stream(stream, dims);
  if (truncation < dims.n + 1) throw PreconditionError("online recovery needs T >= n + 1");
  InputWindow window(dims.m, truncation);
  NormalEquations sums(dims.p, dims.m, truncation);
  std::vector<RecoveryCheckpoint> trace;
  const std::int64_t total = stream.length();
  for (std::int64_t t = 1; t <= total; ++t) {
    window.push(stream.inputs.col(t - 1));
    if (!window.full()) continue;
    sums.add(window.regressor(), stream.outputs.col(t - 1));
    if (t < total && t >= 2 * truncation && opts.schedule.includes(t)) {
      try {
        trace.push_back(solve_checkpoint(t, sums.solve(), dims, opts.recovery, false));
      } catch (const RankError& e) {
        trace.push_back(RecoveryCheckpoint{t, MarkovMatrix::Zero(dims.p, dims.m, truncation),
                                           std::nullopt, e.what()});
      }
    }
  }
  if (total < 2 * truncation) {
    throw PreconditionError("pseudo-inverse recovery needs at least 2T pairs");
  }
  trace.push_back(solve_checkpoint(total, sums.solve(), dims, opts.recovery, true));
  return trace;
}

}  // namespace sysid
