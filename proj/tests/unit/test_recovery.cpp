#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sysid/bounds.hpp"
#include "sysid/errors.hpp"
#include "sysid/estimation.hpp"
#include "sysid/lti.hpp"
#include "sysid/recovery.hpp"

using namespace sysid;

namespace {

Eigen::VectorXcd true_unknowns(const BrunovskySystem& sys) {
  const int nm = sys.dims.state_dim();
  Eigen::VectorXcd rho(sys.dims.num_unknowns());
  rho.head(sys.dims.n) = sys.char_coeffs.cast<Complex>();
  for (int j = 0; j < sys.dims.p; ++j) {
    rho.segment(sys.dims.n + j * nm, nm) = sys.c_matrix.row(j).transpose().cast<Complex>();
  }
  return rho;
}

double param_error(const RecoveredParams& rp, const BrunovskySystem& sys) {
  return (rp.char_coeffs - sys.char_coeffs).norm() + (rp.c_matrix - sys.c_matrix).norm() +
         (rp.d_matrix - sys.d_matrix).norm();
}

Trajectory stream(const BrunovskySystem& sys, int steps, std::uint64_t seed, double noise_var) {
  SimulationOptions opts;
  opts.n_steps = steps;
  opts.input_variances = Eigen::VectorXd::Ones(sys.dims.m);
  opts.meas_noise_variances = Eigen::VectorXd::Constant(sys.dims.p, noise_var);
  opts.seed = seed;
  return simulate(sys, opts);
}

}  // namespace

TEST_CASE("vartheta and theta_vartheta agree") {
  const auto sys = generate_system({2, 2, 3}, 0.8, 1);
  const auto theta = true_markov(sys, 7);
  const Complex z = std::polar(1.0, 0.4);
  const Eigen::MatrixXcd v = vartheta(z, 2, 7);
  CHECK(v.rows() == 14);
  CHECK(v.topRows(2).norm() == 0.0);
  CHECK((theta.matrix().cast<Complex>() * v - theta_vartheta(theta, z)).norm() < 1e-13);
  // D + theta vartheta is the truncated transfer function.
  CHECK((theta_vartheta(theta, z) + theta.block(0).cast<Complex>() -
         truncated_transfer(theta, z))
            .norm() < 1e-13);
}

TEST_CASE("frequency grid follows the base rule on a generic estimate") {
  const auto sys = generate_system({3, 2, 2}, 0.8, 2);
  const auto theta = true_markov(sys, 10);
  const auto grid = make_frequency_grid(sys.dims, theta);
  const int K = sys.dims.num_unknowns();
  REQUIRE(grid.size() == K);
  for (int k = 0; k < K; ++k) {
    CHECK(std::abs(std::abs(grid.points[k]) - 1.0) < 1e-12);
    CHECK(std::abs(grid.points[k] - std::polar(1.0, std::numbers::pi * k / K)) < 1e-15);
    for (int j = 0; j < k; ++j) CHECK(std::abs(grid.points[k] - grid.points[j]) > 1e-6);
  }
  const auto plain = unit_circle_grid(K);
  CHECK(plain.size() == K);
}

TEST_CASE("frequency grid rotates away from zeros of the estimate") {
  // theta vartheta(z) = z^{-1} - z^{-2} vanishes at z = 1.
  MarkovMatrix theta(Eigen::RowVector3d(0.4, 1.0, -1.0), 1);
  const SystemDims dims{1, 1, 1};
  const auto grid = make_frequency_grid(dims, theta);
  const int K = dims.num_unknowns();
  CHECK(std::abs(grid.points[0] - std::polar(1.0, std::numbers::pi / (7.0 * K))) < 1e-15);
  CHECK(std::abs(grid.points[1] - std::polar(1.0, std::numbers::pi / K)) < 1e-15);
}

TEST_CASE("degenerate estimates are rejected") {
  const SystemDims dims{2, 1, 1};
  CHECK_THROWS_AS(make_frequency_grid(dims, MarkovMatrix::Zero(1, 1, 5)), DegenerateEstimateError);
  MarkovMatrix only_d = MarkovMatrix::Zero(1, 1, 5);
  only_d.matrix()(0, 0) = 2.0;
  CHECK_THROWS_AS(make_frequency_grid(dims, only_d), DegenerateEstimateError);
  CHECK_THROWS_AS(make_frequency_grid({2, 2, 1}, MarkovMatrix::Zero(1, 1, 5)), DomainError);
}

TEST_CASE("recovery system shape and block placement") {
  const auto sys = generate_system({2, 2, 3}, 0.8, 4);
  const SystemDims& d = sys.dims;
  const auto theta = true_markov(sys, 8);
  const auto grid = make_frequency_grid(d, theta);
  const auto rs = build_recovery_system(theta, d, grid);
  const int K = grid.size();
  CHECK(rs.gamma.rows() == d.m * d.p * K);
  CHECK(rs.gamma.cols() == d.n + d.state_dim() * d.p);
  CHECK(rs.kappa.size() == rs.gamma.rows());
  CHECK(rs.d_estimate == theta.block(0));

  const int nm = d.state_dim();
  for (int i = 0; i < d.m; ++i) {
    for (int j = 0; j < d.p; ++j) {
      const auto blk = recovery_block(theta, d, grid, i, j);
      const auto rows = rs.gamma.middleRows((i * d.p + j) * K, K);
      CHECK((rows.leftCols(d.n) - blk.coeffs.leftCols(d.n)).norm() == 0.0);
      Eigen::MatrixXcd c_cols(K, d.n);
      for (int v = 0; v < d.n; ++v) c_cols.col(v) = rows.col(d.n + j * nm + i + v * d.m);
      CHECK((c_cols - blk.coeffs.rightCols(d.n)).norm() == 0.0);
      // Every other column of the block row is zero.
      CHECK(rows.cwiseAbs().sum() ==
            doctest::Approx(rows.leftCols(d.n).cwiseAbs().sum() + c_cols.cwiseAbs().sum()));
      CHECK((rs.kappa.segment((i * d.p + j) * K, K) - blk.rhs).norm() == 0.0);
    }
  }
}

TEST_CASE("exact recovery from true Markov parameters") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SystemDims dims{1 + static_cast<int>(seed % 4), 1 + static_cast<int>(seed % 2),
                          1 + static_cast<int>((seed / 2) % 3)};
    const auto sys = generate_system(dims, 0.6, seed);
    const auto rp = recover_from_markov(true_markov(sys, 80), dims);
    CHECK(param_error(rp, sys) < 1e-6);
    CHECK(rp.imag_residual < 1e-8);
    CHECK_FALSE(rp.imag_warning);
    CHECK(rp.ls_residual >= 0.0);
  }
}

TEST_CASE("rank condition: numerically full column rank blocks for T = n + 1") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int n = 1 + static_cast<int>(seed % 3);
    const SystemDims dims{n, 1 + static_cast<int>(seed % 3), 1 + static_cast<int>((seed / 3) % 3)};
    const auto sys = generate_system(dims, 0.9, seed);
    const auto theta = true_markov(sys, n + 1);
    const auto grid = make_frequency_grid(dims, theta);
    for (int i = 0; i < dims.m; ++i) {
      for (int j = 0; j < dims.p; ++j) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(recovery_block(theta, dims, grid, i, j).coeffs);
        const auto& s = svd.singularValues();
        CHECK(s(s.size() - 1) > 1e-12 * s(0));
      }
    }
  }
}

TEST_CASE("T = n violates the rank condition") {
  const auto sys = generate_system({3, 1, 1}, 0.8, 3);
  const auto theta = true_markov(sys, 3);
  CHECK_THROWS_AS(build_recovery_system(theta, sys.dims, make_frequency_grid(sys.dims, theta)),
                  PreconditionError);
}

TEST_CASE("consistency at truth: residual of the true unknowns shrinks with T") {
  const auto sys = generate_system({2, 1, 2}, 0.8, 6);
  const int n = sys.dims.n;
  const Eigen::VectorXcd rho = true_unknowns(sys);
  double prev = 1e300;
  for (int T : {n + 1, 2 * n, 4 * n, 8 * n, 16 * n}) {
    if (T < n + 1) continue;
    const auto theta = true_markov(sys, T);
    const auto rs = build_recovery_system(theta, sys.dims, make_frequency_grid(sys.dims, theta));
    const double res = (rs.gamma * rho - rs.kappa).norm();
    CHECK(res <= prev);
    prev = res;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("recovery is deterministic") {
  const auto sys = generate_system({3, 2, 1}, 0.7, 8);
  MarkovMatrix theta = true_markov(sys, 20);
  theta.matrix() += 1e-3 * Eigen::MatrixXd::Ones(theta.matrix().rows(), theta.matrix().cols());
  const auto a = recover_from_markov(theta, sys.dims);
  const auto b = recover_from_markov(theta, sys.dims);
  CHECK(a.char_coeffs == b.char_coeffs);
  CHECK(a.c_matrix == b.c_matrix);
  CHECK(a.imag_residual == b.imag_residual);
}

TEST_CASE("scaling the estimate scales C and D but keeps the coefficients") {
  const auto sys = generate_system({2, 2, 2}, 0.7, 12);
  const auto theta = true_markov(sys, 40);
  MarkovMatrix scaled = theta;
  scaled.matrix() *= 3.0;
  const auto base = recover_from_markov(theta, sys.dims);
  const auto big = recover_from_markov(scaled, sys.dims);
  CHECK((big.char_coeffs - base.char_coeffs).norm() < 1e-9);
  CHECK((big.c_matrix - 3.0 * base.c_matrix).norm() < 1e-9);
  CHECK((big.d_matrix - 3.0 * base.d_matrix).norm() < 1e-12);
}

TEST_CASE("noisy estimates report an imaginary residual") {
  const auto sys = generate_system({3, 1, 1}, 0.7, 2);
  MarkovMatrix theta = true_markov(sys, 20);
  theta.matrix()(0, 3) += 0.05;
  RecoveryOptions opts;
  opts.imag_warn_threshold = 1e-12;
  const auto rp = recover_from_markov(theta, sys.dims, opts);
  CHECK(rp.imag_residual > 0.0);
  CHECK(rp.imag_warning);
}

TEST_CASE("checkpoint schedules") {
  CheckpointSchedule every;
  every.every = 10;
  CHECK(every.includes(20));
  CHECK_FALSE(every.includes(25));
  const auto pow2 = CheckpointSchedule::powers_of_two(5, 100);
  CHECK(pow2.points == std::vector<std::int64_t>{8, 16, 32, 64});
  CHECK(pow2.includes(32));
  CHECK_FALSE(pow2.includes(30));
}

TEST_CASE("online combined run converges and respects the linkage bound") {
  const auto sys = generate_system({2, 1, 1}, 0.5, 3);
  const int T = 16;
  const auto data = stream(sys, 20000, 4, 0.0);
  CombinedOptions opts;
  opts.schedule.every = 250;
  const auto trace =
      run_online_combined(data, sys.dims, T, default_step_size(1, T, 1.0), opts);
  REQUIRE(trace.size() >= 10);
  CHECK(trace.back().iteration == data.length() - T + 1);
  const auto truth = true_markov(sys, T);
  const double link = linkage_factor(sys.dims, T);
  for (const auto& cp : trace) {
    if (!cp.params) continue;
    const double markov = markov_error(cp.theta_hat, truth);
    CHECK(param_error(*cp.params, sys) <= 10.0 * link * markov);
  }
  REQUIRE(trace.back().params.has_value());
  CHECK(param_error(*trace.back().params, sys) < 1e-3);
}

TEST_CASE("offline combined run") {
  const auto sys = generate_system({2, 1, 1}, 0.5, 5);
  const int T = 12;
  const auto data = stream(sys, 2000, 6, 0.0);
  const double eta = default_step_size(1, T, 1.0);
  CombinedOptions opts;
  opts.schedule.every = 500;
  const auto a = run_offline_combined(data, sys.dims, T, eta, 5000, 9, opts);
  const auto b = run_offline_combined(data, sys.dims, T, eta, 5000, 9, opts);
  REQUIRE(a.size() == 10);
  CHECK(a.back().iteration == 5000);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].theta_hat.matrix() == b[k].theta_hat.matrix());
  }
  REQUIRE(a.back().params.has_value());
  CHECK(param_error(*a.back().params, sys) < 1e-2);

  CHECK_THROWS_AS(run_offline_combined(data, sys.dims, T, eta, 0, 9, opts),
                  DegenerateEstimateError);
  CHECK_THROWS_AS(run_offline_combined(data, sys.dims, 2, eta, 100, 9, opts), PreconditionError);
}

TEST_CASE("online pseudo-inverse matches least squares on the prefix") {
  const auto sys = generate_system({3, 1, 2}, 0.6, 7);
  const int T = 12;
  const auto data = stream(sys, 600, 8, 0.01);
  CombinedOptions opts;
  opts.schedule.every = 100;
  const auto trace = run_online_pseudoinverse(data, sys.dims, T, opts);
  REQUIRE(!trace.empty());
  for (const auto& cp : trace) {
    CHECK(cp.iteration >= 2 * T);
    Trajectory prefix = data;
    prefix.inputs = data.inputs.leftCols(cp.iteration);
    prefix.outputs = data.outputs.leftCols(cp.iteration);
    const auto ls = least_squares_markov(prefix, T);
    CHECK(markov_error(cp.theta_hat, ls) < 1e-9);
    REQUIRE(cp.params.has_value());
    const auto direct = recover_from_markov(ls, sys.dims);
    CHECK((cp.params->char_coeffs - direct.char_coeffs).norm() < 1e-6);
  }
  CHECK(trace.back().iteration == data.length());

  Trajectory short_stream = data;
  short_stream.inputs = data.inputs.leftCols(2 * T - 1);
  short_stream.outputs = data.outputs.leftCols(2 * T - 1);
  CHECK_THROWS_AS(run_online_pseudoinverse(short_stream, sys.dims, T, opts), PreconditionError);
}

TEST_CASE("pseudo-inverse is more robust to noise than SGD at small budgets") {
  const auto sys = generate_system({3, 1, 1}, 0.5, 10);
  const int T = 16;
  const auto truth = true_markov(sys, T);
  int pinv_better = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = stream(sys, 3000, seed, 0.01);
    CombinedOptions opts;
    opts.schedule.every = 1000000;
    const auto sgd = run_online_combined(data, sys.dims, T, default_step_size(1, T, 1.0), opts);
    const auto pinv = run_online_pseudoinverse(data, sys.dims, T, opts);
    const auto a_true = assemble_state_matrices(sys).a;
    const double sgd_err =
        (assemble_state_matrices(as_system(*sgd.back().params, sys.dims)).a - a_true).norm();
    const double pinv_err =
        (assemble_state_matrices(as_system(*pinv.back().params, sys.dims)).a - a_true).norm();
    CHECK(markov_error(pinv.back().theta_hat, truth) < markov_error(sgd.back().theta_hat, truth));
    if (pinv_err < sgd_err) ++pinv_better;
  }
  CHECK(pinv_better >= 4);
}
