#include <doctest.h>

#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "sysid/errors.hpp"
#include "sysid/lti.hpp"

using namespace sysid;

namespace {

// n=2, m=2, p=2 with q(z) = z^2 - 0.6 z + 0.25 (roots 0.3 +- 0.4j).
BrunovskySystem reference_system() {
  BrunovskySystem sys;
  sys.dims = {2, 2, 2};
  sys.char_coeffs.resize(2);
  sys.char_coeffs << -0.6, 0.25;
  sys.c_matrix.resize(2, 4);
  sys.c_matrix << 1.0, -0.5, 0.25, 2.0, 0.5, 1.5, -1.0, 0.75;
  sys.d_matrix.resize(2, 2);
  sys.d_matrix << 0.1, -0.2, 0.3, 0.4;
  return sys;
}

BrunovskySystem scalar_system(double a1, double c, double d) {
  BrunovskySystem sys;
  sys.dims = {1, 1, 1};
  sys.char_coeffs = Eigen::VectorXd::Constant(1, a1);
  sys.c_matrix = Eigen::MatrixXd::Constant(1, 1, c);
  sys.d_matrix = Eigen::MatrixXd::Constant(1, 1, d);
  return sys;
}

SimulationOptions quiet_options(const BrunovskySystem& sys, int steps, std::uint64_t seed) {
  SimulationOptions opts;
  opts.n_steps = steps;
  opts.input_variances = Eigen::VectorXd::Ones(sys.dims.m);
  opts.meas_noise_variances = Eigen::VectorXd::Zero(sys.dims.p);
  opts.seed = seed;
  return opts;
}

}  // namespace

TEST_CASE("system dims reject nonpositive sizes") {
  CHECK_THROWS_AS(SystemDims({0, 1, 1}).validate(), DomainError);
  CHECK_THROWS_AS(SystemDims({1, 0, 1}).validate(), DomainError);
  CHECK_THROWS_AS(SystemDims({1, 1, -2}).validate(), DomainError);
  CHECK_NOTHROW(SystemDims({3, 2, 2}).validate());
  CHECK(SystemDims{3, 2, 2}.state_dim() == 6);
  CHECK(SystemDims{3, 2, 2}.num_unknowns() == 3 + 12);
}

TEST_CASE("generate_system: first order system stays inside rho_max") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto sys = generate_system({1, 1, 1}, 0.5, seed);
    CHECK(sys.char_coeffs(0) > -0.5);
    CHECK(sys.char_coeffs(0) < 0.5);
    const auto ab = assemble_state_matrices(sys);
    CHECK(ab.a(0, 0) == doctest::Approx(-sys.char_coeffs(0)));
    CHECK(spectral_radius(sys) <= 0.5);
  }
}

TEST_CASE("char_coeffs_from_roots expands conjugate pairs") {
  const std::array<Complex, 2> roots{Complex(0.5, 0.5), Complex(0.5, -0.5)};
  const auto a = char_coeffs_from_roots(roots);
  REQUIRE(a.size() == 2);
  CHECK(a(0) == doctest::Approx(-1.0));
  CHECK(a(1) == doctest::Approx(0.5));

  const std::array<Complex, 1> lone{Complex(0.5, 0.5)};
  CHECK_THROWS_AS(char_coeffs_from_roots(lone), DomainError);
}

TEST_CASE("generate_system respects the spectral radius cap") {
  for (int n = 1; n <= 6; ++n) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto sys = generate_system({n, 2, 2}, 0.975, seed);
      const auto ab = assemble_state_matrices(sys);
      Eigen::EigenSolver<Eigen::MatrixXd> es(ab.a, false);
      CHECK(es.eigenvalues().cwiseAbs().maxCoeff() <= 0.975 + 1e-9);
    }
  }
  CHECK_THROWS_AS(generate_system({2, 1, 1}, 1.0, 0), DomainError);
  CHECK_THROWS_AS(generate_system({2, 1, 1}, 0.0, 0), DomainError);
  CHECK_THROWS_AS(generate_system({2, 1, 1}, 1.5, 0), DomainError);
}

TEST_CASE("generate_system is deterministic in the seed") {
  const auto s1 = generate_system({3, 2, 2}, 0.9, 42);
  const auto s2 = generate_system({3, 2, 2}, 0.9, 42);
  const auto s3 = generate_system({3, 2, 2}, 0.9, 43);
  CHECK(s1.char_coeffs == s2.char_coeffs);
  CHECK(s1.c_matrix == s2.c_matrix);
  CHECK(s1.d_matrix == s2.d_matrix);
  CHECK(s1.c_matrix != s3.c_matrix);
}

TEST_CASE("assemble_state_matrices layout") {
  SUBCASE("single block") {
    BrunovskySystem sys;
    sys.dims = {1, 2, 1};
    sys.char_coeffs = Eigen::VectorXd::Constant(1, 0.3);
    sys.c_matrix = Eigen::MatrixXd::Ones(1, 2);
    sys.d_matrix = Eigen::MatrixXd::Zero(1, 2);
    const auto ab = assemble_state_matrices(sys);
    CHECK(ab.a.isApprox(-0.3 * Eigen::MatrixXd::Identity(2, 2)));
    CHECK(ab.b.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  }
  SUBCASE("second order SISO") {
    BrunovskySystem sys;
    sys.dims = {2, 1, 1};
    sys.char_coeffs.resize(2);
    sys.char_coeffs << -1.0, 0.5;
    sys.c_matrix = Eigen::MatrixXd::Ones(1, 2);
    sys.d_matrix = Eigen::MatrixXd::Zero(1, 1);
    Eigen::MatrixXd expected(2, 2);
    expected << 0, 1, -0.5, 1.0;
    const auto ab = assemble_state_matrices(sys);
    CHECK(ab.a.isApprox(expected));
    CHECK(ab.b(0, 0) == 0.0);
    CHECK(ab.b(1, 0) == 1.0);
  }
  SUBCASE("MIMO matches the reference layout") {
    Eigen::MatrixXd expected(4, 4);
    expected << 0, 0, 1, 0, 0, 0, 0, 1, -0.25, 0, 0.6, 0, 0, -0.25, 0, 0.6;
    CHECK(assemble_state_matrices(reference_system()).a.isApprox(expected));
  }
}

TEST_CASE("eigenvalues of A are the roots of q with multiplicity m") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sys = generate_system({3, 2, 1}, 0.9, seed);
    const auto ab = assemble_state_matrices(sys);
    Eigen::EigenSolver<Eigen::MatrixXd> es(ab.a, false);
    const Eigen::VectorXcd eig = es.eigenvalues();
    const Eigen::VectorXcd roots = characteristic_roots(sys.char_coeffs);
    for (Eigen::Index r = 0; r < roots.size(); ++r) {
      int matches = 0;
      for (Eigen::Index k = 0; k < eig.size(); ++k) {
        if (std::abs(eig(k) - roots(r)) < 1e-6) ++matches;
      }
      CHECK(matches >= 2);
    }
  }
}

TEST_CASE("advance_state agrees with the dense recursion") {
  const auto sys = generate_system({4, 3, 2}, 0.9, 5);
  const auto ab = assemble_state_matrices(sys);
  Eigen::VectorXd h = Eigen::VectorXd::LinSpaced(12, -1.0, 2.0);
  const Eigen::VectorXd u = Eigen::Vector3d(0.3, -0.7, 1.1);
  CHECK((advance_state(sys, h, u) - (ab.a * h + ab.b * u)).norm() < 1e-14);
}

TEST_CASE("simulate: zero input and zero noise give zero output") {
  const auto sys = generate_system({3, 2, 2}, 0.8, 1);
  SimulationOptions opts = quiet_options(sys, 50, 3);
  opts.input_variances.setZero();
  const auto traj = simulate(sys, opts);
  CHECK(traj.outputs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate: impulse response equals the Markov parameters") {
  const auto sys = scalar_system(0.5, 2.0, 1.0);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(1, 6);
  u(0, 0) = 1.0;
  const auto traj = simulate_inputs(sys, u, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 0);
  const auto mk = true_markov(sys, 6);
  for (int k = 0; k < 6; ++k) CHECK(traj.outputs(0, k) == doctest::Approx(mk.block(k)(0, 0)));
}

TEST_CASE("simulate is deterministic and validates dimensions") {
  const auto sys = generate_system({2, 2, 3}, 0.7, 9);
  auto opts = quiet_options(sys, 100, 11);
  opts.meas_noise_variances.setConstant(0.04);
  const auto t1 = simulate(sys, opts);
  const auto t2 = simulate(sys, opts);
  CHECK(t1.inputs == t2.inputs);
  CHECK(t1.outputs == t2.outputs);

  auto bad = opts;
  bad.input_variances = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(simulate(sys, bad), DomainError);
  bad = opts;
  bad.meas_noise_variances = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(simulate(sys, bad), DomainError);
}

TEST_CASE("simulate: stored states follow the state recursion") {
  const auto sys = generate_system({3, 2, 2}, 0.9, 4);
  auto opts = quiet_options(sys, 40, 8);
  opts.store_states = true;
  opts.initial_state = Eigen::VectorXd::Constant(6, 0.5);
  const auto traj = simulate(sys, opts);
  REQUIRE(traj.hidden_states.has_value());
  const auto ab = assemble_state_matrices(sys);
  const auto& h = *traj.hidden_states;
  CHECK(h.col(0).isApprox(*opts.initial_state));
  for (int k = 0; k + 1 < traj.length(); ++k) {
    CHECK((h.col(k + 1) - ab.a * h.col(k) - ab.b * traj.inputs.col(k)).norm() < 1e-12);
  }
}

TEST_CASE("simulate: process noise perturbs the state") {
  const auto sys = generate_system({2, 1, 1}, 0.5, 2);
  auto opts = quiet_options(sys, 30, 6);
  const auto clean = simulate(sys, opts);
  opts.process_noise_variances = Eigen::VectorXd::Constant(2, 0.1);
  const auto noisy = simulate(sys, opts);
  CHECK((clean.outputs - noisy.outputs).norm() > 0.0);
  opts.process_noise_variances = Eigen::VectorXd::Constant(3, 0.1);
  CHECK_THROWS_AS(simulate(sys, opts), DomainError);
}

TEST_CASE("true_markov small cases") {
  SUBCASE("A = 0 kills the tail") {
    const auto mk = true_markov(scalar_system(0.0, 3.0, -2.0), 4);
    CHECK(mk.matrix()(0, 0) == -2.0);
    CHECK(mk.matrix()(0, 1) == 3.0);
    CHECK(mk.matrix()(0, 2) == 0.0);
    CHECK(mk.matrix()(0, 3) == 0.0);
  }
  SUBCASE("scalar a_1 = 0.5") {
    const auto mk = true_markov(scalar_system(0.5, 2.0, 1.0), 3);
    CHECK(mk.matrix()(0, 0) == doctest::Approx(1.0));
    CHECK(mk.matrix()(0, 1) == doctest::Approx(2.0));
    CHECK(mk.matrix()(0, 2) == doctest::Approx(-1.0));
  }
  SUBCASE("reference MIMO values") {
    Eigen::MatrixXd expected(2, 8);
    expected << 0.1, -0.2, 0.25, 2.0, 1.15, 0.7, 0.6275, -0.08, 0.3, 0.4, -1.0, 0.75, -0.1, 1.95,
        0.19, 0.9825;
    CHECK((true_markov(reference_system(), 4).matrix() - expected).norm() < 1e-14);
  }
  CHECK_THROWS_AS(true_markov(scalar_system(0.5, 1.0, 1.0), 1), DomainError);
}

TEST_CASE("true_markov equals the impulse response for MIMO systems") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sys = generate_system({3, 2, 2}, 0.95, seed);
    const int T = 50;
    const auto mk = true_markov(sys, T);
    for (int j = 0; j < sys.dims.m; ++j) {
      Eigen::MatrixXd u = Eigen::MatrixXd::Zero(sys.dims.m, T);
      u(j, 0) = 1.0;
      const auto traj = simulate_inputs(sys, u, Eigen::VectorXd::Zero(6), Eigen::VectorXd::Zero(2), 0);
      for (int k = 0; k < T; ++k) {
        CHECK((traj.outputs.col(k) - mk.block(k).col(j)).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }
}

TEST_CASE("regression identity y_t = Theta x_t + C A^{T-1} h_{t-T+1}") {
  const auto sys = generate_system({3, 2, 2}, 0.9, 17);
  auto opts = quiet_options(sys, 80, 2);
  opts.store_states = true;
  opts.initial_state = Eigen::VectorXd::Constant(6, 1.0);
  const auto traj = simulate(sys, opts);
  const int T = 10;
  const auto mk = true_markov(sys, T);
  const auto ab = assemble_state_matrices(sys);
  Eigen::MatrixXd ca = sys.c_matrix;
  for (int k = 0; k < T - 1; ++k) ca = ca * ab.a;
  for (int t = T; t <= traj.length(); ++t) {
    Eigen::VectorXd x(2 * T);
    for (int k = 0; k < T; ++k) x.segment(2 * k, 2) = traj.inputs.col(t - 1 - k);
    const Eigen::VectorXd rhs = mk.matrix() * x + ca * traj.hidden_states->col(t - T);
    CHECK((traj.outputs.col(t - 1) - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("transfer_function values") {
  SUBCASE("scalar resolvent") {
    const auto g = transfer_function(scalar_system(0.5, 2.0, 1.0), Complex(1.0, 0.0));
    CHECK(g(0, 0).real() == doctest::Approx(7.0 / 3.0));
    CHECK(std::abs(g(0, 0).imag()) < 1e-15);
  }
  SUBCASE("reference MIMO system on the unit circle") {
    const auto g = transfer_function(reference_system(), std::polar(1.0, 0.7));
    Eigen::Matrix2d re, im;
    re << 0.23901219718409933, 1.830908786075027, -0.7424782521140496, 0.9791797460115155;
    im << -1.9979716660524547, -1.8512754266692708, 0.5099760103419776, -3.499944780201417;
    CHECK((g.real() - re).norm() < 1e-13);
    CHECK((g.imag() - im).norm() < 1e-13);
  }
  SUBCASE("large |z| approaches D") {
    const auto sys = generate_system({3, 2, 2}, 0.9, 3);
    const double zmod = 1e6;
    const auto g = transfer_function(sys, Complex(zmod, 0.0));
    const double cb = true_markov(sys, 2).block(1).norm();
    CHECK((g.real() - sys.d_matrix).norm() <= 10.0 * cb / zmod);
  }
  SUBCASE("poles are rejected") {
    const auto sys = reference_system();
    CHECK_THROWS_AS(transfer_function(sys, Complex(0.3, 0.4)), SingularityError);
  }
}

TEST_CASE("truncated transfer converges to G on the unit circle") {
  const auto sys = generate_system({3, 1, 2}, 0.8, 12);
  const Complex z = std::polar(1.0, 1.3);
  const auto g = transfer_function(sys, z);
  double prev = 1e300;
  for (int T : {5, 10, 20, 40, 80}) {
    const double gap = (truncated_transfer(true_markov(sys, T), z) - g).norm();
    CHECK(gap <= prev);
    prev = gap;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("system validation") {
  auto sys = reference_system();
  CHECK_NOTHROW(sys.validate());
  sys.char_coeffs << 0.0, 1.0;  // roots on the unit circle
  CHECK_THROWS_AS(sys.validate(), DomainError);
  sys = reference_system();
  sys.c_matrix = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(sys.validate(), DomainError);
  CHECK_THROWS_AS(MarkovMatrix(Eigen::MatrixXd::Zero(1, 5), 2), DomainError);
  CHECK_THROWS_AS(MarkovMatrix(Eigen::MatrixXd::Zero(1, 1), 1), DomainError);
}
