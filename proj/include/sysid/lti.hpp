#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sysid {

using Complex = std::complex<double>;

// Block order n, input dimension m, output dimension p. In Brunovsky form the
// hidden state has dimension n*m.
struct SystemDims {
  int n = 1;
  int m = 1;
  int p = 1;

  int state_dim() const { return n * m; }
  // Number of unknown scalars recovered from the transfer function: {a_i} and C.
  int num_unknowns() const { return n + n * m * p; }
  void validate() const;
  bool operator==(const SystemDims&) const = default;
};

// Ground-truth system in Brunovsky canonical form. A and B are implied by the
// characteristic coefficients; see assemble_state_matrices().
struct BrunovskySystem {
  SystemDims dims;
  Eigen::VectorXd char_coeffs;  // a_1..a_n of z^n + a_1 z^{n-1} + ... + a_n
  Eigen::MatrixXd c_matrix;     // p x (n*m)
  Eigen::MatrixXd d_matrix;     // p x m

  // Throws DomainError on shape mismatch, non-finite entries or rho(A) >= 1.
  void validate() const;
};

struct StateMatrices {
  Eigen::MatrixXd a;  // (n*m) x (n*m)
  Eigen::MatrixXd b;  // (n*m) x m
};

// Time runs along columns: inputs.col(k) is u_{k+1} in 1-based time.
struct Trajectory {
  Eigen::MatrixXd inputs;   // m x N
  Eigen::MatrixXd outputs;  // p x N
  // State at each sample, hidden_states.col(k) pairs with inputs.col(k).
  std::optional<Eigen::MatrixXd> hidden_states;
  Eigen::VectorXd input_variances;       // m
  Eigen::VectorXd meas_noise_variances;  // p
  Eigen::VectorXd initial_state;         // n*m

  int length() const { return static_cast<int>(inputs.cols()); }
  int input_dim() const { return static_cast<int>(inputs.rows()); }
  int output_dim() const { return static_cast<int>(outputs.rows()); }
};

// p x (m*T) matrix [D, CB, CAB, ..., C A^{T-2} B] made of T contiguous p x m blocks.
class MarkovMatrix {
 public:
  MarkovMatrix() = default;
  MarkovMatrix(Eigen::MatrixXd blocks, int input_dim);
  static MarkovMatrix Zero(int p, int m, int truncation);

  int truncation() const { return truncation_; }
  int input_dim() const { return m_; }
  int output_dim() const { return static_cast<int>(blocks_.rows()); }

  auto block(int k) const { return blocks_.middleCols(k * m_, m_); }
  const Eigen::MatrixXd& matrix() const { return blocks_; }
  Eigen::MatrixXd& matrix() { return blocks_; }

 private:
  Eigen::MatrixXd blocks_;
  int m_ = 0;
  int truncation_ = 0;
};

struct SimulationOptions {
  int n_steps = 0;
  Eigen::VectorXd input_variances;       // size m
  Eigen::VectorXd meas_noise_variances;  // size p
  std::optional<Eigen::VectorXd> process_noise_variances;  // size n*m
  std::optional<Eigen::VectorXd> initial_state;            // zero when unset
  std::uint64_t seed = 0;
  bool store_states = false;
};

// Polynomial coefficients {a_1..a_n} of prod_k (z - r_k). Roots must come in
// conjugate pairs; throws DomainError when the product is not real.
Eigen::VectorXd char_coeffs_from_roots(std::span<const Complex> roots);

// Roots of z^n + a_1 z^{n-1} + ... + a_n (eigenvalues of the n x n companion matrix).
Eigen::VectorXcd characteristic_roots(const Eigen::VectorXd& char_coeffs);

double spectral_radius(const BrunovskySystem& sys);

// Random stable system: conjugate root pairs with modulus in (0, rho_max] and
// phase in (0, pi), one extra real root when n is odd; C, D standard normal.
BrunovskySystem generate_system(const SystemDims& dims, double rho_max, std::uint64_t seed);

StateMatrices assemble_state_matrices(const BrunovskySystem& sys);

// h_{t+1} = A h_t + B u_t using the companion block structure, O(n*m).
Eigen::VectorXd advance_state(const BrunovskySystem& sys, const Eigen::VectorXd& h,
                              const Eigen::VectorXd& u);

// Gaussian-input simulation of y_t = C h_t + D u_t + zeta_t.
Trajectory simulate(const BrunovskySystem& sys, const SimulationOptions& opts);

// Response to a prescribed input sequence (m x N). Measurement noise is drawn
// only when meas_noise_variances is nonzero.
Trajectory simulate_inputs(const BrunovskySystem& sys, const Eigen::MatrixXd& inputs,
                           const Eigen::VectorXd& initial_state,
                           const Eigen::VectorXd& meas_noise_variances, std::uint64_t seed,
                           bool store_states = false);

MarkovMatrix true_markov(const BrunovskySystem& sys, int truncation);

// G(z) = C (zI - A)^{-1} B + D.
Eigen::MatrixXcd transfer_function(const BrunovskySystem& sys, Complex z);

// D + sum_{t=1}^{T-1} z^{-t} (block t of theta).
Eigen::MatrixXcd truncated_transfer(const MarkovMatrix& theta, Complex z);

}  // namespace sysid
