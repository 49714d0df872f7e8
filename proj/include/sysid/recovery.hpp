#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sysid/lti.hpp"

namespace sysid {

// Matching frequencies on the unit circle. The base rule is
// z_k = exp(j pi (k-1) / K), K = n + p n m.
struct FrequencyGrid {
  std::vector<Complex> points;

  int size() const { return static_cast<int>(points.size()); }
};

// Relative level below which ||Theta vartheta(z)||_F counts as a zero.
inline constexpr double kZeroScreenRelTol = 1e-10;
inline constexpr int kMaxGridRetries = 5;

// Unscreened grid of K points following the base rule.
FrequencyGrid unit_circle_grid(int num_points);

// K = n + p n m points; a point where Theta vartheta vanishes is rotated by
// pi / (7K) and rescreened, at most kMaxGridRetries times.
FrequencyGrid make_frequency_grid(const SystemDims& dims, const MarkovMatrix& theta_hat);

// mT x m block column [0, z^{-1} I, ..., z^{-T+1} I]'.
Eigen::MatrixXcd vartheta(Complex z, int m, int truncation);

// theta * vartheta(z) = sum_{t=1}^{T-1} z^{-t} (block t of theta), p x m.
Eigen::MatrixXcd theta_vartheta(const MarkovMatrix& theta, Complex z);

// Gamma rho = kappa with rho = [a_1..a_n, C row-major]. Rows are grouped by
// (input i, output j) pairs, K rows each, in order i-major.
struct RecoverySystem {
  Eigen::MatrixXcd gamma;  // (m p K) x (n + n m p)
  Eigen::VectorXcd kappa;  // m p K
  SystemDims dims;
  int truncation = 0;
  Eigen::MatrixXd d_estimate;  // block 0 of the Markov estimate
};

// Per-entry system R_ij [a; c_{j, i+vm}] = r_ij over all grid points.
// i in [0, m), j in [0, p); columns are a_1..a_n then c_{j,i}, c_{j,i+m}, ...
struct RecoveryBlock {
  Eigen::MatrixXcd coeffs;  // K x 2n
  Eigen::VectorXcd rhs;     // K
};

RecoveryBlock recovery_block(const MarkovMatrix& theta_hat, const SystemDims& dims,
                             const FrequencyGrid& grid, int i, int j);

// Requires T >= n + 1. The transfer-function tail beyond T is dropped.
RecoverySystem build_recovery_system(const MarkovMatrix& theta_hat, const SystemDims& dims,
                                     const FrequencyGrid& grid);

struct RecoveredParams {
  Eigen::VectorXd char_coeffs;
  Eigen::MatrixXd c_matrix;
  Eigen::MatrixXd d_matrix;
  double imag_residual = 0.0;  // max |Im| of the complex solution
  double ls_residual = 0.0;    // ||Gamma rho - kappa||_2
  bool imag_warning = false;   // imag_residual above RecoveryOptions::imag_warn_threshold
};

struct RecoveryOptions {
  double imag_warn_threshold = 1e-6;
};

// Complex least squares by column-pivoted QR; real parts are returned.
RecoveredParams solve_recovery(const RecoverySystem& rs, const RecoveryOptions& opts = {});

// make_frequency_grid + build_recovery_system + solve_recovery.
RecoveredParams recover_from_markov(const MarkovMatrix& theta_hat, const SystemDims& dims,
                                    const RecoveryOptions& opts = {});

// Recovered parameters as a (possibly unstable) Brunovsky system, for assembling A.
BrunovskySystem as_system(const RecoveredParams& params, const SystemDims& dims);

struct CheckpointSchedule {
  std::int64_t every = 100;
  // When non-empty, overrides `every`.
  std::vector<std::int64_t> points;

  bool includes(std::int64_t iteration) const;
  // Powers of two from `first` up to `last`.
  static CheckpointSchedule powers_of_two(std::int64_t first, std::int64_t last);
};

struct RecoveryCheckpoint {
  std::int64_t iteration = 0;
  MarkovMatrix theta_hat;
  std::optional<RecoveredParams> params;
  std::string failure;  // set when an intermediate solve was skipped
};

struct CombinedOptions {
  CheckpointSchedule schedule;
  RecoveryOptions recovery;
};

// Online SGD with recovery solves at checkpoints. Iteration counts SGD updates,
// which start once T inputs have arrived. Intermediate checkpoints that cannot
// be solved are recorded with a failure message; the final one throws.
std::vector<RecoveryCheckpoint> run_online_combined(const Trajectory& stream,
                                                    const SystemDims& dims, int truncation,
                                                    double eta, const CombinedOptions& opts = {});

// Offline SGD on a stored batch with recovery solves at checkpoints.
std::vector<RecoveryCheckpoint> run_offline_combined(const Trajectory& batch,
                                                     const SystemDims& dims, int truncation,
                                                     double eta, std::int64_t n_iters,
                                                     std::uint64_t seed,
                                                     const CombinedOptions& opts = {});

// Running normal equations over the stream; at checkpoints (t >= 2T) the
// least-squares Markov estimate is solved and recovered. Iteration is t.
std::vector<RecoveryCheckpoint> run_online_pseudoinverse(const Trajectory& stream,
                                                         const SystemDims& dims, int truncation,
                                                         const CombinedOptions& opts = {});

}  // namespace sysid
