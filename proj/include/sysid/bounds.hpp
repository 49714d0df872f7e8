#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sysid/lti.hpp"
#include "sysid/recovery.hpp"

namespace sysid {

// Variances (sigma_*) rather than standard deviations throughout.
struct BoundInputs {
  SystemDims dims;
  int truncation = 0;
  std::int64_t batch_size = 0;
  double rho = 0.0;
  double ell = 1.0;  // ||V^{-1}||_F^2, unit-norm eigenvector columns
  double frob_b = 0.0;
  double frob_c = 0.0;
  double h0_norm = 0.0;
  double sigma_max = 1.0;
  double sigma_min = 1.0;
  double sigma_zeta_max = 0.0;
  double eta = 0.0;
  double omega0_norm = 0.0;  // ||Theta_0 - Theta_T||_F
  // Use n*m for the "n" of the bound formulas; false selects the block order n.
  bool use_state_dim = true;

  int order() const { return use_state_dim ? dims.state_dim() : dims.n; }
  void validate() const;
};

// Above this, ell is reported with a conditioning warning.
inline constexpr double kEllWarnLevel = 1e8;

struct EllResult {
  double ell = 0.0;
  bool ill_conditioned = false;
};

// ||V^{-1}||_F^2 for A = V Lambda V^{-1}. A is K (x) I_m with K the companion
// matrix, so ell = m ||V_K^{-1}||_F^2.
EllResult eigenvector_conditioning(const BrunovskySystem& sys);

// Bound inputs for a ground-truth system and a noise/input configuration.
// omega0_norm is ||Theta_T||_F (SGD started at zero) and eta the Corollary 1 value.
BoundInputs bound_inputs_from_system(const BrunovskySystem& sys, int truncation,
                                     std::int64_t batch_size, double input_variance,
                                     double meas_noise_variance,
                                     const Eigen::VectorXd& initial_state = {});

// E||C A^{T-1} h||^2 cap for the hidden-state contribution.
double truncation_bound(const BoundInputs& in);
// Squared tail ||G(z) - D - sum_{t<T} z^{-t} C A^{t-1} B||^2 cap at modulus |z|.
double transfer_tail_bound(const BoundInputs& in, double z_modulus);
double chi_N_sq(const BoundInputs& in);
double chi_N(const BoundInputs& in);
double contraction_factor(const BoundInputs& in);
double delta_N(const BoundInputs& in);

struct StepSizes {
  double eta_cap = 0.0;
  double eta_star = 0.0;
};
StepSizes step_size_prescription(const BoundInputs& in);

// ||omega_0||^2 cf^tau + Delta_N + chi_N^2 at each tau.
std::vector<double> sgd_bound_curve(const BoundInputs& in, std::span<const std::int64_t> iterations);
// Same with N replaced by t at each point; points with t < 2T are NaN.
std::vector<double> online_sgd_bound_curve(const BoundInputs& in,
                                           std::span<const std::int64_t> iterations);

struct BoundReport {
  double truncation_bound = 0.0;
  double transfer_tail_bound = 0.0;
  double chi_N_sq = 0.0;
  double contraction_factor = 0.0;
  double delta_N = 0.0;
  double eta_cap = 0.0;
  double eta_star = 0.0;
  std::vector<std::string> warnings;
};

BoundReport evaluate_bounds(const BoundInputs& in);

struct LinkageDiagnostics {
  double gamma_min_singular = 0.0;
  double gamma_max_singular = 0.0;
  double linkage_factor = 0.0;  // nm (n + nmp) (T - 1)
};

double linkage_factor(const SystemDims& dims, int truncation);
LinkageDiagnostics recovery_diagnostics(const RecoverySystem& rs);

}  // namespace sysid
