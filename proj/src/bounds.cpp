#include "sysid/bounds.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "sysid/errors.hpp"
#include "sysid/estimation.hpp"

namespace sysid {

namespace {

double sq(double x) { return x * x; }

void require_stable(const BoundInputs& in) {
  if (!(in.rho >= 0.0) || !(in.rho < 1.0)) {
    throw DomainError("bounds need 0 <= rho < 1 (rho=" + std::to_string(in.rho) + ")");
  }
}

void require_batch(const BoundInputs& in, std::int64_t n_samples) {
  if (n_samples < 2 * static_cast<std::int64_t>(in.truncation)) {
    throw DomainError("chi_N needs N >= 2T (N=" + std::to_string(n_samples) +
                      ", T=" + std::to_string(in.truncation) + ")");
  }
}

// Hidden-state bracket of the truncation bound.
double gamma_term(const BoundInputs& in) {
  const double n = in.order();
  const double m = in.dims.m;
  const double r2 = sq(in.rho);
  const double b2 = sq(in.frob_b);
  return n * n * in.ell * r2 * sq(in.h0_norm) +
         n * n * in.ell * m * in.sigma_max * r2 * b2 / (1.0 - r2) + m * in.sigma_max * b2;
}

double iota_term(const BoundInputs& in) {
  return sq(in.h0_norm) + in.dims.m * in.sigma_max * sq(in.frob_b) / (1.0 - sq(in.rho));
}

double chi_sq_at(const BoundInputs& in, std::int64_t n_samples) {
  in.validate();
  require_batch(in, n_samples);
  const double n = in.order();
  const double m = in.dims.m;
  const double p = in.dims.p;
  const double T = in.truncation;
  const double c2 = sq(in.frob_c);
  const double denom = static_cast<double>(n_samples - in.truncation + 1) * sq(in.sigma_min);
  const double t1 = n * n * in.ell * c2 * std::pow(in.rho, 2.0 * (T - 1)) * m * m * m * T * T *
                    in.sigma_max * in.sigma_max * in.sigma_max * sq(in.frob_b);
  const double t2 = p * m * m * T * T * in.sigma_zeta_max * in.sigma_max;
  const double t3 = std::pow(n, 4) * sq(in.ell) * m * m * T * T * std::pow(in.rho, 2.0 * T) * c2 *
                    sq(in.sigma_max) * iota_term(in);
  return (t1 + t2 + t3) / denom;
}

void require_step(const BoundInputs& in) {
  const StepSizes s = step_size_prescription(in);
  if (!(in.eta > 0.0) || in.eta > s.eta_cap) {
    throw DomainError("step size " + std::to_string(in.eta) + " outside (0, " +
                      std::to_string(s.eta_cap) + "]");
  }
}

double delta_at(const BoundInputs& in, double chi_sq) {
  const double n = in.order();
  const double m = in.dims.m;
  const double p = in.dims.p;
  const double T = in.truncation;
  const double eta = in.eta;
  const double cf = contraction_factor(in);
  const double emt = eta * m * T;
  const double first = 2.0 * sq(emt) * sq(in.sigma_max) * chi_sq +
                       (emt * in.sigma_max + sq(emt) * sq(in.sigma_max)) *
                           (chi_sq + sq(in.omega0_norm));
  const double second = 2.0 * n * n * eta * eta * m * T * in.sigma_max * in.ell *
                            std::pow(in.rho, 2.0 * (T - 1)) * gamma_term(in) * sq(in.frob_c) +
                        2.0 * eta * eta * p * m * T * in.sigma_max * in.sigma_zeta_max;
  return (first + second) / cf;
}

}  // namespace

void BoundInputs::validate() const {
  dims.validate();
  require_stable(*this);
  if (truncation < 1) throw DomainError("truncation must be positive");
  if (!(sigma_min > 0.0) || sigma_max < sigma_min) {
    throw DomainError("input variances need 0 < sigma_min <= sigma_max");
  }
  if (ell < 0.0 || frob_b < 0.0 || frob_c < 0.0 || h0_norm < 0.0 || sigma_zeta_max < 0.0 ||
      omega0_norm < 0.0) {
    throw DomainError("bound inputs must be nonnegative");
  }
}

EllResult eigenvector_conditioning(const BrunovskySystem& sys) {
  const int n = sys.dims.n;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) comp(i, i + 1) = 1.0;
  for (int i = 0; i < n; ++i) comp(n - 1, i) = -sys.char_coeffs(n - 1 - i);

  Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
  if (es.info() != Eigen::Success) throw SingularityError("eigendecomposition failed");
  Eigen::MatrixXcd v = es.eigenvectors();
  v.colwise().normalize();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(v);
  EllResult out;
  if (!lu.isInvertible()) {
    out.ell = std::numeric_limits<double>::infinity();
    out.ill_conditioned = true;
    return out;
  }
  out.ell = sys.dims.m * lu.inverse().squaredNorm();
  out.ill_conditioned = !(out.ell <= kEllWarnLevel);
  return out;
}

BoundInputs bound_inputs_from_system(const BrunovskySystem& sys, int truncation,
                                     std::int64_t batch_size, double input_variance,
                                     double meas_noise_variance,
                                     const Eigen::VectorXd& initial_state) {
  sys.validate();
  BoundInputs in;
  in.dims = sys.dims;
  in.truncation = truncation;
  in.batch_size = batch_size;
  in.rho = spectral_radius(sys);
  in.ell = eigenvector_conditioning(sys).ell;
  in.frob_b = std::sqrt(static_cast<double>(sys.dims.m));
  in.frob_c = sys.c_matrix.norm();
  in.h0_norm = initial_state.size() == 0 ? 0.0 : initial_state.norm();
  in.sigma_max = input_variance;
  in.sigma_min = input_variance;
  in.sigma_zeta_max = meas_noise_variance;
  in.eta = default_step_size(sys.dims.m, truncation, input_variance);
  in.omega0_norm = true_markov(sys, truncation).matrix().norm();
  return in;
}

double truncation_bound(const BoundInputs& in) {
  in.validate();
  const double n = in.order();
  return n * n * in.ell * sq(in.frob_c) * std::pow(in.rho, 2.0 * (in.truncation - 1)) *
         gamma_term(in);
}

double transfer_tail_bound(const BoundInputs& in, double z_modulus) {
  in.validate();
  if (!(in.rho < z_modulus)) {
    throw DomainError("transfer tail bound needs rho < |z|");
  }
  const double n = in.order();
  return n * n * in.ell * sq(in.frob_c) * sq(in.frob_b) *
         std::pow(in.rho, 2.0 * (in.truncation - 1)) / (1.0 - sq(in.rho / z_modulus));
}

double chi_N_sq(const BoundInputs& in) { return chi_sq_at(in, in.batch_size); }

double chi_N(const BoundInputs& in) { return std::sqrt(chi_N_sq(in)); }

double contraction_factor(const BoundInputs& in) {
  const double emt = in.eta * in.dims.m * in.truncation;
  return 1.0 - 2.0 * emt * in.sigma_min + 2.0 * sq(emt) * in.sigma_min * in.sigma_max;
}

double delta_N(const BoundInputs& in) {
  require_step(in);
  return delta_at(in, chi_N_sq(in));
}

StepSizes step_size_prescription(const BoundInputs& in) {
  return {step_size_cap(in.dims.m, in.truncation, in.sigma_max),
          default_step_size(in.dims.m, in.truncation, in.sigma_max)};
}

std::vector<double> sgd_bound_curve(const BoundInputs& in,
                                    std::span<const std::int64_t> iterations) {
  require_step(in);
  const double chi_sq = chi_N_sq(in);
  const double floor = delta_at(in, chi_sq) + chi_sq;
  const double cf = contraction_factor(in);
  const double w0 = sq(in.omega0_norm);
  std::vector<double> out;
  out.reserve(iterations.size());
  for (const auto tau : iterations) {
    if (tau < 0) throw DomainError("iteration must be nonnegative");
    out.push_back(w0 * std::pow(cf, static_cast<double>(tau)) + floor);
  }
  return out;
}

std::vector<double> online_sgd_bound_curve(const BoundInputs& in,
                                           std::span<const std::int64_t> iterations) {
  require_step(in);
  const double cf = contraction_factor(in);
  const double w0 = sq(in.omega0_norm);
  std::vector<double> out;
  out.reserve(iterations.size());
  for (const auto t : iterations) {
    if (t < 2 * static_cast<std::int64_t>(in.truncation)) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double chi_sq = chi_sq_at(in, t);
    out.push_back(w0 * std::pow(cf, static_cast<double>(t)) + delta_at(in, chi_sq) + chi_sq);
  }
  return out;
}

BoundReport evaluate_bounds(const BoundInputs& in) {
  in.validate();
  BoundReport r;
  const StepSizes s = step_size_prescription(in);
  r.eta_cap = s.eta_cap;
  r.eta_star = s.eta_star;
  r.truncation_bound = truncation_bound(in);
  r.transfer_tail_bound = transfer_tail_bound(in, 1.0);
  r.chi_N_sq = chi_N_sq(in);
  r.contraction_factor = contraction_factor(in);
  if (in.eta > 0.0 && in.eta <= s.eta_cap) {
    r.delta_N = delta_at(in, r.chi_N_sq);
  } else {
    r.delta_N = std::numeric_limits<double>::quiet_NaN();
    r.warnings.push_back("step size outside (0, eta_cap]; Delta_N undefined");
  }
  if (!(in.ell <= kEllWarnLevel)) {
    r.warnings.push_back("eigenvector matrix is ill conditioned (ell=" + std::to_string(in.ell) +
                         ")");
  }
  return r;
}

double linkage_factor(const SystemDims& dims, int truncation) {
  const double nm = dims.state_dim();
  return nm * dims.num_unknowns() * (truncation - 1);
}

LinkageDiagnostics recovery_diagnostics(const RecoverySystem& rs) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(rs.gamma);
  const auto& s = svd.singularValues();
  LinkageDiagnostics d;
  d.gamma_max_singular = s.size() ? s(0) : 0.0;
  d.gamma_min_singular = s.size() ? s(s.size() - 1) : 0.0;
  d.linkage_factor = linkage_factor(rs.dims, rs.truncation);
  return d;
}

}  // namespace sysid
