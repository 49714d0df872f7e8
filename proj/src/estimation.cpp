#include "sysid/estimation.hpp"

#include <cmath>
#include <string>

#include "sysid/errors.hpp"

namespace sysid {

namespace {

// Fills x with [u_t; ...; u_{t-T+1}] for 1-based t >= T.
void fill_regressor(const Eigen::MatrixXd& inputs, int t, int truncation, Eigen::VectorXd& x) {
  const auto m = inputs.rows();
  for (int k = 0; k < truncation; ++k) x.segment(k * m, m) = inputs.col(t - 1 - k);
}

int require_batch_size(int n_samples, int truncation) {
  if (truncation < 2) throw DomainError("truncation T must be >= 2");
  if (n_samples < 2 * truncation) {
    throw PreconditionError("batch size N=" + std::to_string(n_samples) +
                            " must be at least 2T=" + std::to_string(2 * truncation));
  }
  return truncation;
}

double max_output_norm(const Trajectory& data) {
  return data.outputs.size() == 0 ? 0.0 : data.outputs.colwise().norm().maxCoeff();
}

}  // namespace

RegressorWindow build_regressor(const Eigen::MatrixXd& inputs, int t, int truncation) {
  if (truncation < 1) throw DomainError("truncation must be positive");
  if (t < 1 || t > inputs.cols()) {
    throw DomainError("time index " + std::to_string(t) + " outside [1, " +
                      std::to_string(inputs.cols()) + "]");
  }
  const auto m = inputs.rows();
  RegressorWindow w{Eigen::VectorXd::Zero(m * truncation), t};
  const int available = std::min(t, truncation);
  for (int k = 0; k < available; ++k) w.x.segment(k * m, m) = inputs.col(t - 1 - k);
  return w;
}

double step_size_cap(int m, int truncation, double max_input_variance) {
  if (!(max_input_variance > 0.0)) throw DomainError("max input variance must be positive");
  return 1.0 / (static_cast<double>(m) * truncation * max_input_variance);
}

double default_step_size(int m, int truncation, double max_input_variance) {
  return 0.5 * step_size_cap(m, truncation, max_input_variance);
}

SgdState SgdState::unguarded(int p, int m, int truncation, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("step size must be positive");
  SgdState s;
  s.theta_hat = MarkovMatrix::Zero(p, m, truncation);
  s.eta = eta;
  return s;
}

SgdState SgdState::guarded(int p, int m, int truncation, double eta, double max_input_variance) {
  const double cap = step_size_cap(m, truncation, max_input_variance);
  if (eta > cap) {
    throw DomainError("step size " + std::to_string(eta) + " exceeds cap " + std::to_string(cap));
  }
  return unguarded(p, m, truncation, eta);
}

double divergence_threshold_for(double data_scale) {
  return kDivergenceFactor * (1.0 + data_scale);
}

void apply_sgd_step(SgdState& state, const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y) {
  Eigen::MatrixXd& theta = state.theta_hat.matrix();
  if (x.size() != theta.cols() || y.size() != theta.rows()) {
    throw DomainError("SGD step: regressor or output has the wrong dimension");
  }
  const Eigen::VectorXd residual = theta * x - y;
  theta.noalias() -= (state.eta * residual) * x.transpose();
  ++state.iteration;
  const double norm = theta.norm();
  if (!std::isfinite(norm) || norm > state.divergence_threshold) {
    throw DivergenceError("SGD diverged at iteration " + std::to_string(state.iteration) +
                          " (||Theta||_F = " + std::to_string(norm) + "); step size too large");
  }
}

SgdState sgd_step(SgdState state, const RegressorWindow& x, const Eigen::VectorXd& y) {
  apply_sgd_step(state, x.x, y);
  return state;
}

OfflineSgd::OfflineSgd(const Trajectory& data, int truncation, double eta, std::uint64_t seed)
    : data_(data),
      truncation_(require_batch_size(data.length(), truncation)),
      state_(SgdState::unguarded(data.output_dim(), data.input_dim(), truncation, eta)),
      rng_(seed),
      pick_(truncation, data.length()),
      x_(static_cast<Eigen::Index>(data.input_dim()) * truncation) {
  state_.rng_seed = seed;
  state_.divergence_threshold = divergence_threshold_for(max_output_norm(data));
}

void OfflineSgd::run(std::int64_t iterations) {
  for (std::int64_t i = 0; i < iterations; ++i) {
    const int t = pick_(rng_);
    fill_regressor(data_.inputs, t, truncation_, x_);
    apply_sgd_step(state_, x_, data_.outputs.col(t - 1));
  }
}

SgdState offline_sgd(const Trajectory& data, int truncation, double eta, std::int64_t n_iters,
                     std::uint64_t seed) {
  OfflineSgd sgd(data, truncation, eta, seed);
  sgd.run(n_iters);
  return sgd.state();
}

InputWindow::InputWindow(int m, int truncation)
    : x_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m) * truncation)),
      m_(m),
      truncation_(truncation) {
  if (m < 1 || truncation < 1) throw DomainError("input window needs m >= 1 and T >= 1");
}

void InputWindow::push(const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (u.size() != m_) throw DomainError("input has the wrong dimension");
  const auto keep = x_.size() - m_;
  // Shift older inputs down one block; the oldest falls off the end.
  for (Eigen::Index i = keep - 1; i >= 0; --i) x_(i + m_) = x_(i);
  x_.head(m_) = u;
  ++count_;
}

bool online_sgd_feed(SgdState& state, InputWindow& window,
                     const Eigen::Ref<const Eigen::VectorXd>& u,
                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  window.push(u);
  if (!window.full()) return false;
  apply_sgd_step(state, window.regressor(), y);
  return true;
}

OnlineSgd::OnlineSgd(int p, int m, int truncation, double eta)
    : OnlineSgd(SgdState::unguarded(p, m, truncation, eta)) {}

OnlineSgd::OnlineSgd(SgdState initial)
    : state_(std::move(initial)),
      window_(state_.theta_hat.input_dim(), state_.theta_hat.truncation()) {
  threshold_set_ = std::isfinite(state_.divergence_threshold);
}

bool OnlineSgd::feed(const Eigen::Ref<const Eigen::VectorXd>& u,
                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (!threshold_set_) {
    state_.divergence_threshold = divergence_threshold_for(y.norm());
    threshold_set_ = true;
  }
  return online_sgd_feed(state_, window_, u, y);
}

std::size_t OnlineSgd::stored_scalars() const {
  return static_cast<std::size_t>(state_.theta_hat.matrix().size() + window_.regressor().size());
}

NormalEquations::NormalEquations(int p, int m, int truncation)
    : scatter_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m) * truncation,
                                     static_cast<Eigen::Index>(m) * truncation)),
      cross_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m) * truncation, p)),
      m_(m),
      truncation_(truncation) {}

void NormalEquations::add(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != scatter_.rows() || y.size() != cross_.cols()) {
    throw DomainError("normal equations: regressor or output has the wrong dimension");
  }
  scatter_.noalias() += x * x.transpose();
  cross_.noalias() += x * y.transpose();
  ++count_;
}

MarkovMatrix NormalEquations::solve() const {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scatter_);
  if (count_ == 0 || qr.rank() < scatter_.cols()) {
    throw RankError("input scatter matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(scatter_.cols()) + ")");
  }
  Eigen::MatrixXd theta_t = qr.solve(cross_);
  return MarkovMatrix(theta_t.transpose(), m_);
}

MarkovMatrix least_squares_markov(const Trajectory& data, int truncation) {
  require_batch_size(data.length(), truncation);
  const int m = data.input_dim();
  const int rows = data.length() - truncation + 1;
  Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(m) * truncation);
  Eigen::MatrixXd targets(rows, data.output_dim());
  Eigen::VectorXd x(design.cols());
  for (int r = 0; r < rows; ++r) {
    const int t = truncation + r;
    fill_regressor(data.inputs, t, truncation, x);
    design.row(r) = x.transpose();
    targets.row(r) = data.outputs.col(t - 1).transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) {
    throw RankError("regressor matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(design.cols()) + "); inputs are degenerate");
  }
  Eigen::MatrixXd theta_t = qr.solve(targets);
  return MarkovMatrix(theta_t.transpose(), m);
}

Eigen::MatrixXd least_squares_gradient(const Trajectory& data, const MarkovMatrix& theta) {
  const int truncation = theta.truncation();
  require_batch_size(data.length(), truncation);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(theta.output_dim(), theta.matrix().cols());
  Eigen::VectorXd x(theta.matrix().cols());
  for (int t = truncation; t <= data.length(); ++t) {
    fill_regressor(data.inputs, t, truncation, x);
    grad.noalias() += (theta.matrix() * x - data.outputs.col(t - 1)) * x.transpose();
  }
  return grad / static_cast<double>(data.length() - truncation + 1);
}

double markov_error(const MarkovMatrix& est, const MarkovMatrix& truth) {
  if (est.matrix().rows() != truth.matrix().rows() ||
      est.matrix().cols() != truth.matrix().cols()) {
    throw DomainError("Markov matrices have different shapes");
  }
  return (est.matrix() - truth.matrix()).norm();
}

}  // namespace sysid
