#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "sysid/lti.hpp"

namespace sysid {

// x_t = [u_t; u_{t-1}; ...; u_{t-T+1}], zero padded when t < T. t is 1-based.
struct RegressorWindow {
  Eigen::VectorXd x;
  int time_index = 0;
};

RegressorWindow build_regressor(const Eigen::MatrixXd& inputs, int t, int truncation);

// Largest step size admitted by the SGD convergence theorem: 1 / (m T max sigma^2).
double step_size_cap(int m, int truncation, double max_input_variance);
// Fastest-rate step size, half the cap.
double default_step_size(int m, int truncation, double max_input_variance);

struct SgdState {
  MarkovMatrix theta_hat;
  double eta = 0.0;
  std::int64_t iteration = 0;
  std::uint64_t rng_seed = 0;
  // Exceeding this Frobenius norm raises DivergenceError.
  double divergence_threshold = std::numeric_limits<double>::infinity();

  // Theta_0 = 0. Accepts any eta > 0; used for step-size studies.
  static SgdState unguarded(int p, int m, int truncation, double eta);
  // As unguarded() but requires eta <= step_size_cap(m, T, max_input_variance).
  static SgdState guarded(int p, int m, int truncation, double eta, double max_input_variance);
};

// Multiplier on the data scale in the divergence threshold.
inline constexpr double kDivergenceFactor = 1e8;
double divergence_threshold_for(double data_scale);

// Theta <- Theta - eta (Theta x - y) x'. In place, O(p m T).
void apply_sgd_step(SgdState& state, const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y);
SgdState sgd_step(SgdState state, const RegressorWindow& x, const Eigen::VectorXd& y);

// Offline SGD over a stored batch: each iteration samples t uniformly from {T, ..., N}.
class OfflineSgd {
 public:
  OfflineSgd(const Trajectory& data, int truncation, double eta, std::uint64_t seed);

  void run(std::int64_t iterations);
  const SgdState& state() const { return state_; }
  int truncation() const { return truncation_; }

 private:
  const Trajectory& data_;
  int truncation_;
  SgdState state_;
  std::mt19937_64 rng_;
  std::uniform_int_distribution<int> pick_;
  Eigen::VectorXd x_;
};

SgdState offline_sgd(const Trajectory& data, int truncation, double eta, std::int64_t n_iters,
                     std::uint64_t seed);

// The most recent T inputs, stored directly in regressor layout. O(m T) memory.
class InputWindow {
 public:
  InputWindow(int m, int truncation);

  void push(const Eigen::Ref<const Eigen::VectorXd>& u);
  const Eigen::VectorXd& regressor() const { return x_; }
  std::int64_t count() const { return count_; }
  bool full() const { return count_ >= truncation_; }
  int truncation() const { return truncation_; }

 private:
  Eigen::VectorXd x_;
  int m_;
  int truncation_;
  std::int64_t count_ = 0;
};

// Consume one arriving pair. The SGD step is taken once the window is full
// (t >= T); returns whether a step was taken.
bool online_sgd_feed(SgdState& state, InputWindow& window,
                     const Eigen::Ref<const Eigen::VectorXd>& u,
                     const Eigen::Ref<const Eigen::VectorXd>& y);

class OnlineSgd {
 public:
  OnlineSgd(int p, int m, int truncation, double eta);
  explicit OnlineSgd(SgdState initial);

  bool feed(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& y);
  const SgdState& state() const { return state_; }
  std::int64_t pairs_seen() const { return window_.count(); }
  // Doubles held by the estimator: Theta plus the input window.
  std::size_t stored_scalars() const;

 private:
  SgdState state_;
  InputWindow window_;
  bool threshold_set_ = false;
};

// Running sums sum x x' and sum x y' over t >= T.
class NormalEquations {
 public:
  NormalEquations(int p, int m, int truncation);

  void add(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);
  std::int64_t count() const { return count_; }
  const Eigen::MatrixXd& scatter() const { return scatter_; }
  const Eigen::MatrixXd& cross() const { return cross_; }
  // Throws RankError when the scatter matrix is singular.
  MarkovMatrix solve() const;

 private:
  Eigen::MatrixXd scatter_;  // mT x mT
  Eigen::MatrixXd cross_;    // mT x p
  int m_;
  int truncation_;
  std::int64_t count_ = 0;
};

// Minimizer of (1/2N) sum_{t=T}^{N} ||y_t - Theta x_t||^2 via column-pivoted QR.
MarkovMatrix least_squares_markov(const Trajectory& data, int truncation);

// Gradient of the least-squares objective above at theta.
Eigen::MatrixXd least_squares_gradient(const Trajectory& data, const MarkovMatrix& theta);

double markov_error(const MarkovMatrix& est, const MarkovMatrix& truth);

}  // namespace sysid
