#pragma once

#include <optional>

#include <Eigen/Dense>

#include "sysid/lti.hpp"

namespace sysid {

struct HankelDecomposition {
  Eigen::MatrixXd hankel;          // (T/2) p x (T/2) m
  Eigen::MatrixXd observability;   // (T/2) p x nm
  Eigen::MatrixXd controllability; // nm x (T/2 - 1) m
  Eigen::VectorXd singular_values; // of the shifted-out Hankel H^-
  Eigen::MatrixXd a_hat;
  Eigen::MatrixXd b_hat;
  Eigen::MatrixXd c_hat;
  Eigen::MatrixXd d_hat;
  Eigen::MatrixXd alignment;       // identity unless aligned
  bool aligned = false;
};

// Smallest even T with T >= max(4nm, 2nm + 2).
int default_hankel_truncation(const SystemDims& dims);

// H[i][j] = Markov block i + j + 1 for i, j < floor(T/2).
Eigen::MatrixXd build_hankel(const MarkovMatrix& theta, const SystemDims& dims);

// [C; CA; ...; C A^{blocks-1}].
Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                                     int blocks);

// Rank-nm realization from the Hankel matrix. When the true observability
// matrix (T/2 block rows) is given, the estimate is brought into its basis by
// the least-squares similarity transform O_hat^+ O_true.
HankelDecomposition ho_kalman(const MarkovMatrix& theta, const SystemDims& dims,
                              const std::optional<Eigen::MatrixXd>& true_observability = {});

// D, CB, CAB, ... of the realized system.
MarkovMatrix realized_markov(const HankelDecomposition& hk, int truncation);

}  // namespace sysid
