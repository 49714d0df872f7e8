#include "sysid/baseline.hpp"

#include <algorithm>
#include <string>

#include "sysid/errors.hpp"

namespace sysid {

namespace {

int hankel_blocks(const MarkovMatrix& theta, const SystemDims& dims) {
  dims.validate();
  if (theta.output_dim() != dims.p || theta.input_dim() != dims.m) {
    throw DomainError("Markov estimate shape does not match the system dimensions");
  }
  const int T = theta.truncation();
  const int half = T / 2;
  const int nm = dims.state_dim();
  if (half * dims.p < nm || (half - 1) * dims.m < nm) {
    throw PreconditionError("T=" + std::to_string(T) + " is too small for a rank-" +
                            std::to_string(nm) + " Hankel realization");
  }
  return half;
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& mat) {
  return mat.completeOrthogonalDecomposition().pseudoInverse();
}

}  // namespace

int default_hankel_truncation(const SystemDims& dims) {
  const int nm = dims.state_dim();
  int T = std::max(4 * nm, 2 * nm + 2);
  if (T % 2) ++T;
  return T;
}

Eigen::MatrixXd build_hankel(const MarkovMatrix& theta, const SystemDims& dims) {
  const int half = hankel_blocks(theta, dims);
  const int p = dims.p, m = dims.m;
  Eigen::MatrixXd h(half * p, half * m);
  for (int i = 0; i < half; ++i) {
    for (int j = 0; j < half; ++j) h.block(i * p, j * m, p, m) = theta.block(i + j + 1);
  }
  return h;
}

Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                                     int blocks) {
  const auto p = c.rows();
  Eigen::MatrixXd o(blocks * p, a.cols());
  Eigen::MatrixXd row = c;
  for (int k = 0; k < blocks; ++k) {
    o.middleRows(k * p, p) = row;
    row = row * a;
  }
  return o;
}

HankelDecomposition ho_kalman(const MarkovMatrix& theta, const SystemDims& dims,
                              const std::optional<Eigen::MatrixXd>& true_observability) {
  const int half = hankel_blocks(theta, dims);
  const int p = dims.p, m = dims.m, nm = dims.state_dim();

  HankelDecomposition hk;
  hk.hankel = build_hankel(theta, dims);
  const Eigen::MatrixXd h_minus = hk.hankel.leftCols((half - 1) * m);
  const Eigen::MatrixXd h_plus = hk.hankel.rightCols((half - 1) * m);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h_minus, Eigen::ComputeThinU | Eigen::ComputeThinV);
  hk.singular_values = svd.singularValues();
  if (!(hk.singular_values(nm - 1) > 1e-13 * hk.singular_values(0))) {
    throw RankError("Hankel matrix has rank below " + std::to_string(nm) +
                    "; T too small or wrong order");
  }
  const Eigen::VectorXd root = hk.singular_values.head(nm).cwiseSqrt();
  hk.observability = svd.matrixU().leftCols(nm) * root.asDiagonal();
  hk.controllability = root.asDiagonal() * svd.matrixV().leftCols(nm).transpose();

  hk.a_hat = pinv(hk.observability) * h_plus * pinv(hk.controllability);
  hk.c_hat = hk.observability.topRows(p);
  hk.b_hat = hk.controllability.leftCols(m);
  hk.d_hat = theta.block(0);
  hk.alignment = Eigen::MatrixXd::Identity(nm, nm);

  if (true_observability) {
    if (true_observability->rows() != hk.observability.rows() ||
        true_observability->cols() != nm) {
      throw DomainError("true observability matrix has the wrong shape");
    }
    hk.alignment = pinv(hk.observability) * *true_observability;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(hk.alignment);
    if (!lu.isInvertible()) throw SingularityError("alignment transform is singular");
    const Eigen::MatrixXd inv = lu.inverse();
    hk.a_hat = inv * hk.a_hat * hk.alignment;
    hk.b_hat = inv * hk.b_hat;
    hk.c_hat = hk.c_hat * hk.alignment;
    hk.aligned = true;
  }
  return hk;
}

MarkovMatrix realized_markov(const HankelDecomposition& hk, int truncation) {
  const auto p = hk.c_hat.rows();
  const int m = static_cast<int>(hk.b_hat.cols());
  Eigen::MatrixXd blocks(p, static_cast<Eigen::Index>(m) * truncation);
  blocks.leftCols(m) = hk.d_hat;
  Eigen::MatrixXd ca = hk.c_hat;
  for (int k = 1; k < truncation; ++k) {
    blocks.middleCols(k * m, m) = ca * hk.b_hat;
    ca = ca * hk.a_hat;
  }
  return MarkovMatrix(std::move(blocks), m);
}

}  // namespace sysid
