#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include "robust_coords/core_types.hpp"

namespace robust_coords {

template <typename Scalar>
struct SvdFactors {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> u;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> singular_values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> v;
};

/// Full SVD with nonincreasing singular values; each column of U has its first
/// entry of magnitude above 1e-12 positive (V flipped with it).
template <typename Derived>
SvdFactors<typename Derived::Scalar> sorted_svd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::JacobiSVD<Matrix> svd(m.eval(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdFactors<Scalar> out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  const Index rank_cols = std::min(out.u.cols(), out.v.cols());
  for (Index j = 0; j < rank_cols; ++j) {
    for (Index i = 0; i < out.u.rows(); ++i) {
      const Scalar entry = out.u(i, j);
      if (std::abs(entry) > Scalar(1e-12)) {
        if (entry < 0) {
          out.u.col(j) = -out.u.col(j);
          out.v.col(j) = -out.v.col(j);
        }
        break;
      }
    }
  }
  return out;
}

/// Orthogonal factor U V^T of a square matrix, the nearest orthogonal matrix in Frobenius norm.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> polar_factor(
    const Eigen::MatrixBase<Derived>& m) {
  auto f = sorted_svd(m);
  return f.u * f.v.transpose();
}

/// argmin over orthogonal Q of ||Q x - y||_F for d x m matrices with matching columns.
template <typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> orthogonal_procrustes(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw DimensionMismatch("procrustes inputs differ in shape");
  return polar_factor(y * x.transpose());
}

/// Orthogonal Procrustes on the shared indices of two configurations (no centering).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> orthogonal_procrustes(
    const BasicConfiguration<Scalar>& x, const BasicConfiguration<Scalar>& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("configurations have different dimensions");
  const auto shared = common_indices(x.mask(), y.mask());
  if (shared.empty()) throw EmptyOverlap();
  return orthogonal_procrustes(x.gather(shared), y.gather(shared));
}

template <typename Scalar>
struct BasicPairAlignment {
  BasicRigidMotion<Scalar> motion;
  Scalar distance = 0;  // Frobenius residual over the overlap
  Index overlap_size = 0;
};

using PairAlignment = BasicPairAlignment<double>;

/// Best affine isometry x -> Q x + v carrying the columns of x onto those of y.
template <typename DerivedX, typename DerivedY>
BasicPairAlignment<typename DerivedX::Scalar> affine_procrustes(const Eigen::MatrixBase<DerivedX>& x,
                                                                const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw DimensionMismatch("procrustes inputs differ in shape");
  if (x.cols() == 0) throw EmptyOverlap();

  const Vector a = x.rowwise().mean();
  const Vector b = y.rowwise().mean();
  const Matrix xc = x.colwise() - a;
  const Matrix yc = y.colwise() - b;
  Matrix q = orthogonal_procrustes(xc, yc);
  const Scalar residual = (q * xc - yc).norm();
  Vector v = b - q * a;
  return {{std::move(q), std::move(v)}, residual, x.cols()};
}

template <typename Scalar>
BasicPairAlignment<Scalar> affine_procrustes(const BasicConfiguration<Scalar>& x,
                                             const BasicConfiguration<Scalar>& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("configurations have different dimensions");
  const auto shared = common_indices(x.mask(), y.mask());
  if (shared.empty()) throw EmptyOverlap();
  return affine_procrustes(x.gather(shared), y.gather(shared));
}

/// Procrustes distance: the residual of the best affine isometry on the overlap.
template <typename Scalar>
Scalar procrustes_distance(const BasicConfiguration<Scalar>& x, const BasicConfiguration<Scalar>& y) {
  return affine_procrustes(x, y).distance;
}

}  // namespace robust_coords
