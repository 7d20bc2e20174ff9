#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "robust_coords/errors.hpp"

namespace robust_coords {

using Index = Eigen::Index;

/// Presence flags over a global index set {0..n-1}. At least one index is present.
class Mask {
 public:
  Mask() = default;

  explicit Mask(std::vector<std::uint8_t> present) : present_(std::move(present)) {
    count_ = std::count_if(present_.begin(), present_.end(), [](auto p) { return p != 0; });
    for (auto& p : present_) p = p ? 1 : 0;
    if (count_ == 0) throw InvalidArgument("mask has no present index");
  }

  static Mask full(Index n) { return Mask(std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1)); }

  static Mask from_indices(Index n, std::span<const Index> indices) {
    std::vector<std::uint8_t> present(static_cast<std::size_t>(n), 0);
    for (Index j : indices) {
      if (j < 0 || j >= n) throw InvalidArgument("mask index out of range");
      present[static_cast<std::size_t>(j)] = 1;
    }
    return Mask(std::move(present));
  }

  Index n_global() const { return static_cast<Index>(present_.size()); }
  Index count() const { return count_; }
  bool contains(Index j) const { return present_[static_cast<std::size_t>(j)] != 0; }
  bool is_full() const { return count_ == n_global(); }

  /// Present indices in increasing order.
  std::vector<Index> indices() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(count_));
    for (Index j = 0; j < n_global(); ++j)
      if (contains(j)) out.push_back(j);
    return out;
  }

  /// 0/1 weights, one per global index.
  Eigen::ArrayXd weights() const {
    Eigen::ArrayXd w(n_global());
    for (Index j = 0; j < n_global(); ++j) w(j) = contains(j) ? 1.0 : 0.0;
    return w;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::vector<std::uint8_t> present_;
  Index count_ = 0;
};

/// Sorted indices present in both masks.
inline std::vector<Index> common_indices(const Mask& a, const Mask& b) {
  if (a.n_global() != b.n_global()) throw DimensionMismatch("masks have different global sizes");
  std::vector<Index> out;
  for (Index j = 0; j < a.n_global(); ++j)
    if (a.contains(j) && b.contains(j)) out.push_back(j);
  return out;
}

/// A partially defined map from {0..n-1} into R^d, stored as a d x n matrix whose
/// absent columns are zero.
template <typename Scalar>
class BasicConfiguration {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicConfiguration() = default;

  BasicConfiguration(Matrix points, Mask mask) : points_(std::move(points)), mask_(std::move(mask)) {
    if (points_.rows() < 1) throw InvalidArgument("configuration dimension must be positive");
    if (points_.cols() != mask_.n_global())
      throw DimensionMismatch("configuration matrix and mask disagree on the global size");
    for (Index j = 0; j < points_.cols(); ++j) {
      if (!mask_.contains(j)) {
        points_.col(j).setZero();
      } else if (!points_.col(j).allFinite()) {
        throw NonFinite("configuration has a non-finite coordinate at index " + std::to_string(j));
      }
    }
  }

  /// Fully defined configuration.
  explicit BasicConfiguration(const Matrix& points) : BasicConfiguration(points, Mask::full(points.cols())) {}

  /// Configuration defined at `indices`, with `columns.col(r)` the point at `indices[r]`.
  static BasicConfiguration from_columns(Index n_global, std::span<const Index> indices,
                                         const Eigen::Ref<const Matrix>& columns) {
    if (static_cast<Index>(indices.size()) != columns.cols())
      throw DimensionMismatch("index list and column count differ");
    Matrix full = Matrix::Zero(columns.rows(), n_global);
    for (std::size_t r = 0; r < indices.size(); ++r) full.col(indices[r]) = columns.col(static_cast<Index>(r));
    return BasicConfiguration(std::move(full), Mask::from_indices(n_global, indices));
  }

  Index dim() const { return points_.rows(); }
  Index n_global() const { return points_.cols(); }
  Index count() const { return mask_.count(); }
  const Mask& mask() const { return mask_; }
  bool contains(Index j) const { return mask_.contains(j); }
  std::vector<Index> indices() const { return mask_.indices(); }

  /// d x n matrix with zero columns at absent indices.
  const Matrix& matrix() const { return points_; }
  auto point(Index j) const { return points_.col(j); }

  /// Present columns in increasing index order.
  Matrix compact() const { return gather(indices()); }

  Matrix gather(std::span<const Index> indices) const {
    Matrix out(dim(), static_cast<Index>(indices.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) out.col(static_cast<Index>(r)) = points_.col(indices[r]);
    return out;
  }

  BasicConfiguration restricted_to(std::span<const Index> indices) const {
    for (Index j : indices)
      if (!contains(j)) throw InvalidArgument("restriction index not in configuration domain");
    return from_columns(n_global(), indices, gather(indices));
  }

  template <typename Other>
  BasicConfiguration<Other> cast() const {
    return BasicConfiguration<Other>(points_.template cast<Other>(), mask_);
  }

  friend bool operator==(const BasicConfiguration& a, const BasicConfiguration& b) {
    return a.mask_ == b.mask_ && a.points_ == b.points_;
  }

 private:
  Matrix points_;
  Mask mask_;
};

using Configuration = BasicConfiguration<double>;

/// x -> Q x + v with Q orthogonal (reflections allowed).
template <typename Scalar>
struct BasicRigidMotion {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix rotation;
  Vector translation;

  static BasicRigidMotion identity(Index d) { return {Matrix::Identity(d, d), Vector::Zero(d)}; }

  Index dim() const { return rotation.rows(); }

  Scalar orthogonality_defect() const {
    return (rotation.transpose() * rotation - Matrix::Identity(dim(), dim())).norm();
  }

  template <typename Derived>
  Matrix apply(const Eigen::MatrixBase<Derived>& points) const {
    return (rotation * points).colwise() + translation;
  }

  BasicConfiguration<Scalar> apply(const BasicConfiguration<Scalar>& x) const {
    return BasicConfiguration<Scalar>(apply(x.matrix()), x.mask());
  }

  /// (*this) after `first`.
  BasicRigidMotion compose(const BasicRigidMotion& first) const {
    return {rotation * first.rotation, rotation * first.translation + translation};
  }

  BasicRigidMotion inverse() const {
    Matrix qt = rotation.transpose();
    return {qt, -(qt * translation)};
  }
};

using RigidMotion = BasicRigidMotion<double>;

/// Both configurations restricted to the indices they share.
template <typename Scalar>
std::pair<BasicConfiguration<Scalar>, BasicConfiguration<Scalar>> restrict_common(
    const BasicConfiguration<Scalar>& x, const BasicConfiguration<Scalar>& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("configurations have different dimensions");
  const auto shared = common_indices(x.mask(), y.mask());
  if (shared.empty()) throw EmptyOverlap();
  return {x.restricted_to(shared), y.restricted_to(shared)};
}

/// Mean of the present points.
template <typename Scalar>
typename BasicConfiguration<Scalar>::Vector centroid(const BasicConfiguration<Scalar>& x) {
  // absent columns are zero, so the plain row sum only sees present points
  return x.matrix().rowwise().sum() / static_cast<Scalar>(x.count());
}

/// The configuration translated so its centroid is the origin, and the centroid removed.
template <typename Scalar>
std::pair<BasicConfiguration<Scalar>, typename BasicConfiguration<Scalar>::Vector> center(
    const BasicConfiguration<Scalar>& x) {
  auto c = centroid(x);
  typename BasicConfiguration<Scalar>::Matrix shifted = x.matrix().colwise() - c;
  return {BasicConfiguration<Scalar>(std::move(shifted), x.mask()), c};
}

}  // namespace robust_coords
