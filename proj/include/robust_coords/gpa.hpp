#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "robust_coords/core_types.hpp"

namespace robust_coords {

enum class AlsVariant {
  basic,           // every Q_i solved against the previous mean, then the mean is rebuilt
  refined,         // Q_i solved against the mean of the other configurations (full domains)
  missing_points,  // refined sweep with per-index masks and translations
};

/// Rotation update used by the missing-points sweep.
enum class MissingPointsUpdate {
  /// Exact minimizer of the loss over (Q_i, v_i) with the others fixed: a weighted
  /// Procrustes fit of X_i to the mean of the other configurations, weight 1 - 1/k_j.
  block_exact,
  /// SVD of ((Z - b_i)K_i - Q_i(X_i - a_i)K_i K^-1)((X_i - a_i)K_i)^T.
  masked_refined,
  /// SVD of ((Z - b_i)K_i - (X_i - a_i)K_i K^-1)(Q_i(X_i - a_i)K_i)^T, as printed.
  literal,
};

struct AlsOptions {
  AlsVariant variant = AlsVariant::missing_points;
  MissingPointsUpdate update = MissingPointsUpdate::block_exact;
  double tol = 1e-10;  // absolute change in loss
  int max_iter = 500;
  int min_iter = 3;

  void validate() const;
};

/// k configurations in R^d over a shared global index set.
class GpaProblem {
 public:
  explicit GpaProblem(std::vector<Configuration> configs, AlsOptions options = {});

  Index size() const { return static_cast<Index>(configs_.size()); }
  Index dim() const { return configs_.front().dim(); }
  Index n_global() const { return configs_.front().n_global(); }
  const std::vector<Configuration>& configs() const { return configs_; }
  const Configuration& config(Index i) const { return configs_[static_cast<std::size_t>(i)]; }
  const AlsOptions& options() const { return options_; }

  /// k_j: number of configurations containing index j (zero for indices nobody has).
  const Eigen::ArrayXd& counts() const { return counts_; }
  /// Indices present in at least one configuration.
  const Mask& support() const { return support_; }
  bool full_domain() const { return full_domain_; }

 private:
  std::vector<Configuration> configs_;
  AlsOptions options_;
  Eigen::ArrayXd counts_;
  Mask support_;
  bool full_domain_ = true;
};

struct AlignmentResult {
  std::vector<RigidMotion> motions;  // g_i x = Q_i x + v_i on the original inputs
  Configuration mean;                // Z(j): average of g_i X_i(j) over configurations containing j
  double loss = 0;
  std::vector<double> loss_trace;    // initial loss, then one entry per sweep
  int iterations = 0;
  bool converged = false;
  std::vector<double> symmetry_residuals;
  Eigen::ArrayXd counts;             // k_j
};

/// g_i X_i for every configuration, absent columns zero.
std::vector<Configuration> transformed_configs(const GpaProblem& problem, std::span<const RigidMotion> motions);

/// Masked mean of the transformed configurations.
Configuration masked_mean(const GpaProblem& problem, std::span<const RigidMotion> motions);

/// (1/k) sum_i sum_{j in I_i} ||g_i X_i(j) - Z(j)||^2 with Z the masked mean.
double gpa_loss(const GpaProblem& problem, std::span<const RigidMotion> motions);

AlignmentResult als_align(const GpaProblem& problem);

/// Composes every motion and the mean with g_1^{-1}, so g_1 becomes the identity.
AlignmentResult normalize_first_fixed(const AlignmentResult& result);

/// ||M - M^T||_F / max(1, ||M||_F) for M = sum_j (Z(j) - zbar)(g_i X_i(j) - ybar)^T over I_i.
double symmetry_residual(const GpaProblem& problem, const AlignmentResult& result, Index i);

/// d/dt of the loss along g_i(t) = exp(A_i t) g_i (full domains only).
double loss_derivative(const GpaProblem& problem, const AlignmentResult& result,
                       std::span<const Eigen::MatrixXd> directions);

/// Second derivative of the loss along g_i(t) = exp(A_i t) g_i (full domains only).
double hessian_form(const GpaProblem& problem, const AlignmentResult& result,
                    std::span<const Eigen::MatrixXd> directions);

struct HessianSpectrum {
  Eigen::MatrixXd matrix;  // in the basis E_uv - E_vu, u < v, blocks for i = 2..k
  Eigen::VectorXd eigenvalues;
  bool positive_definite = false;
};

HessianSpectrum hessian_spectrum(const GpaProblem& problem, const AlignmentResult& result);

/// Basis element E_uv - E_vu of the d x d antisymmetric matrices.
Eigen::MatrixXd antisymmetric_basis_element(Index d, Index u, Index v);

/// Number of singular values of the centered configuration at least rel_tol * sigma_1.
Index essential_dimension(const Configuration& x, double rel_tol);

}  // namespace robust_coords
