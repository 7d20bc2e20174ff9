#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "robust_coords/core_types.hpp"

namespace robust_coords {

enum class EmbeddingMethod { isomap, pca, external };

struct EpsilonRule {
  double epsilon = 1.0;  // edge when the ambient distance is at most epsilon
  friend bool operator==(const EpsilonRule&, const EpsilonRule&) = default;
};

struct KnnRule {
  int neighbors = 10;  // symmetrized by union
  friend bool operator==(const KnnRule&, const KnnRule&) = default;
};

using NeighborRule = std::variant<std::monostate, EpsilonRule, KnnRule>;

struct EmbeddingParams {
  EmbeddingMethod method = EmbeddingMethod::isomap;
  Index target_dim = 2;
  NeighborRule neighbor_rule = KnnRule{};
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const EmbeddingParams&, const EmbeddingParams&) = default;
};

struct EmbeddingOutput {
  Configuration config;        // in R^target_dim, on the input's global indices
  std::vector<Index> dropped;  // input indices left out of the embedding
  EmbeddingParams params;
};

/// Euclidean distances between the columns of `points`.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& points);

/// Top eigenpairs of a symmetric matrix, eigenvalues nonincreasing, each eigenvector
/// with its first entry of magnitude above 1e-12 positive. Dense solver for small
/// matrices, Lanczos with full reorthogonalisation for large ones.
struct TopEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};
TopEigen top_eigenpairs(const Eigen::MatrixXd& symmetric, Index count);

/// Classical MDS of an m x m distance matrix into R^d; a full configuration on m indices.
Configuration classical_mds(const Eigen::MatrixXd& distances, Index target_dim);

/// Shortest-path distances on the neighbour graph, restricted to its largest
/// connected component (ties go to the component holding the lowest position).
struct GeodesicGraph {
  std::vector<Index> component;  // positions (0..m-1) of the kept points
  Eigen::MatrixXd distances;     // over `component`
};
GeodesicGraph geodesic_distances(const Eigen::MatrixXd& points, const NeighborRule& rule);

EmbeddingOutput isomap(const Configuration& x, const EmbeddingParams& params);
EmbeddingOutput pca_embed(const Configuration& x, Index target_dim);

/// Dispatches on params.method; external embeddings come from files, not from here.
EmbeddingOutput embed(const Configuration& x, const EmbeddingParams& params);

}  // namespace robust_coords
