#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robust_coords/core_types.hpp"
#include "robust_coords/dimred.hpp"
#include "robust_coords/gpa.hpp"
#include "robust_coords/tda.hpp"

namespace robust_coords {

struct PipelineConfig {
  Index n_subsamples = 200;
  Index subsample_size = 600;
  std::vector<EmbeddingParams> dimred{EmbeddingParams{}};  // parameter mesh, one shared target_dim
  double cluster_link_fraction = 0.5;  // alpha: single-linkage cut at alpha * scale
  Index min_cluster_size = 5;
  double dense_median_fraction = 0.25;  // beta: dense if median intra-distance <= beta * scale
  Index ph_representatives = 5;
  double ph_bar_fraction = 0.1;  // gamma: winner needs max PH1 bar <= gamma * representative diameter
  double essdim_rel_tol = 0.05;
  std::uint64_t seed = 0;
  AlsOptions als;
  double subsample_noise = 0;  // fresh N(0, s^2) per subsample before embedding
  PersistenceOptions ph;

  Index target_dim() const { return dimred.front().target_dim; }
  void validate() const;
};

/// Independent stream `stream`, item `i`, derived from a base seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t i);

/// `count` sorted subsets of {0..n-1} of the given size, each uniform without replacement.
std::vector<std::vector<Index>> generate_subsamples(Index n, Index size, Index count, std::uint64_t seed);

struct EnsembleMember {
  Index subsample = 0;  // position in Ensemble::subsamples
  Index param = 0;      // position in the dimred mesh
  EmbeddingOutput output;
};

struct EnsembleFailure {
  Index subsample = 0;
  Index param = 0;
  std::string reason;
};

struct Ensemble {
  std::vector<std::vector<Index>> subsamples;  // global indices
  std::vector<EnsembleMember> members;         // subsample-major, failures left out
  std::vector<EnsembleFailure> failures;

  std::vector<Configuration> configs() const;
};

/// One embedding per (subsample, parameter) pair of the mesh. Items whose embedding
/// throws are recorded as failures and skipped.
Ensemble build_ensemble(const Configuration& x, const PipelineConfig& config);

/// Procrustes residual over each pair's common indices divided by sqrt(overlap size).
/// Pairs without common indices get twice the largest finite entry; their number is
/// written to `sentinel_pairs` when given.
Eigen::MatrixXd dissimilarity_matrix(std::span<const Configuration> configs, Index* sentinel_pairs = nullptr);

/// Median of the strict upper triangle; 0 for a 1 x 1 matrix.
double off_diagonal_median(const Eigen::MatrixXd& d);

enum class Verdict { pending, good, rejected_sparse, rejected_dim, rejected_ph };
const char* to_string(Verdict v);

struct ClusterReport {
  std::vector<Index> members;  // ensemble positions, ascending
  double median_intra_distance = 0;
  bool dense = false;
  std::vector<Index> representatives;
  std::vector<double> ph1_max_bars;   // longest PH1 bar per representative, infinite bars capped
  std::vector<double> rep_diameters;
  std::vector<Index> essential_dims;
  std::optional<double> ph1_score;    // max over representatives of bar / diameter
  Verdict verdict = Verdict::pending;
};

/// Median over the configurations of their RMS distance to their own centroid.
double embedding_scale(std::span<const Configuration> configs);

/// Thresholds are fractions of scale = max(median(D), embedding scale). The second term
/// only matters when nearly all embeddings agree, where median(D) is itself an
/// intra-cluster distance.
struct ClusterThresholds {
  double median_distance = 0;
  double embedding_scale = 0;
  double scale = 0;
  double link_threshold = 0;   // alpha * scale
  double dense_threshold = 0;  // beta * scale
};

ClusterThresholds cluster_thresholds(const Eigen::MatrixXd& d, const PipelineConfig& config,
                                     double embedding_scale = 0);

/// Connected components of the graph joining members at distance <= link_threshold,
/// ordered by smallest member. Components below min_cluster_size are rejected_sparse.
std::vector<ClusterReport> cluster_ensemble(const Eigen::MatrixXd& d, const PipelineConfig& config,
                                            double embedding_scale = 0);

/// Marks density, samples representatives, checks essential dimension and PH1, and
/// sets every verdict. Returns the position of the good cluster, if any. Ties on the
/// PH1 score go to the larger cluster, then to the lower median intra-distance.
std::optional<Index> select_good_cluster(std::vector<ClusterReport>& clusters, std::span<const Configuration> configs,
                                         const PipelineConfig& config, const ClusterThresholds& thresholds);

struct ClusterAverage {
  Configuration embedding;     // mean of the aligned members, first member fixed
  std::vector<Index> outliers;  // indices of `universe` no member contains
  AlignmentResult alignment;
};

ClusterAverage average_cluster(std::span<const Configuration> configs, const std::vector<Index>& members,
                               const Mask& universe, const AlsOptions& als);

struct PipelineReport {
  PipelineConfig config;
  Mask universe;  // indices present in the input
  Ensemble ensemble;
  Eigen::MatrixXd dissimilarity;
  Index sentinel_pairs = 0;
  ClusterThresholds thresholds;
  std::vector<ClusterReport> clusters;
  std::optional<Index> good_cluster;
  std::optional<Configuration> embedding;
  std::vector<Index> outliers;
  std::optional<AlignmentResult> alignment;
  std::optional<Configuration> mds_view;  // ensemble members as points in the plane
};

class NoGoodCluster : public Error {
 public:
  explicit NoGoodCluster(PipelineReport report)
      : Error("no dense, full-dimensional cluster with short PH1 bars"),
        report_(std::make_shared<const PipelineReport>(std::move(report))) {}
  const PipelineReport& report() const { return *report_; }

 private:
  std::shared_ptr<const PipelineReport> report_;
};

PipelineReport run_pipeline(const Configuration& x, const PipelineConfig& config);

/// Same, on an ensemble built elsewhere (external embeddings, prebuilt meshes).
PipelineReport run_pipeline(const Configuration& x, Ensemble ensemble, const PipelineConfig& config);

}  // namespace robust_coords
