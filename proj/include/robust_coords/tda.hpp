#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "robust_coords/core_types.hpp"

namespace robust_coords {

struct PersistenceBar {
  double birth = 0;
  double death = std::numeric_limits<double>::infinity();

  bool infinite() const { return death == std::numeric_limits<double>::infinity(); }
  double length() const { return death - birth; }
  friend bool operator==(const PersistenceBar&, const PersistenceBar&) = default;
};

struct PersistenceDiagram {
  int prime = 2;
  double max_radius = 0;
  std::vector<std::vector<PersistenceBar>> bars;  // bars[q], sorted by (birth, death)
  std::vector<Index> landmarks;                  // input positions the complex was built on

  int max_dim() const { return static_cast<int>(bars.size()) - 1; }
};

struct PersistenceOptions {
  int max_dim = 1;                       // 0, 1 or 2
  int prime = 2;
  std::optional<double> max_radius;      // default: half the diameter of the (landmarked) set
  Index landmark_cap = 150;              // max-min subsample above this many points
  std::size_t simplex_budget = 50'000'000;  // per dimension

  void validate() const;
};

bool is_prime(int p);

/// Farthest-point subsample of size `count`, started at an endpoint of a diameter
/// (lowest position on ties); positions are returned in selection order.
std::vector<Index> maxmin_landmarks(const Eigen::MatrixXd& distances, Index count);

/// Vietoris-Rips persistence over F_p. A simplex enters at its largest pairwise
/// distance; simplices longer than max_radius are left out, so classes still alive
/// there are reported with death = infinity. Zero-length bars are not reported.
PersistenceDiagram rips_persistence(const Eigen::MatrixXd& distances, const PersistenceOptions& options = {});

/// Same, on the present points of a configuration.
PersistenceDiagram rips_persistence(const Configuration& points, const PersistenceOptions& options = {});

/// Longest finite bar in dimension q, 0 if there is none.
double max_bar_length(const PersistenceDiagram& diagram, int q);

/// Longest bar in dimension q with infinite deaths cut at max_radius.
double max_bar_length_capped(const PersistenceDiagram& diagram, int q);

}  // namespace robust_coords
