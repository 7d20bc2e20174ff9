#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "robust_coords/core_types.hpp"

namespace robust_coords {

struct SwissRollSample {
  Configuration points3d;   // (t cos t, h, t sin t)
  Configuration intrinsic;  // (arc length from t = 1.5 pi, h)
  std::uint64_t seed = 0;
};

inline constexpr double kSwissRollTMin = 1.5 * 3.14159265358979323846;
inline constexpr double kSwissRollTMax = 4.5 * 3.14159265358979323846;
inline constexpr double kSwissRollHeight = 21.0;

/// Arc length of the spiral r = t from kSwissRollTMin to t.
double swiss_roll_arclength(double t);

/// t ~ U[1.5 pi, 4.5 pi], h ~ U[0, 21], drawn in that order per point.
SwissRollSample swiss_roll(Index n, std::uint64_t seed);

/// i.i.d. N(0, sigma^2) added to every present coordinate.
Configuration add_gaussian_noise(const Configuration& x, double sigma, std::uint64_t seed);

/// Appends `count` points drawn uniformly from the bounding box of x. The new points
/// get the global indices n_global .. n_global + count - 1.
std::pair<Configuration, std::vector<Index>> add_uniform_outliers(const Configuration& x, Index count,
                                                                  std::uint64_t seed);

/// The 60 truncated-icosahedron vertices on the unit sphere, plus optional noise.
Configuration buckyball(double sigma, std::uint64_t seed);

}  // namespace robust_coords
