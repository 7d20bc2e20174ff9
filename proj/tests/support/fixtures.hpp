// Random problem generators shared by tests.
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <random>
#include <vector>

#include "robust_coords/core_types.hpp"

namespace fixtures {

using robust_coords::Configuration;
using robust_coords::Index;
using robust_coords::Mask;
using robust_coords::RigidMotion;
using Eigen::MatrixXd;

inline MatrixXd gaussian(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  MatrixXd m(r, c);
  for (Index j = 0; j < m.size(); ++j) m.data()[j] = g(rng);
  return m;
}

inline MatrixXd random_orthogonal(Index d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<MatrixXd> qr(gaussian(d, d, rng));
  MatrixXd q = qr.householderQ();
  return q;
}

inline RigidMotion random_motion(Index d, std::mt19937_64& rng, double shift = 3.0) {
  return {random_orthogonal(d, rng), gaussian(d, 1, rng, shift)};
}

inline MatrixXd random_antisymmetric(Index d, std::mt19937_64& rng) {
  const MatrixXd a = gaussian(d, d, rng);
  return a - a.transpose();
}

inline MatrixXd expm(const MatrixXd& a) { return a.exp(); }

// k noisy rigid copies of one base configuration
inline std::vector<Configuration> noisy_copies(Index d, Index n, Index k, double noise, std::mt19937_64& rng) {
  const MatrixXd base = gaussian(d, n, rng);
  std::vector<Configuration> out;
  for (Index i = 0; i < k; ++i) {
    const MatrixXd x = base + gaussian(d, n, rng, noise);
    out.emplace_back(random_motion(d, rng).apply(x));
  }
  return out;
}

// random masks, each keeping roughly `keep` of the indices (at least d+1 of them)
inline std::vector<Configuration> masked_copies(Index d, Index n, Index k, double noise, double keep,
                                                std::mt19937_64& rng) {
  auto full = noisy_copies(d, n, k, noise, rng);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Configuration> out;
  for (auto& x : full) {
    std::vector<std::uint8_t> present(static_cast<std::size_t>(n));
    Index count = 0;
    for (auto& p : present) count += (p = u(rng) < keep);
    for (Index j = 0; count < d + 1 && j < n; ++j)
      if (!present[static_cast<std::size_t>(j)]) present[static_cast<std::size_t>(j)] = 1, ++count;
    out.emplace_back(x.matrix(), Mask(present));
  }
  return out;
}

}  // namespace fixtures
