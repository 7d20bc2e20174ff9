#include "robust_coords/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace robust_coords {

using Eigen::MatrixXd;

namespace {

double spiral_primitive(double t) { return 0.5 * (t * std::sqrt(1 + t * t) + std::asinh(t)); }

}  // namespace

double swiss_roll_arclength(double t) { return spiral_primitive(t) - spiral_primitive(kSwissRollTMin); }

SwissRollSample swiss_roll(Index n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("swiss roll needs at least one point");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(kSwissRollTMin, kSwissRollTMax), uh(0.0, kSwissRollHeight);
  MatrixXd pts(3, n), chart(2, n);
  for (Index j = 0; j < n; ++j) {
    const double t = ut(rng);
    const double h = uh(rng);
    pts.col(j) << t * std::cos(t), h, t * std::sin(t);
    chart.col(j) << swiss_roll_arclength(t), h;
  }
  return {Configuration(pts), Configuration(chart), seed};
}

Configuration add_gaussian_noise(const Configuration& x, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be finite and nonnegative");
  if (sigma == 0) return x;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  MatrixXd m = x.matrix();
  for (Index j : x.indices())
    for (Index r = 0; r < m.rows(); ++r) m(r, j) += g(rng);
  return Configuration(std::move(m), x.mask());
}

std::pair<Configuration, std::vector<Index>> add_uniform_outliers(const Configuration& x, Index count,
                                                                  std::uint64_t seed) {
  if (count < 0) throw InvalidArgument("outlier count must be nonnegative");
  if (count == 0) return {x, {}};
  const MatrixXd present = x.compact();
  const Eigen::VectorXd lo = present.rowwise().minCoeff(), hi = present.rowwise().maxCoeff();
  const Index n = x.n_global();
  MatrixXd m = MatrixXd::Zero(x.dim(), n + count);
  m.leftCols(n) = x.matrix();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n + count), 1);
  for (Index j = 0; j < n; ++j) mask[static_cast<std::size_t>(j)] = x.contains(j);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Index> added;
  for (Index j = n; j < n + count; ++j) {
    for (Index r = 0; r < x.dim(); ++r) m(r, j) = lo(r) + (hi(r) - lo(r)) * u(rng);
    added.push_back(j);
  }
  return {Configuration(std::move(m), Mask(std::move(mask))), added};
}

Configuration buckyball(double sigma, std::uint64_t seed) {
  const double phi = std::numbers::phi;
  const double base[3][3] = {{0, 1, 3 * phi}, {1, 2 + phi, 2 * phi}, {phi, 2, 2 * phi + 1}};
  MatrixXd pts(3, 60);
  Index col = 0;
  for (const auto& b : base) {
    for (int shift = 0; shift < 3; ++shift) {
      for (int signs = 0; signs < 8; ++signs) {
        double v[3];
        bool duplicate = false;
        for (int c = 0; c < 3; ++c) {
          const bool neg = (signs >> c) & 1;
          if (neg && b[c] == 0) duplicate = true;  // -0 is the same vertex
          v[c] = neg ? -b[c] : b[c];
        }
        if (duplicate) continue;
        // cyclic permutations are the even ones
        pts.col(col++) << v[shift % 3], v[(shift + 1) % 3], v[(shift + 2) % 3];
      }
    }
  }
  pts /= std::sqrt(10 + 9 * phi);
  return add_gaussian_noise(Configuration(pts), sigma, seed);
}

}  // namespace robust_coords
