#include "robust_coords/dimred.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

#include "robust_coords/parallel.hpp"

namespace robust_coords {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void EmbeddingParams::validate() const {
  if (target_dim < 1) throw InvalidArgument("target_dim must be at least 1");
  if (method == EmbeddingMethod::isomap) {
    if (std::holds_alternative<std::monostate>(neighbor_rule))
      throw InvalidArgument("isomap needs a neighbour rule");
    if (auto* e = std::get_if<EpsilonRule>(&neighbor_rule); e && !(e->epsilon > 0 && std::isfinite(e->epsilon)))
      throw InvalidArgument("epsilon must be positive");
    if (auto* k = std::get_if<KnnRule>(&neighbor_rule); k && k->neighbors < 1)
      throw InvalidArgument("knn needs at least one neighbour");
  }
}

MatrixXd pairwise_distances(const MatrixXd& points) {
  const Index m = points.cols();
  MatrixXd d = MatrixXd::Zero(m, m);
  for (Index b = 0; b < m; ++b)
    for (Index a = b + 1; a < m; ++a) d(a, b) = d(b, a) = (points.col(a) - points.col(b)).norm();
  return d;
}

namespace {

void fix_signs(MatrixXd& vectors) {
  for (Index c = 0; c < vectors.cols(); ++c) {
    for (Index r = 0; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) > 1e-12) {
        if (vectors(r, c) < 0) vectors.col(c) = -vectors.col(c);
        break;
      }
    }
  }
}

TopEigen dense_top(const MatrixXd& a, Index count) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  const Index m = a.rows();
  TopEigen out{VectorXd(count), MatrixXd(m, count)};
  for (Index r = 0; r < count; ++r) {
    out.values(r) = es.eigenvalues()(m - 1 - r);
    out.vectors.col(r) = es.eigenvectors().col(m - 1 - r);
  }
  return out;
}

VectorXd random_unit(Index m, std::mt19937_64& rng, const MatrixXd& basis, Index used) {
  std::normal_distribution<double> g;
  VectorXd v(m);
  for (Index r = 0; r < m; ++r) v(r) = g(rng);
  for (int pass = 0; pass < 2; ++pass)
    if (used > 0) v -= basis.leftCols(used) * (basis.leftCols(used).transpose() * v);
  return v / v.norm();
}

// Lanczos with full reorthogonalisation; a breakdown restarts from a fresh vector
// orthogonal to the basis so repeated eigenvalues are not missed.
TopEigen lanczos_top(const MatrixXd& a, Index count) {
  const Index m = a.rows();
  std::mt19937_64 rng(0x5eed);
  const double scale = std::max(1e-300, a.cwiseAbs().rowwise().sum().maxCoeff());
  Index steps = std::min<Index>(m, std::max<Index>(4 * count + 40, 80));
  for (;;) {
    MatrixXd v(m, steps + 1);
    VectorXd alpha = VectorXd::Zero(steps), beta = VectorXd::Zero(steps);
    v.col(0) = random_unit(m, rng, v, 0);
    Index k = 0;
    for (Index j = 0; j < steps; ++j) {
      VectorXd w = a * v.col(j);
      alpha(j) = v.col(j).dot(w);
      for (int pass = 0; pass < 2; ++pass) w -= v.leftCols(j + 1) * (v.leftCols(j + 1).transpose() * w);
      beta(j) = w.norm();
      k = j + 1;
      if (k == m) break;
      if (beta(j) <= 1e-12 * scale) {
        beta(j) = 0;
        v.col(j + 1) = random_unit(m, rng, v, j + 1);
      } else {
        v.col(j + 1) = w / beta(j);
      }
    }
    MatrixXd t = MatrixXd::Zero(k, k);
    for (Index j = 0; j < k; ++j) {
      t(j, j) = alpha(j);
      if (j + 1 < k) t(j, j + 1) = t(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
    const Index take = std::min(count, k);
    bool converged = true;
    for (Index r = 0; r < take; ++r) {
      const double resid = std::abs(beta(k - 1) * es.eigenvectors()(k - 1, k - 1 - r));
      if (resid > 1e-10 * scale) converged = false;
    }
    if (converged || k == m) {
      TopEigen out{VectorXd::Zero(count), MatrixXd::Zero(m, count)};
      for (Index r = 0; r < take; ++r) {
        out.values(r) = es.eigenvalues()(k - 1 - r);
        out.vectors.col(r) = v.leftCols(k) * es.eigenvectors().col(k - 1 - r);
      }
      return out;
    }
    steps = std::min(m, 2 * steps);
  }
}

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  Index find(Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      auto& p = parent[static_cast<std::size_t>(x)];
      p = parent[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(Index a, Index b) {
    a = find(a), b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

}  // namespace

TopEigen top_eigenpairs(const MatrixXd& symmetric, Index count) {
  if (symmetric.rows() != symmetric.cols()) throw DimensionMismatch("eigenproblem needs a square matrix");
  if (count < 0 || count > symmetric.rows()) throw InvalidArgument("too many eigenpairs requested");
  TopEigen out = symmetric.rows() > 400 ? lanczos_top(symmetric, count) : dense_top(symmetric, count);
  fix_signs(out.vectors);
  return out;
}

Configuration classical_mds(const MatrixXd& distances, Index target_dim) {
  const Index m = distances.rows();
  if (distances.cols() != m) throw DimensionMismatch("distance matrix must be square");
  if (target_dim < 1) throw InvalidArgument("target_dim must be at least 1");
  if (m < target_dim + 1) throw TooFewPoints("classical MDS needs at least target_dim + 1 points");
  if (!distances.allFinite()) throw NonFinite("distance matrix has non-finite entries");
  const double tol = 1e-9 * std::max(1.0, distances.cwiseAbs().maxCoeff());
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > tol) throw NotSymmetric();
  if (distances.minCoeff() < 0) throw InvalidArgument("distances must be nonnegative");
  if (distances.diagonal().cwiseAbs().maxCoeff() > tol) throw InvalidArgument("distance matrix needs a zero diagonal");

  MatrixXd b = distances.array().square().matrix();
  b = 0.5 * (b + b.transpose()).eval();
  const VectorXd row_mean = b.rowwise().mean();
  const double grand = row_mean.mean();
  b.colwise() -= row_mean;
  b.rowwise() -= row_mean.transpose();
  b.array() += grand;
  b *= -0.5;

  const auto eig = top_eigenpairs(b, target_dim);
  MatrixXd coords(target_dim, m);
  for (Index r = 0; r < target_dim; ++r)
    coords.row(r) = std::sqrt(std::max(0.0, eig.values(r))) * eig.vectors.col(r).transpose();
  coords = coords.colwise() - coords.rowwise().mean();
  return Configuration(coords);
}

GeodesicGraph geodesic_distances(const MatrixXd& points, const NeighborRule& rule) {
  const Index m = points.cols();
  const MatrixXd d = pairwise_distances(points);
  std::vector<std::vector<std::pair<Index, double>>> adj(static_cast<std::size_t>(m));
  auto link = [&](Index a, Index b) {
    adj[static_cast<std::size_t>(a)].emplace_back(b, d(a, b));
    adj[static_cast<std::size_t>(b)].emplace_back(a, d(a, b));
  };
  if (auto* e = std::get_if<EpsilonRule>(&rule)) {
    for (Index a = 0; a < m; ++a)
      for (Index b = a + 1; b < m; ++b)
        if (d(a, b) <= e->epsilon) link(a, b);
  } else if (auto* k = std::get_if<KnnRule>(&rule)) {
    std::vector<std::pair<double, Index>> order;
    std::vector<std::pair<Index, Index>> edges;
    for (Index a = 0; a < m; ++a) {
      order.clear();
      for (Index b = 0; b < m; ++b)
        if (b != a) order.emplace_back(d(a, b), b);
      const Index take = std::min<Index>(k->neighbors, m - 1);
      std::partial_sort(order.begin(), order.begin() + take, order.end());
      for (Index r = 0; r < take; ++r) edges.emplace_back(std::min(a, order[r].second), std::max(a, order[r].second));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (auto [a, b] : edges) link(a, b);
  } else {
    throw InvalidArgument("isomap needs a neighbour rule");
  }

  UnionFind uf(m);
  for (Index a = 0; a < m; ++a)
    for (auto [b, w] : adj[static_cast<std::size_t>(a)]) uf.unite(a, b);
  std::vector<Index> size(static_cast<std::size_t>(m), 0);
  for (Index a = 0; a < m; ++a) ++size[static_cast<std::size_t>(uf.find(a))];
  // roots are the smallest member, so the first maximum is the tie winner
  const Index root = std::max_element(size.begin(), size.end()) - size.begin();

  GeodesicGraph out;
  std::vector<Index> local(static_cast<std::size_t>(m), -1);
  for (Index a = 0; a < m; ++a) {
    if (uf.find(a) == root) {
      local[static_cast<std::size_t>(a)] = static_cast<Index>(out.component.size());
      out.component.push_back(a);
    }
  }
  const Index c = static_cast<Index>(out.component.size());
  out.distances.resize(c, c);
  parallel_for(static_cast<std::size_t>(c), [&](std::size_t s) {
    std::vector<double> dist(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    const Index src = out.component[s];
    dist[static_cast<std::size_t>(src)] = 0;
    heap.emplace(0.0, src);
    while (!heap.empty()) {
      auto [du, u] = heap.top();
      heap.pop();
      if (du > dist[static_cast<std::size_t>(u)]) continue;
      for (auto [v, w] : adj[static_cast<std::size_t>(u)]) {
        const double nd = du + w;
        if (nd < dist[static_cast<std::size_t>(v)]) {
          dist[static_cast<std::size_t>(v)] = nd;
          heap.emplace(nd, v);
        }
      }
    }
    for (Index r = 0; r < c; ++r)
      out.distances(static_cast<Index>(s), r) = dist[static_cast<std::size_t>(out.component[static_cast<std::size_t>(r)])];
  });
  // sums along a path and its reverse can round differently
  out.distances = (0.5 * (out.distances + out.distances.transpose())).eval();
  return out;
}

EmbeddingOutput isomap(const Configuration& x, const EmbeddingParams& params) {
  params.validate();
  const Index d = params.target_dim;
  if (x.count() < d + 2) throw TooFewPoints("isomap needs at least target_dim + 2 points");
  const auto idx = x.indices();
  const auto graph = geodesic_distances(x.compact(), params.neighbor_rule);
  if (static_cast<Index>(graph.component.size()) < d + 2)
    throw DegenerateGraph("largest neighbour-graph component has " + std::to_string(graph.component.size()) +
                          " points");
  const Configuration local = classical_mds(graph.distances, d);

  std::vector<Index> kept;
  for (Index p : graph.component) kept.push_back(idx[static_cast<std::size_t>(p)]);
  EmbeddingOutput out{Configuration::from_columns(x.n_global(), kept, local.matrix()), {}, params};
  std::vector<std::uint8_t> in(static_cast<std::size_t>(idx.size()), 0);
  for (Index p : graph.component) in[static_cast<std::size_t>(p)] = 1;
  for (std::size_t r = 0; r < idx.size(); ++r)
    if (!in[r]) out.dropped.push_back(idx[r]);
  return out;
}

EmbeddingOutput pca_embed(const Configuration& x, Index target_dim) {
  if (target_dim < 1) throw InvalidArgument("target_dim must be at least 1");
  if (target_dim > x.dim()) throw InvalidArgument("PCA cannot raise the dimension");
  if (x.count() < target_dim + 1) throw TooFewPoints("PCA needs at least target_dim + 1 points");
  const auto idx = x.indices();
  MatrixXd pts = x.compact();
  pts = pts.colwise() - pts.rowwise().mean();
  const MatrixXd cov = pts * pts.transpose();
  const auto eig = top_eigenpairs(cov, target_dim);
  const MatrixXd coords = eig.vectors.transpose() * pts;
  EmbeddingParams params;
  params.method = EmbeddingMethod::pca;
  params.target_dim = target_dim;
  params.neighbor_rule = std::monostate{};
  return {Configuration::from_columns(x.n_global(), idx, coords), {}, params};
}

EmbeddingOutput embed(const Configuration& x, const EmbeddingParams& params) {
  params.validate();
  switch (params.method) {
    case EmbeddingMethod::isomap: return isomap(x, params);
    case EmbeddingMethod::pca: {
      auto out = pca_embed(x, params.target_dim);
      out.params = params;
      return out;
    }
    case EmbeddingMethod::external: break;
  }
  throw InvalidArgument("external embeddings are read from files");
}

}  // namespace robust_coords
