#include "robust_coords/tda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "robust_coords/dimred.hpp"

namespace robust_coords {

using Eigen::MatrixXd;

void PersistenceOptions::validate() const {
  if (max_dim < 0 || max_dim > 2) throw InvalidArgument("max_dim must be 0, 1 or 2");
  if (!is_prime(prime)) throw InvalidArgument("coefficient field needs a prime characteristic");
  if (max_radius && !(*max_radius > 0)) throw InvalidArgument("max_radius must be positive");
  if (landmark_cap < 1) throw InvalidArgument("landmark_cap must be positive");
}

bool is_prime(int p) {
  if (p < 2) return false;
  for (int f = 2; f * f <= p; ++f)
    if (p % f == 0) return false;
  return true;
}

std::vector<Index> maxmin_landmarks(const MatrixXd& distances, Index count) {
  const Index m = distances.rows();
  if (count >= m) {
    std::vector<Index> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  if (count < 1) return {};
  Index first = 0;
  double best = -1;
  for (Index a = 0; a < m; ++a) {
    const double ecc = distances.row(a).maxCoeff();
    if (ecc > best) best = ecc, first = a;
  }
  std::vector<Index> chosen{first};
  Eigen::VectorXd gap = distances.col(first);
  while (static_cast<Index>(chosen.size()) < count) {
    Index next = 0;
    double far = -1;
    for (Index a = 0; a < m; ++a)
      if (gap(a) > far) far = gap(a), next = a;
    chosen.push_back(next);
    gap = gap.cwiseMin(distances.col(next));
  }
  return chosen;
}

namespace {

using SimplexIndex = std::int64_t;

struct Entry {
  double diam;
  SimplexIndex index;
  int coef;
};

// top of the heap = earliest in the filtration: smallest diameter, then largest index
struct LaterFirst {
  bool operator()(const Entry& a, const Entry& b) const {
    if (a.diam != b.diam) return a.diam > b.diam;
    return a.index < b.index;
  }
};

using Heap = std::priority_queue<Entry, std::vector<Entry>, LaterFirst>;

struct Reduced {
  int pivot_coef;
  std::vector<std::pair<SimplexIndex, int>> column;  // V column: simplices and coefficients
};

class RipsComplex {
 public:
  RipsComplex(const MatrixXd& d, double threshold, int p)
      : d_(d), n_(d.rows()), threshold_(threshold), p_(p), binom_(static_cast<std::size_t>(n_ + 1)) {
    for (Index v = 0; v <= n_; ++v) {
      auto& row = binom_[static_cast<std::size_t>(v)];
      row.assign(5, 0);
      row[0] = 1;
      for (int k = 1; k < 5 && k <= v; ++k)
        row[static_cast<std::size_t>(k)] = binom_[static_cast<std::size_t>(v - 1)][static_cast<std::size_t>(k - 1)] +
                                           (k <= v - 1 ? binom_[static_cast<std::size_t>(v - 1)][static_cast<std::size_t>(k)] : 0);
    }
    inverse_.assign(static_cast<std::size_t>(p), 0);
    for (int a = 1; a < p; ++a) {
      long long r = 1, b = a, e = p - 2;
      while (e > 0) {
        if (e & 1) r = r * b % p;
        b = b * b % p;
        e >>= 1;
      }
      inverse_[static_cast<std::size_t>(a)] = static_cast<int>(r);
    }
  }

  SimplexIndex binom(Index v, int k) const {
    if (k < 0 || v < k) return 0;
    return binom_[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)];
  }

  // vertices in decreasing order
  void vertices(SimplexIndex idx, int dim, std::vector<Index>& out) const {
    out.clear();
    Index upper = n_;
    for (int k = dim + 1; k >= 1; --k) {
      Index lo = k - 1, hi = upper - 1;  // largest v in [lo, hi] with C(v, k) <= idx
      while (lo < hi) {
        const Index mid = (lo + hi + 1) / 2;
        if (binom(mid, k) <= idx) lo = mid; else hi = mid - 1;
      }
      out.push_back(lo);
      idx -= binom(lo, k);
      upper = lo;
    }
  }

  double diameter(const std::vector<Index>& v) const {
    double out = 0;
    for (std::size_t a = 0; a < v.size(); ++a)
      for (std::size_t b = a + 1; b < v.size(); ++b) out = std::max(out, d_(v[a], v[b]));
    return out;
  }

  // Pushes every coface within the threshold, scaled by `scale`. With `emergent`, stops
  // early when the earliest coface has the simplex's own diameter and is not yet a pivot.
  std::optional<Entry> push_coboundary(SimplexIndex idx, int dim, int scale, Heap& heap,
                                       const std::unordered_map<SimplexIndex, Reduced>* emergent) {
    vertices(idx, dim, scratch_);
    const double diam = diameter(scratch_);
    const int k = dim;
    // suffix sums of the terms that keep their position (vertices below the new one)
    SimplexIndex below = idx;  // sum over all vertices of C(w[r], k + 1 - r)
    SimplexIndex above = 0;    // sum over vertices above the new one of C(w[r], k + 2 - r)
    std::size_t r_u = 0;
    bool checking = emergent != nullptr;
    for (Index u = n_ - 1; u >= 0; --u) {
      if (r_u < scratch_.size() && scratch_[r_u] == u) {
        below -= binom(u, k + 1 - static_cast<int>(r_u));
        above += binom(u, k + 2 - static_cast<int>(r_u));
        ++r_u;
        continue;
      }
      double cd = diam;
      for (Index w : scratch_) cd = std::max(cd, d_(u, w));
      if (cd > threshold_) continue;
      const SimplexIndex cidx = above + binom(u, k + 2 - static_cast<int>(r_u)) + below;
      const bool odd = ((k + 1 - static_cast<int>(r_u)) & 1) != 0;
      int coef = odd ? (p_ - scale) % p_ : scale;
      const Entry e{cd, cidx, coef};
      if (checking && cd == diam) {
        if (!emergent->count(cidx)) return e;
        checking = false;
      }
      heap.push(e);
    }
    return std::nullopt;
  }

  std::optional<Entry> pop_pivot(Heap& heap) const {
    while (!heap.empty()) {
      Entry e = heap.top();
      heap.pop();
      while (!heap.empty() && heap.top().index == e.index) {
        e.coef = (e.coef + heap.top().coef) % p_;
        heap.pop();
      }
      if (e.coef != 0) return e;
    }
    return std::nullopt;
  }

  std::optional<Entry> get_pivot(Heap& heap) const {
    auto e = pop_pivot(heap);
    if (e) heap.push(*e);
    return e;
  }

  // Reduces the coboundary columns of the given dim-simplices, processed in the given
  // order (reverse filtration). Returns the pivots, i.e. the paired (dim+1)-simplices.
  std::unordered_map<SimplexIndex, Reduced> reduce(const std::vector<std::pair<double, SimplexIndex>>& columns,
                                                   int dim, std::vector<PersistenceBar>& bars) {
    std::unordered_map<SimplexIndex, Reduced> pivots;
    pivots.reserve(columns.size());
    std::vector<std::pair<SimplexIndex, int>> reduction;
    for (const auto& [diam, idx] : columns) {
      reduction.assign(1, {idx, 1});
      Heap heap;
      std::optional<Entry> pivot = push_coboundary(idx, dim, 1, heap, &pivots);
      if (!pivot) pivot = get_pivot(heap);
      for (;;) {
        if (!pivot) {
          bars.push_back({diam, std::numeric_limits<double>::infinity()});
          break;
        }
        auto found = pivots.find(pivot->index);
        if (found == pivots.end()) {
          if (pivot->diam > diam) bars.push_back({diam, pivot->diam});
          std::sort(reduction.begin(), reduction.end());
          std::vector<std::pair<SimplexIndex, int>> merged;
          for (const auto& [s, c] : reduction) {
            if (!merged.empty() && merged.back().first == s) merged.back().second = (merged.back().second + c) % p_;
            else merged.emplace_back(s, c);
          }
          std::erase_if(merged, [](const auto& e) { return e.second == 0; });
          pivots.emplace(pivot->index, Reduced{pivot->coef, std::move(merged)});
          break;
        }
        const Reduced& other = found->second;
        const int factor = static_cast<int>(static_cast<long long>(p_ - pivot->coef) *
                                            inverse_[static_cast<std::size_t>(other.pivot_coef)] % p_);
        for (const auto& [s, c] : other.column) {
          const int scaled = static_cast<int>(static_cast<long long>(c) * factor % p_);
          reduction.emplace_back(s, scaled);
          push_coboundary(s, dim, scaled, heap, nullptr);
        }
        pivot = get_pivot(heap);
      }
    }
    return pivots;
  }

  Index size() const { return n_; }

 private:
  const MatrixXd& d_;
  Index n_;
  double threshold_;
  int p_;
  std::vector<std::vector<SimplexIndex>> binom_;
  std::vector<int> inverse_;
  std::vector<Index> scratch_;
};

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  Index find(Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      auto& q = parent[static_cast<std::size_t>(x)];
      q = parent[static_cast<std::size_t>(q)];
      x = q;
    }
    return x;
  }
};

bool reverse_filtration(const std::pair<double, SimplexIndex>& a, const std::pair<double, SimplexIndex>& b) {
  if (a.first != b.first) return a.first > b.first;
  return a.second < b.second;
}

}  // namespace

PersistenceDiagram rips_persistence(const MatrixXd& distances, const PersistenceOptions& options) {
  options.validate();
  const Index m0 = distances.rows();
  if (m0 < 1) throw TooFewPoints("persistence needs at least one point");
  if (distances.cols() != m0) throw DimensionMismatch("distance matrix must be square");
  if (!distances.allFinite()) throw NonFinite("distance matrix has non-finite entries");
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, distances.maxCoeff()))
    throw NotSymmetric();

  PersistenceDiagram out;
  out.prime = options.prime;
  out.landmarks = maxmin_landmarks(distances, options.landmark_cap);
  const Index n = static_cast<Index>(out.landmarks.size());
  MatrixXd d(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) d(a, b) = a == b ? 0.0 : distances(out.landmarks[a], out.landmarks[b]);
  d = (0.5 * (d + d.transpose())).eval();
  out.max_radius = options.max_radius ? *options.max_radius : 0.5 * d.maxCoeff();
  if (!(out.max_radius > 0)) out.max_radius = std::numeric_limits<double>::min();
  const double thr = out.max_radius;
  out.bars.assign(static_cast<std::size_t>(options.max_dim + 1), {});

  RipsComplex rips(d, thr, options.prime);

  // dimension 0: Kruskal over the edges in filtration order
  std::vector<std::pair<double, SimplexIndex>> edges;
  for (Index b = 1; b < n; ++b)
    for (Index a = 0; a < b; ++a)
      if (d(a, b) <= thr) edges.emplace_back(d(a, b), a + rips.binom(b, 2));
  if (edges.size() > options.simplex_budget) throw TooManySimplices("too many edges below max_radius");
  std::sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) { return reverse_filtration(y, x); });
  UnionFind uf(n);
  std::unordered_set<SimplexIndex> tree;
  std::vector<Index> vs;
  for (const auto& [diam, idx] : edges) {
    rips.vertices(idx, 1, vs);
    const Index a = uf.find(vs[0]), b = uf.find(vs[1]);
    if (a == b) continue;
    uf.parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    tree.insert(idx);
    if (diam > 0) out.bars[0].push_back({0.0, diam});
  }
  for (Index v = 0; v < n; ++v)
    if (uf.find(v) == v) out.bars[0].push_back({0.0, std::numeric_limits<double>::infinity()});

  std::unordered_map<SimplexIndex, Reduced> cleared;
  for (int dim = 1; dim <= options.max_dim; ++dim) {
    std::vector<std::pair<double, SimplexIndex>> columns;
    if (dim == 1) {
      for (const auto& e : edges)
        if (!tree.count(e.second)) columns.push_back(e);
    } else {
      for (Index c = 2; c < n; ++c)
        for (Index b = 1; b < c; ++b) {
          if (d(b, c) > thr) continue;
          for (Index a = 0; a < b; ++a) {
            const double diam = std::max({d(a, b), d(a, c), d(b, c)});
            if (diam > thr) continue;
            const SimplexIndex idx = a + rips.binom(b, 2) + rips.binom(c, 3);
            if (!cleared.count(idx)) columns.emplace_back(diam, idx);
            if (columns.size() > options.simplex_budget) throw TooManySimplices("too many triangles below max_radius");
          }
        }
    }
    std::sort(columns.begin(), columns.end(), reverse_filtration);
    cleared = rips.reduce(columns, dim, out.bars[static_cast<std::size_t>(dim)]);
  }
  for (auto& b : out.bars)
    std::sort(b.begin(), b.end(), [](const PersistenceBar& x, const PersistenceBar& y) {
      return x.birth != y.birth ? x.birth < y.birth : x.death < y.death;
    });
  return out;
}

PersistenceDiagram rips_persistence(const Configuration& points, const PersistenceOptions& options) {
  return rips_persistence(pairwise_distances(points.compact()), options);
}

double max_bar_length(const PersistenceDiagram& diagram, int q) {
  if (q < 0 || q > diagram.max_dim()) throw InvalidArgument("homology dimension not in the diagram");
  double best = 0;
  for (const auto& b : diagram.bars[static_cast<std::size_t>(q)])
    if (!b.infinite()) best = std::max(best, b.length());
  return best;
}

double max_bar_length_capped(const PersistenceDiagram& diagram, int q) {
  if (q < 0 || q > diagram.max_dim()) throw InvalidArgument("homology dimension not in the diagram");
  double best = 0;
  for (const auto& b : diagram.bars[static_cast<std::size_t>(q)])
    best = std::max(best, std::min(b.death, diagram.max_radius) - b.birth);
  return best;
}

}  // namespace robust_coords
