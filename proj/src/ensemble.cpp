#include "robust_coords/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "robust_coords/parallel.hpp"
#include "robust_coords/procrustes.hpp"
#include "robust_coords/synth.hpp"

namespace robust_coords {

using Eigen::MatrixXd;

namespace {

// uniform in [0, bound) without relying on library distribution internals
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r < limit) return r % bound;
  }
}

std::vector<Index> sample_without_replacement(Index n, Index size, std::mt19937_64& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (Index r = 0; r < size; ++r) {
    const Index pick = r + static_cast<Index>(bounded(rng, static_cast<std::uint64_t>(n - r)));
    std::swap(pool[static_cast<std::size_t>(r)], pool[static_cast<std::size_t>(pick)]);
  }
  pool.resize(static_cast<std::size_t>(size));
  std::sort(pool.begin(), pool.end());
  return pool;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

bool in_unit_interval(double f) { return f > 0 && f <= 1; }

enum Stream : std::uint64_t { kSubsamples = 1, kNoise = 2, kRepresentatives = 3 };

}  // namespace

void PipelineConfig::validate() const {
  if (n_subsamples < 1) throw InvalidArgument("n_subsamples must be at least 1");
  if (dimred.empty()) throw InvalidArgument("the dimred mesh is empty");
  for (const auto& p : dimred) {
    p.validate();
    if (p.target_dim != dimred.front().target_dim) throw InvalidArgument("the dimred mesh mixes target dimensions");
  }
  if (subsample_size < target_dim() + 2) throw InvalidArgument("subsample_size must be at least target_dim + 2");
  if (!in_unit_interval(cluster_link_fraction) || !in_unit_interval(dense_median_fraction) ||
      !in_unit_interval(ph_bar_fraction))
    throw InvalidArgument("fractions must lie in (0, 1]");
  if (!(essdim_rel_tol > 0) || essdim_rel_tol >= 1) throw InvalidArgument("essdim_rel_tol must lie in (0, 1)");
  if (min_cluster_size < 1) throw InvalidArgument("min_cluster_size must be positive");
  if (ph_representatives < 1) throw InvalidArgument("ph_representatives must be positive");
  if (!(subsample_noise >= 0) || !std::isfinite(subsample_noise))
    throw InvalidArgument("subsample_noise must be finite and non-negative");
  als.validate();
  ph.validate();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t i) {
  std::uint64_t z = base;
  for (std::uint64_t word : {stream, i}) {
    z += 0x9e3779b97f4a7c15ULL + word;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
  }
  return z;
}

std::vector<std::vector<Index>> generate_subsamples(Index n, Index size, Index count, std::uint64_t seed) {
  if (size < 1 || size > n) throw SizeTooLarge("subsample size must lie in [1, n]");
  if (count < 0) throw InvalidArgument("negative subsample count");
  std::vector<std::vector<Index>> out;
  for (Index s = 0; s < count; ++s) {
    std::mt19937_64 rng(derive_seed(seed, kSubsamples, static_cast<std::uint64_t>(s)));
    out.push_back(sample_without_replacement(n, size, rng));
  }
  return out;
}

std::vector<Configuration> Ensemble::configs() const {
  std::vector<Configuration> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.output.config);
  return out;
}

Ensemble build_ensemble(const Configuration& x, const PipelineConfig& config) {
  config.validate();
  const auto present = x.indices();
  Ensemble out;
  for (auto& positions : generate_subsamples(x.count(), config.subsample_size, config.n_subsamples, config.seed)) {
    for (auto& p : positions) p = present[static_cast<std::size_t>(p)];
    out.subsamples.push_back(std::move(positions));
  }
  const std::size_t n_params = config.dimred.size();
  const std::size_t items = out.subsamples.size() * n_params;
  std::vector<std::optional<EmbeddingOutput>> results(items);
  std::vector<std::string> errors(items);
  parallel_for(items, [&](std::size_t item) {
    const std::size_t s = item / n_params, p = item % n_params;
    Configuration sub = x.restricted_to(out.subsamples[s]);
    if (config.subsample_noise > 0)
      sub = add_gaussian_noise(sub, config.subsample_noise, derive_seed(config.seed, kNoise, s));
    try {
      results[item] = embed(sub, config.dimred[p]);
    } catch (const Error& e) {
      errors[item] = e.what();
    }
  });
  for (std::size_t item = 0; item < items; ++item) {
    const Index s = static_cast<Index>(item / n_params), p = static_cast<Index>(item % n_params);
    if (results[item]) out.members.push_back({s, p, std::move(*results[item])});
    else out.failures.push_back({s, p, errors[item]});
  }
  return out;
}

MatrixXd dissimilarity_matrix(std::span<const Configuration> configs, Index* sentinel_pairs) {
  const Index k = static_cast<Index>(configs.size());
  MatrixXd d = MatrixXd::Zero(k, k);
  std::vector<std::uint8_t> empty(static_cast<std::size_t>(k * k), 0);
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t row) {
    const Index a = static_cast<Index>(row);
    for (Index b = a + 1; b < k; ++b) {
      const auto& x = configs[static_cast<std::size_t>(a)];
      const auto& y = configs[static_cast<std::size_t>(b)];
      if (x.dim() != y.dim()) throw DimensionMismatch("ensemble members have different dimensions");
      const auto shared = common_indices(x.mask(), y.mask());
      if (shared.empty()) {
        empty[static_cast<std::size_t>(a * k + b)] = 1;
        continue;
      }
      const MatrixXd xs = x.gather(shared), ys = y.gather(shared);
      const double r = xs == ys ? 0.0 : affine_procrustes(xs, ys).distance;
      d(a, b) = r / std::sqrt(static_cast<double>(shared.size()));
    }
  });
  Index sentinels = 0;
  for (Index a = 0; a < k; ++a)
    for (Index b = a + 1; b < k; ++b) sentinels += empty[static_cast<std::size_t>(a * k + b)];
  if (sentinels > 0) {
    double largest = 0;
    for (Index a = 0; a < k; ++a)
      for (Index b = a + 1; b < k; ++b)
        if (!empty[static_cast<std::size_t>(a * k + b)]) largest = std::max(largest, d(a, b));
    const double sentinel = largest > 0 ? 2 * largest : 1.0;
    for (Index a = 0; a < k; ++a)
      for (Index b = a + 1; b < k; ++b)
        if (empty[static_cast<std::size_t>(a * k + b)]) d(a, b) = sentinel;
  }
  if (sentinel_pairs) *sentinel_pairs = sentinels;
  d.triangularView<Eigen::StrictlyLower>() = d.transpose().triangularView<Eigen::StrictlyLower>();
  return d;
}

double off_diagonal_median(const MatrixXd& d) {
  std::vector<double> v;
  for (Index b = 1; b < d.cols(); ++b)
    for (Index a = 0; a < b; ++a) v.push_back(d(a, b));
  return median_of(std::move(v));
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pending: return "pending";
    case Verdict::good: return "good";
    case Verdict::rejected_sparse: return "rejected_sparse";
    case Verdict::rejected_dim: return "rejected_dim";
    case Verdict::rejected_ph: return "rejected_ph";
  }
  return "unknown";
}

double embedding_scale(std::span<const Configuration> configs) {
  std::vector<double> radii;
  for (const auto& x : configs) {
    const MatrixXd p = x.compact();
    radii.push_back(std::sqrt((p.colwise() - p.rowwise().mean()).squaredNorm() / static_cast<double>(p.cols())));
  }
  return median_of(std::move(radii));
}

ClusterThresholds cluster_thresholds(const MatrixXd& d, const PipelineConfig& config, double embedding_scale) {
  ClusterThresholds t;
  t.median_distance = off_diagonal_median(d);
  t.embedding_scale = embedding_scale;
  t.scale = std::max(t.median_distance, embedding_scale);
  t.link_threshold = config.cluster_link_fraction * t.scale;
  t.dense_threshold = config.dense_median_fraction * t.scale;
  return t;
}

std::vector<ClusterReport> cluster_ensemble(const MatrixXd& d, const PipelineConfig& config, double embedding_scale) {
  if (d.rows() != d.cols()) throw DimensionMismatch("dissimilarity matrix must be square");
  if ((d - d.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, d.cwiseAbs().maxCoeff())) throw NotSymmetric();
  const Index k = d.rows();
  const double tau = cluster_thresholds(d, config, embedding_scale).link_threshold;
  std::vector<Index> parent(static_cast<std::size_t>(k));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](Index a) {
    while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    return a;
  };
  for (Index a = 0; a < k; ++a)
    for (Index b = a + 1; b < k; ++b)
      if (d(a, b) <= tau) {
        const Index ra = find(a), rb = find(b);
        if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
      }
  // roots are the smallest members, so visiting in order yields clusters ordered by smallest member
  std::vector<Index> slot(static_cast<std::size_t>(k), -1);
  std::vector<ClusterReport> out;
  for (Index a = 0; a < k; ++a) {
    const Index r = find(a);
    if (slot[static_cast<std::size_t>(r)] < 0) {
      slot[static_cast<std::size_t>(r)] = static_cast<Index>(out.size());
      out.emplace_back();
    }
    out[static_cast<std::size_t>(slot[static_cast<std::size_t>(r)])].members.push_back(a);
  }
  for (auto& c : out) {
    std::vector<double> intra;
    for (std::size_t i = 0; i < c.members.size(); ++i)
      for (std::size_t j = i + 1; j < c.members.size(); ++j) intra.push_back(d(c.members[i], c.members[j]));
    c.median_intra_distance = median_of(std::move(intra));
    if (static_cast<Index>(c.members.size()) < config.min_cluster_size) c.verdict = Verdict::rejected_sparse;
  }
  return out;
}

std::optional<Index> select_good_cluster(std::vector<ClusterReport>& clusters, std::span<const Configuration> configs,
                                         const PipelineConfig& config, const ClusterThresholds& thresholds) {
  const double dense_threshold = thresholds.dense_threshold;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    auto& cl = clusters[c];
    cl.dense = cl.median_intra_distance <= dense_threshold;
    if (cl.verdict != Verdict::pending) continue;
    if (!cl.dense) {
      cl.verdict = Verdict::rejected_sparse;
      continue;
    }
    std::mt19937_64 rng(derive_seed(config.seed, kRepresentatives, c));
    const Index size = static_cast<Index>(cl.members.size());
    cl.representatives.clear();
    for (Index pos : sample_without_replacement(size, std::min(config.ph_representatives, size), rng))
      cl.representatives.push_back(cl.members[static_cast<std::size_t>(pos)]);

    const std::size_t r = cl.representatives.size();
    cl.essential_dims.assign(r, 0);
    for (std::size_t i = 0; i < r; ++i)
      cl.essential_dims[i] = essential_dimension(configs[static_cast<std::size_t>(cl.representatives[i])], config.essdim_rel_tol);
    const Index d = configs[static_cast<std::size_t>(cl.representatives.front())].dim();
    if (std::any_of(cl.essential_dims.begin(), cl.essential_dims.end(), [&](Index e) { return e < d; })) {
      cl.verdict = Verdict::rejected_dim;
      continue;
    }
    cl.ph1_max_bars.assign(r, 0);
    cl.rep_diameters.assign(r, 0);
    parallel_for(r, [&](std::size_t i) {
      const MatrixXd dist = pairwise_distances(configs[static_cast<std::size_t>(cl.representatives[i])].compact());
      PersistenceOptions opts = config.ph;
      opts.max_dim = std::max(opts.max_dim, 1);
      cl.ph1_max_bars[i] = max_bar_length_capped(rips_persistence(dist, opts), 1);
      cl.rep_diameters[i] = dist.maxCoeff();
    });
    double score = 0;
    for (std::size_t i = 0; i < r; ++i)
      score = std::max(score, cl.rep_diameters[i] > 0 ? cl.ph1_max_bars[i] / cl.rep_diameters[i] : 0.0);
    cl.ph1_score = score;
  }

  std::optional<Index> best;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const auto& cl = clusters[c];
    if (cl.verdict != Verdict::pending) continue;
    if (!best) {
      best = static_cast<Index>(c);
      continue;
    }
    const auto& b = clusters[static_cast<std::size_t>(*best)];
    const bool better = *cl.ph1_score != *b.ph1_score ? *cl.ph1_score < *b.ph1_score
                        : cl.members.size() != b.members.size() ? cl.members.size() > b.members.size()
                                                                 : cl.median_intra_distance < b.median_intra_distance;
    if (better) best = static_cast<Index>(c);
  }
  if (best && *clusters[static_cast<std::size_t>(*best)].ph1_score > config.ph_bar_fraction) best.reset();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    auto& cl = clusters[c];
    if (cl.verdict != Verdict::pending) continue;
    cl.verdict = best && *best == static_cast<Index>(c) ? Verdict::good : Verdict::rejected_ph;
  }
  return best;
}

ClusterAverage average_cluster(std::span<const Configuration> configs, const std::vector<Index>& members,
                               const Mask& universe, const AlsOptions& als) {
  if (members.empty()) throw InvalidArgument("cannot average an empty cluster");
  std::vector<Configuration> chosen;
  for (Index m : members) chosen.push_back(configs[static_cast<std::size_t>(m)]);
  AlsOptions opts = als;
  if (opts.variant == AlsVariant::refined) opts.variant = AlsVariant::missing_points;
  const GpaProblem problem(std::move(chosen), opts);
  if (problem.n_global() != universe.n_global()) throw DimensionMismatch("cluster and universe have different global sizes");
  AlignmentResult alignment = normalize_first_fixed(als_align(problem));
  std::vector<Index> outliers;
  for (Index j : universe.indices())
    if (!problem.support().contains(j)) outliers.push_back(j);
  Configuration embedding = alignment.mean;
  return {std::move(embedding), std::move(outliers), std::move(alignment)};
}

PipelineReport run_pipeline(const Configuration& x, const PipelineConfig& config) {
  config.validate();
  return run_pipeline(x, build_ensemble(x, config), config);
}

PipelineReport run_pipeline(const Configuration& x, Ensemble ensemble, const PipelineConfig& config) {
  config.validate();
  PipelineReport report;
  report.config = config;
  report.universe = x.mask();
  report.ensemble = std::move(ensemble);
  if (report.ensemble.members.empty()) throw NoGoodCluster(std::move(report));

  const auto configs = report.ensemble.configs();
  report.dissimilarity = dissimilarity_matrix(configs, &report.sentinel_pairs);
  report.thresholds = cluster_thresholds(report.dissimilarity, config, embedding_scale(configs));
  if (configs.size() >= 4) {
    try {
      report.mds_view = classical_mds(report.dissimilarity, 2);
    } catch (const Error&) {
    }
  }
  report.clusters = cluster_ensemble(report.dissimilarity, config, report.thresholds.embedding_scale);
  report.good_cluster = select_good_cluster(report.clusters, configs, config, report.thresholds);
  if (!report.good_cluster) throw NoGoodCluster(std::move(report));

  auto avg = average_cluster(configs, report.clusters[static_cast<std::size_t>(*report.good_cluster)].members,
                             report.universe, config.als);
  report.embedding = std::move(avg.embedding);
  report.outliers = std::move(avg.outliers);
  report.alignment = std::move(avg.alignment);
  return report;
}

}  // namespace robust_coords
