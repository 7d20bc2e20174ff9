// Acceptance runs. `acceptance [N ...]` runs the listed criteria (all by default) and
// prints one "criterion N: PASS|FAIL ..." line each; the exit code is nonzero when any
// of them fails.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "robust_coords/dimred.hpp"
#include "robust_coords/ensemble.hpp"
#include "robust_coords/gpa.hpp"
#include "robust_coords/io.hpp"
#include "robust_coords/parallel.hpp"
#include "robust_coords/procrustes.hpp"
#include "robust_coords/synth.hpp"
#include "robust_coords/tda.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace robust_coords;
using Eigen::MatrixXd;
using fixtures::gaussian;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

fs::path workdir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "robust_coords_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Manifest from the source tree with its input redirected to `data`.
RunManifest load_manifest(const std::string& name, const fs::path& data, const fs::path& out) {
  std::ifstream in(fs::path(ACCEPTANCE_MANIFESTS) / name);
  if (!in) throw IoError("cannot open manifest " + name);
  RunManifest m = manifest_from_json(nlohmann::json::parse(in), fs::path(ACCEPTANCE_MANIFESTS));
  m.input_path = data;
  m.output_dir = out;
  return m;
}

// Runs a manifest the way the CLI does, keeping the report on NoGoodCluster.
std::pair<PipelineReport, std::string> run_manifest(const RunManifest& m) {
  const Configuration x = read_points_csv(m.input_path);
  try {
    PipelineReport r = run_pipeline(x, m.config);
    write_report(r, "ok", m.output_dir, m.plots);
    return {std::move(r), "ok"};
  } catch (const NoGoodCluster& e) {
    write_report(e.report(), "no_good_cluster", m.output_dir, m.plots);
    return {e.report(), "no_good_cluster"};
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

bool nonincreasing(const std::vector<double>& trace, double slack) {
  for (std::size_t s = 1; s < trace.size(); ++s)
    if (trace[s] > trace[s - 1] + slack) return false;
  return true;
}

double chart_diameter(const Configuration& x) { return pairwise_distances(x.compact()).maxCoeff(); }

// RMS Procrustes distance between an embedding and the ground-truth chart on the
// indices both contain.
double chart_error(const Configuration& emb, const Configuration& truth) {
  std::vector<Index> shared;
  for (Index j : emb.indices())
    if (j < truth.n_global() && truth.contains(j)) shared.push_back(j);
  const MatrixXd a = emb.gather(shared), b = truth.gather(shared);
  return affine_procrustes(a, b).distance / std::sqrt(static_cast<double>(shared.size()));
}

// ---------------------------------------------------------------------------------------

Outcome closed_form_vs_oracle() {
  Outcome o;
  std::mt19937_64 rng(101);
  double worst2 = 0, worst3 = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const Index d = rep < 50 ? 2 : 3;
    const MatrixXd x = gaussian(d, 20, rng);
    // half near-congruent pairs, half unrelated ones
    const MatrixXd y = rep % 2 == 0 ? MatrixXd(fixtures::random_motion(d, rng).apply(x) + gaussian(d, 20, rng, 0.2))
                                    : gaussian(d, 20, rng);
    const double got = procrustes_distance(Configuration(x), Configuration(y));
    const double want = d == 2 ? oracle::grid_distance_2d(x, y) : oracle::restart_distance_3d(x, y, 8, 1000 + rep);
    const double rel = std::abs(got - want) / want;
    (d == 2 ? worst2 : worst3) = std::max(d == 2 ? worst2 : worst3, rel);
  }
  o.detail << "max rel diff d=2 " << fmt(worst2) << ", d=3 " << fmt(worst3);
  o.require(worst2 <= 1e-5 && worst3 <= 1e-5, "relative difference above 1e-5");
  return o;
}

Outcome als_correctness() {
  Outcome o;
  std::mt19937_64 rng(102);
  double worst_pair = 0, worst_trace = 0;
  int traces = 0, increasing = 0;
  auto opts = [](AlsVariant v) {
    AlsOptions a;
    a.variant = v;
    return a;
  };
  for (int rep = 0; rep < 1000; ++rep) {
    const Index d = 2 + rep % 2, n = 10 + rep % 11;
    const Configuration x(gaussian(d, n, rng)), y(gaussian(d, n, rng));
    const auto r = als_align(GpaProblem({x, y}, opts(AlsVariant::refined)));
    const double dist = procrustes_distance(x, y);
    worst_pair = std::max(worst_pair, std::abs(r.loss - dist * dist / 4));
    ++traces, increasing += !nonincreasing(r.loss_trace, 1e-12);
  }
  for (int rep = 0; rep < 200; ++rep) {
    const Index d = 2 + rep % 2, k = 3 + rep % 4;
    auto full = fixtures::noisy_copies(d, 15, k, 0.6, rng);
    const auto ref = als_align(GpaProblem(full, opts(AlsVariant::refined)));
    const auto mp = als_align(GpaProblem(full, opts(AlsVariant::missing_points)));
    if (mp.loss_trace.size() != ref.loss_trace.size()) {
      worst_trace = std::numeric_limits<double>::infinity();
    } else {
      for (std::size_t s = 0; s < ref.loss_trace.size(); ++s)
        worst_trace = std::max(worst_trace, std::abs(mp.loss_trace[s] - ref.loss_trace[s]));
    }
    const auto basic = als_align(GpaProblem(full, opts(AlsVariant::basic)));
    auto masked = fixtures::masked_copies(d, 15, k, 0.6, 0.6, rng);
    const auto mm = als_align(GpaProblem(masked, opts(AlsVariant::missing_points)));
    for (const auto* r : {&ref, &mp, &basic, &mm}) ++traces, increasing += !nonincreasing(r->loss_trace, 1e-12);
  }
  o.detail << "k=2 max |loss - D^2/4| " << fmt(worst_pair) << ", full-mask trace diff " << fmt(worst_trace) << ", "
           << increasing << "/" << traces << " traces increasing";
  o.require(worst_pair <= 1e-8, "k=2 optimum");
  o.require(worst_trace <= 1e-10, "missing-points vs refined traces");
  o.require(increasing == 0, "monotone traces");
  return o;
}

double path_loss(const GpaProblem& p, const AlignmentResult& r, const std::vector<MatrixXd>& a, double t) {
  std::vector<RigidMotion> g;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const MatrixXd e = fixtures::expm(a[i] * t);
    g.push_back({e * r.motions[i].rotation, e * r.motions[i].translation});
  }
  return gpa_loss(p, g);
}

Outcome convergence_diagnostics() {
  Outcome o;
  std::mt19937_64 rng(103);
  double worst_sym = 0;
  int runs = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const Index d = 2 + rep % 2, k = 3 + rep % 4;
    const auto xs = rep % 3 == 2 ? fixtures::masked_copies(d, 20, k, 0.5, 0.7, rng) : fixtures::noisy_copies(d, 20, k, 0.5, rng);
    AlsOptions opt;
    opt.variant = rep % 3 == 0 ? AlsVariant::refined : AlsVariant::missing_points;
    const auto r = als_align(GpaProblem(xs, opt));
    for (double s : r.symmetry_residuals) worst_sym = std::max(worst_sym, s);
    ++runs;
  }
  double worst_h = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const Index d = 2 + rep % 2, k = 3 + rep % 3;
    const GpaProblem p(fixtures::noisy_copies(d, 15, k, 0.4, rng));
    const auto r = als_align(p);
    std::vector<MatrixXd> a(static_cast<std::size_t>(k), MatrixXd::Zero(d, d));
    for (Index i = 1; i < k; ++i) a[static_cast<std::size_t>(i)] = fixtures::random_antisymmetric(d, rng);
    const double h = 1e-4;
    const double fd = (path_loss(p, r, a, h) - 2 * path_loss(p, r, a, 0) + path_loss(p, r, a, -h)) / (h * h);
    const double q = hessian_form(p, r, a);
    worst_h = std::max(worst_h, std::abs(q - fd) / std::max(1.0, std::abs(fd)));
  }
  o.detail << "max symmetry residual " << fmt(worst_sym) << " over " << runs << " runs, max Hessian rel diff "
           << fmt(worst_h);
  o.require(worst_sym <= 1e-6, "symmetry residuals");
  o.require(worst_h <= 1e-4, "Hessian vs finite differences");
  return o;
}

// noise matrices E_1..E_k with sum_i E_i = 0
std::vector<MatrixXd> balanced_noise(Index d, Index n, Index k, std::mt19937_64& rng) {
  std::vector<MatrixXd> e;
  MatrixXd sum = MatrixXd::Zero(d, n);
  for (Index i = 0; i < k; ++i) e.push_back(gaussian(d, n, rng)), sum += e.back();
  for (auto& m : e) m -= sum / static_cast<double>(k);
  return e;
}

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
  return sxy / sxx;
}

Outcome stability_scaling() {
  Outcome o;
  const Index d = 2, n = 50, k = 5;
  const std::vector<double> eps{1e-2, 1e-3, 1e-4, 1e-5};
  const int instances = 10;
  AlsOptions opt;
  opt.variant = AlsVariant::refined;
  opt.tol = 1e-30;
  opt.max_iter = 100000;
  auto mean_of = [&](const std::vector<Configuration>& xs) { return als_align(GpaProblem(xs, opt)).mean; };

  std::vector<double> log_eps, log_near, log_generic;
  std::mt19937_64 rng(104);
  std::vector<MatrixXd> base, noise_dirs;
  std::vector<std::vector<MatrixXd>> noise;
  std::vector<std::vector<RigidMotion>> motions;
  std::vector<std::vector<MatrixXd>> generic;
  for (int s = 0; s < instances; ++s) {
    base.push_back(gaussian(d, n, rng));
    noise.push_back(balanced_noise(d, n, k, rng));
    std::vector<RigidMotion> g;
    std::vector<MatrixXd> y;
    for (Index i = 0; i < k; ++i) g.push_back(fixtures::random_motion(d, rng)), y.push_back(gaussian(d, n, rng));
    motions.push_back(g);
    generic.push_back(y);
  }
  std::vector<Configuration> generic_base_mean;
  for (int s = 0; s < instances; ++s) {
    std::vector<Configuration> xs;
    for (const auto& y : generic[static_cast<std::size_t>(s)]) xs.emplace_back(y);
    generic_base_mean.push_back(mean_of(xs));
  }
  const double rn = std::sqrt(static_cast<double>(n));
  for (double e : eps) {
    double near_log = 0, gen_log = 0;
    for (int s = 0; s < instances; ++s) {
      const auto u = static_cast<std::size_t>(s);
      std::vector<Configuration> near, gen;
      for (Index i = 0; i < k; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        near.emplace_back(motions[u][iu].apply(MatrixXd(base[u] + e * noise[u][iu])));
        gen.emplace_back(MatrixXd(generic[u][iu] + e * noise[u][iu]));
      }
      near_log += std::log(procrustes_distance(mean_of(near), Configuration(base[u])) / rn);
      gen_log += std::log(procrustes_distance(mean_of(gen), generic_base_mean[u]) / rn);
    }
    log_eps.push_back(std::log(e));
    log_near.push_back(near_log / instances);
    log_generic.push_back(gen_log / instances);
  }
  const double s_near = slope(log_eps, log_near), s_gen = slope(log_eps, log_generic);
  o.detail << "near-isometric slope " << fmt(s_near) << ", generic slope " << fmt(s_gen) << " (displacements";
  for (std::size_t i = 0; i < eps.size(); ++i)
    o.detail << " " << fmt(std::exp(log_near[i]), 3) << "/" << fmt(std::exp(log_generic[i]), 3);
  o.detail << ")";
  o.require(std::abs(s_near - 2) <= 0.3, "near-isometric slope 2 +- 0.3");
  o.require(std::abs(s_gen - 1) <= 0.3, "generic slope 1 +- 0.3");
  return o;
}

// PH1 statistic used by the cluster selection: longest bar (capped) over the chart's diameter.
double ph1_statistic(const Configuration& x, const PersistenceOptions& base) {
  PersistenceOptions p = base;
  p.max_dim = 1;
  const auto diag = rips_persistence(x, p);
  return max_bar_length_capped(diag, 1) / chart_diameter(x);
}

// `count` positions from `pool`, seeded, without replacement
std::vector<Index> sample(std::vector<Index> pool, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(count, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

constexpr double kRollGap = 2 * std::numbers::pi;  // radial distance between neighbouring sheets

Outcome swiss_roll_noise() {
  Outcome o;
  const fs::path w = workdir("swiss_noise");
  const auto roll = swiss_roll(2000, 501);
  const double sigma = 0.05 * kRollGap;
  write_points_csv(w / "points.csv", add_gaussian_noise(roll.points3d, sigma, 502));
  const RunManifest m = load_manifest("swiss_noise.json", w / "points.csv", w / "out");
  const auto [r, status] = run_manifest(m);
  const double diameter = chart_diameter(roll.intrinsic);
  const double gamma = m.config.ph_bar_fraction;
  o.detail << "sigma " << fmt(sigma) << ", " << r.ensemble.members.size() << " members, status " << status;
  o.require(r.embedding.has_value(), "a good cluster");
  if (r.embedding) {
    const double err = chart_error(*r.embedding, roll.intrinsic);
    o.detail << ", good cluster " << r.clusters[static_cast<std::size_t>(*r.good_cluster)].members.size()
             << " members, RMS error " << fmt(err) << " = " << fmt(100 * err / diameter, 3) << "% of diameter "
             << fmt(diameter);
    o.require(err <= 0.05 * diameter, "distance to the chart <= 5% of diameter");
  }

  // ground-truth split of the ensemble, then the PH1 statistic on a sample of each side
  const auto configs = r.ensemble.configs();
  std::vector<Index> unrolled, coiled;
  for (std::size_t i = 0; i < configs.size(); ++i)
    (chart_error(configs[i], roll.intrinsic) <= 0.05 * diameter ? unrolled : coiled).push_back(static_cast<Index>(i));
  double max_unrolled = 0, min_coiled = std::numeric_limits<double>::infinity();
  std::vector<double> coiled_stats;
  for (Index i : sample(unrolled, 20, 503))
    max_unrolled = std::max(max_unrolled, ph1_statistic(configs[static_cast<std::size_t>(i)], m.config.ph));
  for (Index i : sample(coiled, 20, 504)) {
    coiled_stats.push_back(ph1_statistic(configs[static_cast<std::size_t>(i)], m.config.ph));
    min_coiled = std::min(min_coiled, coiled_stats.back());
  }
  std::sort(coiled_stats.begin(), coiled_stats.end());
  o.detail << "; " << unrolled.size() << " unrolled / " << coiled.size() << " coiled members, PH1/diameter max unrolled "
           << fmt(max_unrolled) << ", min coiled " << fmt(min_coiled);
  if (!coiled_stats.empty()) o.detail << " (median coiled " << fmt(coiled_stats[coiled_stats.size() / 2]) << ")";
  o.detail << ", gamma " << gamma;
  o.require(!unrolled.empty() && !coiled.empty(), "both kinds of chart present");
  o.require(max_unrolled <= gamma, "unrolled <= gamma");
  o.require(min_coiled >= 3 * gamma, "coiled >= 3 gamma");
  return o;
}

Outcome swiss_roll_outliers() {
  Outcome o;
  const fs::path w = workdir("swiss_outliers");
  const auto roll = swiss_roll(2000, 601);
  const auto [points, injected] = add_uniform_outliers(roll.points3d, 100, 602);
  write_points_csv(w / "points.csv", points);
  const RunManifest m = load_manifest("swiss_outliers.json", w / "points.csv", w / "out");
  const auto [r, status] = run_manifest(m);
  const double diameter = chart_diameter(roll.intrinsic);
  o.detail << r.ensemble.members.size() << " members, status " << status;
  o.require(r.embedding.has_value(), "a good cluster");
  if (!r.embedding) return o;
  const double err = chart_error(*r.embedding, roll.intrinsic);
  const std::set<Index> listed(r.outliers.begin(), r.outliers.end());
  int excluded = 0;
  for (Index j : injected) excluded += listed.count(j) > 0 || !r.embedding->contains(j);
  o.detail << ", good cluster " << r.clusters[static_cast<std::size_t>(*r.good_cluster)].members.size()
           << " members, RMS error " << fmt(100 * err / diameter, 3) << "% of diameter, " << excluded
           << "/100 injected outliers excluded, " << r.outliers.size() << " reported outliers";
  o.require(err <= 0.05 * diameter, "unrolled");
  o.require(excluded >= 80, ">= 80% of injected outliers excluded");
  return o;
}

Outcome parameter_sweep() {
  Outcome o;
  const auto roll = swiss_roll(2000, 701);
  PipelineConfig c;
  c.n_subsamples = 1;
  c.subsample_size = 2000;
  c.seed = 7;
  c.dimred.clear();
  for (int i = 0; i < 30; ++i)
    c.dimred.push_back(EmbeddingParams{EmbeddingMethod::isomap, 2, EpsilonRule{1.5 + 7.0 * i / 29}, 0});
  PipelineReport r;
  try {
    r = run_pipeline(roll.points3d, c);
  } catch (const NoGoodCluster& e) {
    r = e.report();
  }
  const double diameter = chart_diameter(roll.intrinsic);
  std::size_t multi = 0;
  for (const auto& cl : r.clusters) multi += cl.members.size() >= 2;
  o.detail << r.ensemble.members.size() << " members, " << r.clusters.size() << " single-linkage clusters (" << multi
           << " non-singleton)";
  o.require(r.clusters.size() >= 2, ">= 2 clusters");
  o.require(r.good_cluster.has_value(), "an unrolled cluster");
  if (!r.good_cluster) return o;
  const auto& good = r.clusters[static_cast<std::size_t>(*r.good_cluster)];
  std::vector<Index> params;
  for (Index i : good.members) params.push_back(r.ensemble.members[static_cast<std::size_t>(i)].param);
  std::sort(params.begin(), params.end());
  const bool contiguous = params.back() - params.front() + 1 == static_cast<Index>(params.size());
  const double err = chart_error(*r.embedding, roll.intrinsic);
  double inter = 0;
  const std::set<Index> in_good(good.members.begin(), good.members.end());
  for (Index a : good.members)
    for (Index b = 0; b < r.dissimilarity.rows(); ++b)
      if (!in_good.count(b)) inter = std::max(inter, r.dissimilarity(a, b));
  auto eps_of = [&](Index p) { return std::get<EpsilonRule>(c.dimred[static_cast<std::size_t>(p)].neighbor_rule).epsilon; };
  o.detail << ", unrolled cluster eps " << fmt(eps_of(params.front())) << ".." << fmt(eps_of(params.back())) << " ("
           << params.size() << " values, " << (contiguous ? "contiguous" : "not contiguous") << "), RMS error "
           << fmt(100 * err / diameter, 3) << "% of diameter, max inter " << fmt(inter) << " vs median intra "
           << fmt(good.median_intra_distance);
  o.require(contiguous, "unrolled cluster contiguous in eps");
  o.require(err <= 0.05 * diameter, "good cluster is unrolled");
  o.require(inter >= 5 * good.median_intra_distance, "inter >= 5x intra");
  return o;
}

Outcome buckyball_signature() {
  Outcome o;
  const fs::path w = workdir("buckyball");
  write_points_csv(w / "points.csv", buckyball(0, 0));
  const RunManifest m = load_manifest("buckyball.json", w / "points.csv", w / "out");
  const auto [r, status] = run_manifest(m);
  o.detail << r.ensemble.members.size() << " members, status " << status;
  o.require(status == "no_good_cluster", "NoGoodCluster");

  const MatrixXd& d = r.dissimilarity;
  double bars[2][3] = {};
  for (int f = 0; f < 2; ++f) {
    PersistenceOptions p;
    p.max_dim = 2;
    p.prime = f == 0 ? 2 : 3;
    p.max_radius = d.maxCoeff();
    const auto diag = rips_persistence(d, p);
    for (int q = 1; q <= 2; ++q) bars[f][q] = max_bar_length_capped(diag, q);
  }
  o.detail << ", longest bars F2 PH1 " << fmt(bars[0][1]) << " PH2 " << fmt(bars[0][2]) << ", F3 PH1 " << fmt(bars[1][1])
           << " PH2 " << fmt(bars[1][2]) << " (ratios " << fmt(bars[0][1] / bars[1][1], 3) << ", "
           << fmt(bars[0][2] / bars[1][2], 3) << ")";
  o.require(bars[0][1] >= 3 * bars[1][1], "PH1 F2 bar >= 3x F3");
  o.require(bars[0][2] >= 3 * bars[1][2], "PH2 F2 bar >= 3x F3");
  return o;
}

std::vector<oracle::Bar> as_oracle(const std::vector<PersistenceBar>& bars) {
  std::vector<oracle::Bar> out;
  for (const auto& b : bars) out.push_back({b.birth, b.death});
  std::sort(out.begin(), out.end());
  return out;
}

bool same_bars(const std::vector<oracle::Bar>& a, const std::vector<oracle::Bar>& b) {
  if (a.size() != b.size()) return false;
  auto close = [](double x, double y) {
    return std::isinf(x) ? std::isinf(y) : std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(y));
  };
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!close(a[i].birth, b[i].birth) || !close(a[i].death, b[i].death)) return false;
  return true;
}

Outcome tda_truths() {
  Outcome o;
  MatrixXd square(2, 4);
  square << 0, 1, 1, 0, 0, 0, 1, 1;
  PersistenceOptions full;
  full.max_radius = 10;
  const auto sq = rips_persistence(Configuration(square), full);
  const bool square_ok = sq.bars[1].size() == 1 && std::abs(sq.bars[1][0].birth - 1) <= 1e-12 &&
                         std::abs(sq.bars[1][0].death - std::sqrt(2.0)) <= 1e-12;
  MatrixXd tri(2, 3);
  tri << 0, 1, 0.5, 0, 0, std::sqrt(3.0) / 2;
  const bool triangle_ok = rips_persistence(Configuration(tri), full).bars[1].empty();

  std::mt19937_64 rng(109);
  int agree = 0;
  for (int s = 0; s < 50; ++s) {
    const int n = 5 + s % 4;
    const MatrixXd d = pairwise_distances(gaussian(2 + s % 2, n, rng));
    const double radius = s % 2 == 0 ? d.maxCoeff() : 0.7 * d.maxCoeff();
    bool ok = true;
    for (int p : {2, 3}) {
      PersistenceOptions opt;
      opt.max_dim = 2;
      opt.prime = p;
      opt.max_radius = radius;
      const auto got = rips_persistence(d, opt);
      const auto want = oracle::brute_force_rips(d, 2, p, radius);
      for (int q = 0; q <= 2; ++q)
        ok = ok && same_bars(as_oracle(got.bars[static_cast<std::size_t>(q)]), want[static_cast<std::size_t>(q)]);
    }
    agree += ok;
  }
  o.detail << "square PH1 " << (sq.bars[1].empty() ? std::string("none")
                                                     : "[" + fmt(sq.bars[1][0].birth, 17) + ", " +
                                                           fmt(sq.bars[1][0].death, 17) + ")")
           << ", triangle PH1 " << (triangle_ok ? "empty" : "nonempty") << ", brute force agrees on " << agree << "/50";
  o.require(square_ok, "square bar [1, sqrt 2)");
  o.require(triangle_ok, "triangle PH1 empty");
  o.require(agree == 50, "brute-force agreement");
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path w = workdir("determinism");
  const auto roll = swiss_roll(2000, 501);
  write_points_csv(w / "points.csv", add_gaussian_noise(roll.points3d, 0.05 * kRollGap, 502));
  std::string bytes[2][2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = w / ("out" + std::to_string(run));
    RunManifest m = load_manifest("swiss_noise.json", w / "points.csv", out);
    // the second run uses a different worker count
    set_thread_count(run == 0 ? 1 : 3);
    run_manifest(m);
    bytes[run][0] = slurp(out / "report.json");
    bytes[run][1] = slurp(out / "embedding.csv");
  }
  set_thread_count(1);
  const bool report_same = !bytes[0][0].empty() && bytes[0][0] == bytes[1][0];
  const bool emb_same = !bytes[0][1].empty() && bytes[0][1] == bytes[1][1];
  o.detail << "report.json " << bytes[0][0].size() << " bytes " << (report_same ? "identical" : "differ")
           << ", embedding.csv " << bytes[0][1].size() << " bytes " << (emb_same ? "identical" : "differ");
  o.require(report_same, "report.json identical");
  o.require(emb_same, "embedding.csv identical");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> criteria{
      {1, closed_form_vs_oracle}, {2, als_correctness},   {3, convergence_diagnostics}, {4, stability_scaling},
      {5, swiss_roll_noise},      {6, swiss_roll_outliers}, {7, parameter_sweep},       {8, buckyball_signature},
      {9, tda_truths},            {10, determinism},
  };
  std::vector<int> chosen;
  for (int a = 1; a < argc; ++a) {
    char* end = nullptr;
    const long v = std::strtol(argv[a], &end, 10);
    if (*end != '\0' || !criteria.count(static_cast<int>(v))) {
      std::cerr << "usage: acceptance [criterion 1-10 ...]\n";
      return 1;
    }
    chosen.push_back(static_cast<int>(v));
  }
  if (chosen.empty())
    for (const auto& [n, f] : criteria) chosen.push_back(n);
  if (const char* t = std::getenv("ROBUST_COORDS_THREADS")) set_thread_count(static_cast<unsigned>(std::atoi(t)));

  bool all = true;
  for (int n : chosen) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria.at(n)();
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << n << ": " << (out.pass ? "PASS" : "FAIL") << " " << out.detail.str() << " ("
              << fmt(secs, 3) << " s)" << std::endl;
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
