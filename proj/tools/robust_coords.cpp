#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "robust_coords/dimred.hpp"
#include "robust_coords/ensemble.hpp"
#include "robust_coords/gpa.hpp"
#include "robust_coords/io.hpp"
#include "robust_coords/parallel.hpp"
#include "robust_coords/procrustes.hpp"
#include "robust_coords/synth.hpp"
#include "robust_coords/tda.hpp"

namespace fs = std::filesystem;
using namespace robust_coords;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNoGoodCluster = 2;

struct Globals {
  std::optional<unsigned> threads;
  bool verbose = false;
};

void apply_threads(const Globals& g) {
  if (g.threads) {
    set_thread_count(*g.threads);
    return;
  }
  if (const char* env = std::getenv("ROBUST_COORDS_THREADS")) {
    try {
      set_thread_count(static_cast<unsigned>(std::stoul(env)));
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("ROBUST_COORDS_THREADS is not a number: ") + env);
    }
  }
}

void print_clusters(const PipelineReport& r) {
  std::cerr << "ensemble: " << r.ensemble.members.size() << " members, " << r.ensemble.failures.size()
            << " failed\n";
  for (const auto& f : r.ensemble.failures)
    std::cerr << "  subsample " << f.subsample << " param " << f.param << ": " << f.reason << '\n';
  std::cerr << "thresholds: link " << r.thresholds.link_threshold << ", dense " << r.thresholds.dense_threshold << '\n';
  for (std::size_t c = 0; c < r.clusters.size(); ++c) {
    const auto& cl = r.clusters[c];
    std::cerr << "  cluster " << c << ": " << cl.members.size() << " members, intra " << cl.median_intra_distance;
    if (cl.ph1_score) std::cerr << ", ph1 " << *cl.ph1_score;
    std::cerr << ", " << to_string(cl.verdict) << '\n';
  }
}

int cmd_run(const Globals& g, const fs::path& manifest_path, std::optional<std::uint64_t> seed,
            std::optional<fs::path> out) {
  RunManifest m = read_manifest(manifest_path);
  if (seed) m.config.seed = *seed;
  if (out) m.output_dir = *out;
  if (m.output_dir.empty()) throw InvalidArgument("no output directory (manifest output_dir or --out)");
  const Configuration x = read_points_csv(m.input_path);
  try {
    const PipelineReport r = run_pipeline(x, m.config);
    if (g.verbose) print_clusters(r);
    write_report(r, "ok", m.output_dir, m.plots);
    std::cout << "good cluster " << *r.good_cluster << ": " << r.embedding->count() << " points embedded, "
              << r.outliers.size() << " outliers\n";
    return kOk;
  } catch (const NoGoodCluster& e) {
    if (g.verbose) print_clusters(e.report());
    write_report(e.report(), "no_good_cluster", m.output_dir, m.plots);
    std::cerr << "no good cluster: " << e.what() << '\n';
    return kNoGoodCluster;
  }
}

int cmd_dist(const fs::path& a, const fs::path& b, bool normalized) {
  Configuration x = read_points_csv(a), y = read_points_csv(b);
  const Index n = std::max(x.n_global(), y.n_global());
  x = read_points_csv(a, n);
  y = read_points_csv(b, n);
  const auto shared = common_indices(x.mask(), y.mask());
  if (shared.empty()) throw EmptyOverlap();
  const Eigen::MatrixXd xs = x.gather(shared), ys = y.gather(shared);
  double d = xs == ys ? 0.0 : procrustes_distance(x, y);
  if (normalized) d /= std::sqrt(static_cast<double>(shared.size()));
  std::cout << format_double(d) << '\n';
  return kOk;
}

int cmd_gpa(const std::vector<fs::path>& inputs, const fs::path& out, const std::string& variant) {
  Index n = 0;
  for (const auto& p : inputs) n = std::max(n, read_points_csv(p).n_global());
  std::vector<Configuration> configs;
  for (const auto& p : inputs) configs.push_back(read_points_csv(p, n));
  AlsOptions opts;
  if (variant == "basic") opts.variant = AlsVariant::basic;
  else if (variant == "refined") opts.variant = AlsVariant::refined;
  const GpaProblem problem(configs, opts);
  const AlignmentResult r = normalize_first_fixed(als_align(problem));
  fs::create_directories(out);
  write_points_csv(out / "mean.csv", r.mean);
  const auto aligned = transformed_configs(problem, r.motions);
  for (std::size_t i = 0; i < aligned.size(); ++i) write_points_csv(out / ("aligned_" + std::to_string(i) + ".csv"), aligned[i]);
  nlohmann::ordered_json j;
  j["loss"] = r.loss;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["symmetry_residuals"] = r.symmetry_residuals;
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_ph(const fs::path& input, const PersistenceOptions& opts, const std::optional<fs::path>& out,
           const std::optional<fs::path>& svg) {
  const Configuration x = read_points_csv(input);
  const PersistenceDiagram d = rips_persistence(x, opts);
  const std::string text = to_json(d).dump(2) + "\n";
  if (out) write_text(*out, text);
  else std::cout << text;
  if (svg) write_text(*svg, persistence_svg(d, "Rips persistence over F" + std::to_string(d.prime)));
  return kOk;
}

int cmd_synth(const std::string& kind, Index n, std::uint64_t seed, double noise, Index outliers, const fs::path& out) {
  fs::create_directories(out);
  if (kind == "swiss-roll") {
    const auto roll = swiss_roll(n, seed);
    Configuration pts = add_gaussian_noise(roll.points3d, noise, derive_seed(seed, 100, 0));
    std::vector<Index> injected;
    if (outliers > 0) std::tie(pts, injected) = add_uniform_outliers(pts, outliers, derive_seed(seed, 101, 0));
    write_points_csv(out / "points.csv", pts);
    write_points_csv(out / "intrinsic.csv", roll.intrinsic);
    write_index_list(out / "injected_outliers.csv", injected);
  } else if (kind == "buckyball") {
    write_points_csv(out / "points.csv", buckyball(noise, seed));
  } else {
    throw InvalidArgument("unknown fixture '" + kind + "' (swiss-roll, buckyball)");
  }
  return kOk;
}

int cmd_embed(const fs::path& input, const std::string& method, Index dim, std::optional<double> epsilon,
              std::optional<int> neighbors, const std::optional<fs::path>& file, const fs::path& out) {
  const Configuration x = read_points_csv(input);
  EmbeddingOutput result;
  if (method == "external") {
    if (!file) throw InvalidArgument("--method external needs --file");
    const Configuration ext = read_points_csv(*file, x.n_global());
    if (ext.dim() != dim) throw DimensionMismatch("external embedding has dimension " + std::to_string(ext.dim()));
    for (Index j : ext.indices())
      if (!x.contains(j)) throw InvalidArgument("external embedding has id " + std::to_string(j) + " not in the input");
    result.config = ext;
    for (Index j : x.indices())
      if (!ext.contains(j)) result.dropped.push_back(j);
  } else {
    EmbeddingParams p;
    p.target_dim = dim;
    if (method == "pca") {
      p.method = EmbeddingMethod::pca;
      p.neighbor_rule = std::monostate{};
    } else if (method == "isomap") {
      if (epsilon && neighbors) throw InvalidArgument("give either --epsilon or --neighbors");
      if (epsilon) p.neighbor_rule = EpsilonRule{*epsilon};
      else if (neighbors) p.neighbor_rule = KnnRule{*neighbors};
    } else {
      throw InvalidArgument("unknown method '" + method + "'");
    }
    result = embed(x, p);
  }
  write_points_csv(out, result.config);
  std::cerr << result.config.count() << " points embedded, " << result.dropped.size() << " dropped\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust coordinates: ensemble embeddings aligned by generalized Procrustes analysis"};
  app.require_subcommand(1);
  Globals g;
  unsigned threads = 1;
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (0 = all cores); env ROBUST_COORDS_THREADS");
  app.add_flag("--verbose,-v", g.verbose, "diagnostics on stderr");

  auto* run = app.add_subcommand("run", "run the pipeline from a manifest");
  fs::path manifest;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> run_out;
  run->add_option("--manifest", manifest, "manifest JSON")->required();
  run->add_option("--seed", seed, "override config.seed");
  run->add_option("--out", run_out, "override output_dir");

  auto* dist = app.add_subcommand("dist", "Procrustes distance between two point CSVs");
  fs::path dist_a, dist_b;
  bool normalized = false;
  dist->add_option("a", dist_a)->required();
  dist->add_option("b", dist_b)->required();
  dist->add_flag("--normalized", normalized, "divide by sqrt of the overlap size");

  auto* gpa = app.add_subcommand("gpa", "align k point CSVs by alternating least squares");
  std::vector<fs::path> gpa_in;
  fs::path gpa_out;
  std::string variant = "missing_points";
  gpa->add_option("inputs", gpa_in)->required()->expected(1, -1);
  gpa->add_option("--out", gpa_out)->required();
  gpa->add_option("--variant", variant)->check(CLI::IsMember({"basic", "refined", "missing_points"}));

  auto* ph = app.add_subcommand("ph", "Rips persistence diagram of a point CSV");
  fs::path ph_in;
  PersistenceOptions ph_opts;
  std::optional<double> max_radius;
  std::optional<fs::path> ph_out, ph_svg;
  ph->add_option("input", ph_in)->required();
  ph->add_option("--max-dim", ph_opts.max_dim)->check(CLI::Range(0, 2));
  ph->add_option("--prime", ph_opts.prime);
  ph->add_option("--max-radius", max_radius);
  ph->add_option("--landmarks", ph_opts.landmark_cap);
  ph->add_option("--out", ph_out);
  ph->add_option("--svg", ph_svg);

  auto* synth = app.add_subcommand("synth", "write a synthetic fixture");
  std::string kind;
  Index synth_n = 2000, synth_outliers = 0;
  std::uint64_t synth_seed = 0;
  double synth_noise = 0;
  fs::path synth_out;
  synth->add_option("kind", kind, "swiss-roll or buckyball")->required();
  synth->add_option("--n", synth_n);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--noise", synth_noise, "Gaussian sigma");
  synth->add_option("--outliers", synth_outliers, "uniform bounding-box outliers (swiss-roll)");
  synth->add_option("--out", synth_out)->required();

  auto* emb = app.add_subcommand("embed", "one dimensionality reduction");
  fs::path emb_in, emb_out;
  std::string method = "isomap";
  Index dim = 2;
  std::optional<double> epsilon;
  std::optional<int> neighbors;
  std::optional<fs::path> ext_file;
  emb->add_option("input", emb_in)->required();
  emb->add_option("--method", method)->check(CLI::IsMember({"isomap", "pca", "external"}));
  emb->add_option("--dim", dim);
  emb->add_option("--epsilon", epsilon);
  emb->add_option("--neighbors", neighbors);
  emb->add_option("--file", ext_file, "external embedding CSV");
  emb->add_option("--out", emb_out)->required();

  for (auto* sub : {run, dist, gpa, ph, synth, emb}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (threads_opt->count() > 0) g.threads = threads;

  try {
    apply_threads(g);
    if (run->parsed()) return cmd_run(g, manifest, seed, run_out);
    if (dist->parsed()) return cmd_dist(dist_a, dist_b, normalized);
    if (gpa->parsed()) return cmd_gpa(gpa_in, gpa_out, variant);
    if (ph->parsed()) {
      ph_opts.max_radius = max_radius;
      return cmd_ph(ph_in, ph_opts, ph_out, ph_svg);
    }
    if (synth->parsed()) return cmd_synth(kind, synth_n, synth_seed, synth_noise, synth_outliers, synth_out);
    if (emb->parsed()) return cmd_embed(emb_in, method, dim, epsilon, neighbors, ext_file, emb_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
