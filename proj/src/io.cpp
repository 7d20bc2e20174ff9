#include "robust_coords/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace robust_coords {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto comma = line.find(',');
    out.push_back(trim(line.substr(0, comma)));
    if (comma == std::string_view::npos) return out;
    line.remove_prefix(comma + 1);
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size() && !s.empty();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Walks a JSON object; every key must be claimed before finish().
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw InvalidArgument(where_ + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (const json* v = sub(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception& e) {
        throw InvalidArgument(where_ + "." + key + ": " + e.what());
      }
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw InvalidArgument("unknown key " + where_ + "." + item.key());
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename E, std::size_t N>
E parse_enum(const json& v, const std::array<std::pair<E, const char*>, N>& names, const std::string& where) {
  if (v.is_string())
    for (const auto& [e, name] : names)
      if (v.get<std::string>() == name) return e;
  throw InvalidArgument(where + ": unrecognised value " + v.dump());
}

template <typename E, std::size_t N>
const char* enum_name(E e, const std::array<std::pair<E, const char*>, N>& names) {
  for (const auto& [value, name] : names)
    if (value == e) return name;
  return "unknown";
}

constexpr std::array<std::pair<EmbeddingMethod, const char*>, 3> kMethods{
    {{EmbeddingMethod::isomap, "isomap"}, {EmbeddingMethod::pca, "pca"}, {EmbeddingMethod::external, "external"}}};
constexpr std::array<std::pair<AlsVariant, const char*>, 3> kVariants{
    {{AlsVariant::basic, "basic"}, {AlsVariant::refined, "refined"}, {AlsVariant::missing_points, "missing_points"}}};
constexpr std::array<std::pair<MissingPointsUpdate, const char*>, 3> kUpdates{
    {{MissingPointsUpdate::block_exact, "block_exact"},
     {MissingPointsUpdate::masked_refined, "masked_refined"},
     {MissingPointsUpdate::literal, "literal"}}};

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json numbers(const std::vector<double>& v) {
  ordered_json out = ordered_json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

ordered_json matrix_rows(const Eigen::MatrixXd& m) {
  ordered_json out = ordered_json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

Configuration read_points_csv(std::istream& in, std::optional<Index> n_global) {
  std::string line;
  std::size_t line_no = 0;
  Index d = 0;
  bool header = false;
  std::vector<Index> ids;
  std::vector<double> values;
  std::unordered_set<Index> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto cells = split(view);
    if (!header) {
      if (cells.front() != "id") throw ParseError("header must start with 'id'", line_no);
      d = static_cast<Index>(cells.size()) - 1;
      if (d < 1) throw ParseError("header has no coordinate columns", line_no);
      for (Index c = 0; c < d; ++c)
        if (cells[static_cast<std::size_t>(c + 1)] != "x" + std::to_string(c))
          throw ParseError("expected column x" + std::to_string(c), line_no);
      header = true;
      continue;
    }
    if (static_cast<Index>(cells.size()) != d + 1)
      throw ParseError("expected " + std::to_string(d + 1) + " fields, got " + std::to_string(cells.size()), line_no);
    long long id = 0;
    if (!parse_number(cells[0], id) || id < 0) throw ParseError("bad id '" + std::string(cells[0]) + "'", line_no);
    if (n_global && id >= *n_global) throw ParseError("id " + std::to_string(id) + " out of range", line_no);
    if (!seen.insert(static_cast<Index>(id)).second) throw DuplicateId(id, line_no);
    ids.push_back(static_cast<Index>(id));
    for (Index c = 1; c <= d; ++c) {
      double v = 0;
      const auto cell = cells[static_cast<std::size_t>(c)];
      if (!parse_number(cell, v) || !std::isfinite(v))
        throw ParseError("bad coordinate '" + std::string(cell) + "'", line_no);
      values.push_back(v);
    }
  }
  if (!header) throw ParseError("missing header", line_no + 1);
  if (ids.empty()) throw ParseError("no data rows", line_no + 1);
  const Index n = n_global ? *n_global : *std::max_element(ids.begin(), ids.end()) + 1;
  const Eigen::Map<const Eigen::MatrixXd> columns(values.data(), d, static_cast<Index>(ids.size()));
  return Configuration::from_columns(n, ids, columns);
}

Configuration read_points_csv(const fs::path& path, std::optional<Index> n_global) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_points_csv(in, n_global);
}

void write_points_csv(std::ostream& out, const Configuration& x) {
  out << "id";
  for (Index c = 0; c < x.dim(); ++c) out << ",x" << c;
  out << '\n';
  for (Index j : x.indices()) {
    out << j;
    for (Index c = 0; c < x.dim(); ++c) out << ',' << format_double(x.matrix()(c, j));
    out << '\n';
  }
}

void write_points_csv(const fs::path& path, const Configuration& x) {
  auto out = open_out(path);
  write_points_csv(out, x);
  if (!out) throw IoError("failed writing " + path.string());
}

void write_index_list(const fs::path& path, const std::vector<Index>& ids) {
  auto out = open_out(path);
  for (Index j : ids) out << j << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Index> read_index_list(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<Index> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto v = trim(line);
    if (v.empty()) continue;
    long long id = 0;
    if (!parse_number(v, id) || id < 0) throw ParseError("bad id", line_no);
    out.push_back(static_cast<Index>(id));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

ordered_json to_json(const EmbeddingParams& p) {
  ordered_json j;
  j["method"] = enum_name(p.method, kMethods);
  j["target_dim"] = p.target_dim;
  if (auto* e = std::get_if<EpsilonRule>(&p.neighbor_rule)) j["neighbor_rule"] = {{"epsilon", e->epsilon}};
  else if (auto* k = std::get_if<KnnRule>(&p.neighbor_rule)) j["neighbor_rule"] = {{"neighbors", k->neighbors}};
  else j["neighbor_rule"] = nullptr;
  j["seed"] = p.seed;
  return j;
}

ordered_json to_json(const PipelineConfig& c) {
  ordered_json j;
  j["n_subsamples"] = c.n_subsamples;
  j["subsample_size"] = c.subsample_size;
  j["dimred"] = ordered_json::array();
  for (const auto& p : c.dimred) j["dimred"].push_back(to_json(p));
  j["cluster_link_fraction"] = c.cluster_link_fraction;
  j["min_cluster_size"] = c.min_cluster_size;
  j["dense_median_fraction"] = c.dense_median_fraction;
  j["ph_representatives"] = c.ph_representatives;
  j["ph_bar_fraction"] = c.ph_bar_fraction;
  j["essdim_rel_tol"] = c.essdim_rel_tol;
  j["seed"] = c.seed;
  j["als"] = {{"variant", enum_name(c.als.variant, kVariants)},
              {"update", enum_name(c.als.update, kUpdates)},
              {"tol", c.als.tol},
              {"max_iter", c.als.max_iter},
              {"min_iter", c.als.min_iter}};
  j["subsample_noise"] = c.subsample_noise;
  j["ph"] = {{"max_dim", c.ph.max_dim},
             {"prime", c.ph.prime},
             {"max_radius", c.ph.max_radius ? ordered_json(*c.ph.max_radius) : ordered_json(nullptr)},
             {"landmark_cap", c.ph.landmark_cap},
             {"simplex_budget", c.ph.simplex_budget}};
  return j;
}

ordered_json to_json(const RunManifest& m) {
  ordered_json j;
  j["format_version"] = m.format_version;
  j["input_path"] = m.input_path.generic_string();
  j["output_dir"] = m.output_dir.generic_string();
  j["plots"] = m.plots;
  j["config"] = to_json(m.config);
  return j;
}

ordered_json to_json(const PersistenceDiagram& d) {
  ordered_json j;
  j["prime"] = d.prime;
  j["max_radius"] = d.max_radius;
  j["landmarks"] = d.landmarks;
  j["bars"] = ordered_json::array();
  for (const auto& dim : d.bars) {
    ordered_json bars = ordered_json::array();
    for (const auto& b : dim) bars.push_back({b.birth, number(b.death)});
    j["bars"].push_back(std::move(bars));
  }
  return j;
}

EmbeddingParams embedding_params_from_json(const json& j) {
  EmbeddingParams p;
  Fields f(j, "dimred[]");
  if (const json* m = f.sub("method")) p.method = parse_enum(*m, kMethods, "dimred[].method");
  f.get("target_dim", p.target_dim);
  f.get("seed", p.seed);
  if (const json* r = f.sub("neighbor_rule")) {
    if (r->is_null()) {
      p.neighbor_rule = std::monostate{};
    } else {
      Fields rule(*r, "dimred[].neighbor_rule");
      const json* eps = rule.sub("epsilon");
      const json* knn = rule.sub("neighbors");
      rule.finish();
      if ((eps != nullptr) == (knn != nullptr))
        throw InvalidArgument("neighbor_rule needs exactly one of epsilon, neighbors");
      try {
        if (eps) p.neighbor_rule = EpsilonRule{eps->get<double>()};
        else p.neighbor_rule = KnnRule{knn->get<int>()};
      } catch (const json::exception& e) {
        throw InvalidArgument(std::string("neighbor_rule: ") + e.what());
      }
    }
  }
  f.finish();
  p.validate();
  return p;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  Fields f(j, "config");
  f.get("n_subsamples", c.n_subsamples);
  f.get("subsample_size", c.subsample_size);
  if (const json* mesh = f.sub("dimred")) {
    if (!mesh->is_array()) throw InvalidArgument("config.dimred must be an array");
    c.dimred.clear();
    for (const auto& p : *mesh) c.dimred.push_back(embedding_params_from_json(p));
  }
  f.get("cluster_link_fraction", c.cluster_link_fraction);
  f.get("min_cluster_size", c.min_cluster_size);
  f.get("dense_median_fraction", c.dense_median_fraction);
  f.get("ph_representatives", c.ph_representatives);
  f.get("ph_bar_fraction", c.ph_bar_fraction);
  f.get("essdim_rel_tol", c.essdim_rel_tol);
  f.get("seed", c.seed);
  f.get("subsample_noise", c.subsample_noise);
  if (const json* a = f.sub("als")) {
    Fields als(*a, "config.als");
    if (const json* v = als.sub("variant")) c.als.variant = parse_enum(*v, kVariants, "config.als.variant");
    if (const json* u = als.sub("update")) c.als.update = parse_enum(*u, kUpdates, "config.als.update");
    als.get("tol", c.als.tol);
    als.get("max_iter", c.als.max_iter);
    als.get("min_iter", c.als.min_iter);
    als.finish();
  }
  if (const json* p = f.sub("ph")) {
    Fields ph(*p, "config.ph");
    ph.get("max_dim", c.ph.max_dim);
    ph.get("prime", c.ph.prime);
    if (const json* r = ph.sub("max_radius")) {
      if (r->is_null()) c.ph.max_radius.reset();
      else if (r->is_number()) c.ph.max_radius = r->get<double>();
      else throw InvalidArgument("config.ph.max_radius must be a number or null");
    }
    ph.get("landmark_cap", c.ph.landmark_cap);
    ph.get("simplex_budget", c.ph.simplex_budget);
    ph.finish();
  }
  f.finish();
  c.validate();
  return c;
}

RunManifest manifest_from_json(const json& j, const fs::path& base_dir) {
  RunManifest m;
  Fields f(j, "manifest");
  std::string input, output;
  f.get("format_version", m.format_version);
  if (m.format_version != kFormatVersion)
    throw InvalidArgument("unsupported format_version '" + m.format_version + "'");
  f.get("input_path", input);
  f.get("output_dir", output);
  f.get("plots", m.plots);
  if (const json* c = f.sub("config")) m.config = pipeline_config_from_json(*c);
  f.finish();
  if (input.empty()) throw InvalidArgument("manifest needs input_path");
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base_dir.empty() ? fs::path(p) : base_dir / p; };
  m.input_path = resolve(input);
  m.output_dir = output.empty() ? fs::path() : resolve(output);
  return m;
}

RunManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  return manifest_from_json(j, path.parent_path());
}

ordered_json report_to_json(const PipelineReport& r, const std::string& status) {
  ordered_json j;
  j["schema"] = kReportSchema;
  j["format_version"] = kFormatVersion;
  j["status"] = status;
  j["seed"] = r.config.seed;
  j["config"] = to_json(r.config);
  j["n_input_points"] = r.universe.count();
  j["n_global"] = r.universe.n_global();

  ordered_json ens;
  ens["n_subsamples"] = r.ensemble.subsamples.size();
  ens["n_members"] = r.ensemble.members.size();
  ens["members"] = ordered_json::array();
  for (const auto& m : r.ensemble.members)
    ens["members"].push_back({{"subsample", m.subsample},
                              {"param", m.param},
                              {"n_points", m.output.config.count()},
                              {"dropped", m.output.dropped}});
  ens["failures"] = ordered_json::array();
  for (const auto& f : r.ensemble.failures)
    ens["failures"].push_back({{"subsample", f.subsample}, {"param", f.param}, {"reason", f.reason}});
  j["ensemble"] = std::move(ens);

  j["thresholds"] = {{"median_distance", r.thresholds.median_distance},
                     {"embedding_scale", r.thresholds.embedding_scale},
                     {"scale", r.thresholds.scale},
                     {"link_threshold", r.thresholds.link_threshold},
                     {"dense_threshold", r.thresholds.dense_threshold},
                     {"ph_bar_fraction", r.config.ph_bar_fraction},
                     {"essdim_rel_tol", r.config.essdim_rel_tol},
                     {"min_cluster_size", r.config.min_cluster_size}};
  j["sentinel_pairs"] = r.sentinel_pairs;

  j["clusters"] = ordered_json::array();
  for (const auto& c : r.clusters) {
    ordered_json cj;
    cj["members"] = c.members;
    cj["median_intra_distance"] = c.median_intra_distance;
    cj["dense"] = c.dense;
    cj["representatives"] = c.representatives;
    cj["ph1_max_bars"] = numbers(c.ph1_max_bars);
    cj["rep_diameters"] = numbers(c.rep_diameters);
    cj["essential_dims"] = c.essential_dims;
    cj["ph1_score"] = c.ph1_score ? number(*c.ph1_score) : ordered_json(nullptr);
    cj["verdict"] = to_string(c.verdict);
    j["clusters"].push_back(std::move(cj));
  }
  j["good_cluster"] = r.good_cluster ? ordered_json(*r.good_cluster) : ordered_json(nullptr);
  j["n_embedded"] = r.embedding ? r.embedding->count() : 0;
  j["outliers"] = r.outliers;

  if (r.alignment) {
    const auto& a = *r.alignment;
    ordered_json aj;
    aj["loss"] = number(a.loss);
    aj["loss_trace"] = numbers(a.loss_trace);
    aj["iterations"] = a.iterations;
    aj["converged"] = a.converged;
    aj["symmetry_residuals"] = numbers(a.symmetry_residuals);
    aj["motions"] = ordered_json::array();
    for (const auto& g : a.motions)
      aj["motions"].push_back({{"rotation", matrix_rows(g.rotation)},
                               {"translation", numbers(std::vector<double>(g.translation.data(), g.translation.data() + g.translation.size()))}});
    j["alignment"] = std::move(aj);
  } else {
    j["alignment"] = nullptr;
  }
  j["dissimilarity"] = matrix_rows(r.dissimilarity);
  return j;
}

void write_report(const PipelineReport& r, const std::string& status, const fs::path& dir, bool plots) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "report.json", report_to_json(r, status).dump(2) + "\n");
  if (r.embedding) write_points_csv(dir / "embedding.csv", *r.embedding);
  write_index_list(dir / "outliers.csv", r.outliers);
  if (r.mds_view) write_points_csv(dir / "mds_view.csv", *r.mds_view);
  if (plots) {
    if (r.embedding) write_text(dir / "embedding.svg", scatter_svg(*r.embedding, "averaged embedding"));
    if (r.mds_view) {
      std::vector<Index> good;
      if (r.good_cluster) good = r.clusters[static_cast<std::size_t>(*r.good_cluster)].members;
      write_text(dir / "mds_view.svg", scatter_svg(*r.mds_view, "ensemble, Procrustes MDS", good));
    }
  }
}

namespace {

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double size = 480, margin = 36;

  double px(double x) const { return margin + (x - x0) / std::max(x1 - x0, 1e-300) * (size - 2 * margin); }
  double py(double y) const { return size - margin - (y - y0) / std::max(y1 - y0, 1e-300) * (size - 2 * margin); }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string svg_open(const std::string& title) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n"
    << "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n"
    << "<text x=\"240\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << title
    << "</text>\n";
  return s.str();
}

}  // namespace

std::string scatter_svg(const Configuration& x, const std::string& title, const std::vector<Index>& highlight) {
  const auto idx = x.indices();
  auto coord = [&](Index j, Index c) { return c < x.dim() ? x.matrix()(c, j) : 0.0; };
  Frame f{0, 1, 0, 1};
  if (!idx.empty()) {
    f = {coord(idx[0], 0), coord(idx[0], 0), coord(idx[0], 1), coord(idx[0], 1)};
    for (Index j : idx) {
      f.x0 = std::min(f.x0, coord(j, 0)), f.x1 = std::max(f.x1, coord(j, 0));
      f.y0 = std::min(f.y0, coord(j, 1)), f.y1 = std::max(f.y1, coord(j, 1));
    }
    // equal aspect
    const double span = std::max(f.x1 - f.x0, f.y1 - f.y0);
    const double cx = 0.5 * (f.x0 + f.x1), cy = 0.5 * (f.y0 + f.y1);
    f = {cx - span / 2, cx + span / 2, cy - span / 2, cy + span / 2};
  }
  const std::set<Index> hot(highlight.begin(), highlight.end());
  std::ostringstream s;
  s << svg_open(title);
  for (Index j : idx) {
    const bool h = hot.count(j) > 0;
    s << "<circle cx=\"" << fmt(f.px(coord(j, 0))) << "\" cy=\"" << fmt(f.py(coord(j, 1))) << "\" r=\"2\" fill=\""
      << (h ? "#d62728" : "#1f77b4") << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string persistence_svg(const PersistenceDiagram& d, const std::string& title) {
  const double top = d.max_radius > 0 ? d.max_radius : 1.0;
  const Frame f{0, top * 1.05, 0, top * 1.05};
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
  std::ostringstream s;
  s << svg_open(title);
  s << "<line x1=\"" << fmt(f.px(0)) << "\" y1=\"" << fmt(f.py(0)) << "\" x2=\"" << fmt(f.px(top * 1.05)) << "\" y2=\""
    << fmt(f.py(top * 1.05)) << "\" stroke=\"gray\"/>\n";
  s << "<line x1=\"" << fmt(f.px(0)) << "\" y1=\"" << fmt(f.py(top)) << "\" x2=\"" << fmt(f.px(top * 1.05)) << "\" y2=\""
    << fmt(f.py(top)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t q = 0; q < d.bars.size(); ++q)
    for (const auto& b : d.bars[q]) {
      const double death = b.infinite() ? top : b.death;
      s << "<circle cx=\"" << fmt(f.px(b.birth)) << "\" cy=\"" << fmt(f.py(death)) << "\" r=\"3\" fill=\""
        << colors[q % 3] << "\" fill-opacity=\"0.7\"/>\n";
    }
  for (std::size_t q = 0; q < d.bars.size(); ++q)
    s << "<text x=\"60\" y=\"" << 50 + 16 * q << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << colors[q % 3]
      << "\">PH" << q << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace robust_coords
