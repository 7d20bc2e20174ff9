#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robust_coords/core_types.hpp"
#include "robust_coords/ensemble.hpp"
#include "robust_coords/tda.hpp"

namespace robust_coords {

inline constexpr const char* kFormatVersion = "1";
inline constexpr const char* kReportSchema = "robust_coords.report/1";

/// "%.17g", with ".0" appended when the result would read as an integer.
std::string format_double(double v);

/// Header `id,x0,...,x{d-1}`, then one row per present index. n_global defaults to
/// max id + 1; when given, every id must be below it.
Configuration read_points_csv(std::istream& in, std::optional<Index> n_global = std::nullopt);
Configuration read_points_csv(const std::filesystem::path& path, std::optional<Index> n_global = std::nullopt);
void write_points_csv(std::ostream& out, const Configuration& x);
void write_points_csv(const std::filesystem::path& path, const Configuration& x);

/// One id per line, no header.
void write_index_list(const std::filesystem::path& path, const std::vector<Index>& ids);
std::vector<Index> read_index_list(const std::filesystem::path& path);

struct RunManifest {
  PipelineConfig config;
  std::filesystem::path input_path;
  std::filesystem::path output_dir;
  bool plots = false;
  std::string format_version = kFormatVersion;
};

nlohmann::ordered_json to_json(const EmbeddingParams& p);
nlohmann::ordered_json to_json(const PipelineConfig& c);
nlohmann::ordered_json to_json(const RunManifest& m);
nlohmann::ordered_json to_json(const PersistenceDiagram& d);

/// Every key optional (defaults apply), unknown keys rejected with InvalidArgument.
EmbeddingParams embedding_params_from_json(const nlohmann::json& j);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// Relative paths resolve against `base_dir`.
RunManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunManifest read_manifest(const std::filesystem::path& path);

/// report.json content. `status` is "ok" or "no_good_cluster".
nlohmann::ordered_json report_to_json(const PipelineReport& report, const std::string& status);

/// report.json, embedding.csv (when present), outliers.csv, mds_view.csv and, with
/// `plots`, embedding.svg and mds_view.svg.
void write_report(const PipelineReport& report, const std::string& status, const std::filesystem::path& dir,
                  bool plots = false);

std::string scatter_svg(const Configuration& x, const std::string& title,
                        const std::vector<Index>& highlight = {});
std::string persistence_svg(const PersistenceDiagram& d, const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace robust_coords
