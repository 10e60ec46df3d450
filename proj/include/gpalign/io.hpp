#pragma once

#include "gpalign/geometry.hpp"
#include "gpalign/optimizer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gpalign {

/// Whitespace-separated text, one point per line, 2 or 3 columns.
/// Blank lines and lines starting with '#' are skipped.
PointSet read_point_set(const std::filesystem::path& path);
PointSet parse_point_set(const std::string& text, const std::string& source = "<memory>");

/// Writes with 17 significant digits so reading back is exact.
void write_point_set(const PointSet& ps, const std::filesystem::path& path);

/// Overlaid scatter of 2D sets, one palette colour per set.
std::string svg_document(const std::vector<PointSet>& sets);
void render_svg(const std::vector<PointSet>& sets, const std::filesystem::path& path);

struct ManifestGroup {
    std::string id;
    std::vector<std::filesystem::path> members;
};

/// JSON: {"dim": 2, "groups": [{"id": "...", "members": ["a.txt", ...]}], "meta": {...}}.
/// Relative member paths are resolved against the manifest's directory.
struct GroupManifest {
    int dim = 2;
    std::vector<ManifestGroup> groups;
    std::string meta_json = "{}";
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::filesystem::path& member) const;
};

GroupManifest load_manifest(const std::filesystem::path& path);
GroupManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir = {});
void save_manifest(const GroupManifest& manifest, const std::filesystem::path& path);

/// Reads every member file; checks K >= 2 and the declared dimension.
std::vector<Group> load_groups(const GroupManifest& manifest);

/// Overrides fields of `cfg` from a JSON object whose keys mirror OptimConfig.
void apply_config_json(OptimConfig& cfg, const std::string& json_text);
OptimConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const OptimConfig& cfg);

struct ReportRow {
    std::string group_id;
    std::size_t k = 0;
    double initial_normalized_cd = 0.0;
    double final_normalized_cd = 0.0;
    std::size_t steps = 0;
    double wall_seconds = 0.0;
    bool converged = false; // only set when final <= initial
};

struct RunReport {
    std::vector<ReportRow> rows;
    double mean_initial = 0.0;
    double mean_final = 0.0;
    double mean_wall_seconds = 0.0;

    /// Mean fractional reduction of normalized CD, (initial - final) / initial, over rows.
    double mean_reduction() const;
};

RunReport make_report(const AlignmentResult& result, double wall_seconds);
std::string report_csv(const RunReport& report);
void write_report_csv(const RunReport& report, const std::filesystem::path& path);

std::string trace_csv(const std::vector<LossBreakdown>& trace);
void write_trace_csv(const std::vector<LossBreakdown>& trace, const std::filesystem::path& path);

} // namespace gpalign
