#include "gpalign/io.hpp"

#include "gpalign/error.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

namespace gpalign {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::IoError, path.string() + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::IoError, path.string() + ": cannot open for writing");
    out << text;
    if (!out)
        fail(ErrorCode::IoError, path.string() + ": write failed");
}

std::string format_double(double v)
{
    std::array<char, 32> buf{};
    const int n = std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return std::string(buf.data(), static_cast<std::size_t>(n));
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

} // namespace

PointSet parse_point_set(const std::string& text, const std::string& source)
{
    std::vector<double> values;
    int dim = 0;
    int first_line = 0;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        std::string_view rest(line);
        while (!rest.empty() && is_space(rest.front()))
            rest.remove_prefix(1);
        if (rest.empty() || rest.front() == '#')
            continue;

        int columns = 0;
        while (!rest.empty()) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
            if (ec != std::errc() || (ptr != rest.data() + rest.size() && !is_space(*ptr)))
                fail(ErrorCode::ParseError, where + ": expected a number in '" + line + "'");
            if (!std::isfinite(v))
                fail(ErrorCode::ParseError, where + ": non-finite coordinate");
            values.push_back(v);
            ++columns;
            rest.remove_prefix(static_cast<std::size_t>(ptr - rest.data()));
            while (!rest.empty() && is_space(rest.front()))
                rest.remove_prefix(1);
        }
        if (columns != 2 && columns != 3)
            fail(ErrorCode::ParseError, where + ": expected 2 or 3 columns, found " + std::to_string(columns));
        if (dim == 0) {
            dim = columns;
            first_line = static_cast<int>(line_no);
        } else if (columns != dim) {
            fail(ErrorCode::MixedDimensionality, where + ": " + std::to_string(columns) +
                                                     " columns but line " + std::to_string(first_line) +
                                                     " has " + std::to_string(dim));
        }
    }
    if (dim == 0)
        fail(ErrorCode::EmptyFile, source + ": no points found");
    Eigen::MatrixXd coords =
        Eigen::Map<const Eigen::MatrixXd>(values.data(), dim, static_cast<Eigen::Index>(values.size() / dim));
    return PointSet(std::move(coords));
}

PointSet read_point_set(const fs::path& path)
{
    return parse_point_set(read_file(path), path.string());
}

void write_point_set(const PointSet& ps, const fs::path& path)
{
    std::string text;
    text.reserve(ps.size() * static_cast<std::size_t>(ps.dim()) * 25);
    for (Eigen::Index c = 0; c < ps.coords().cols(); ++c) {
        for (Eigen::Index d = 0; d < ps.coords().rows(); ++d) {
            if (d > 0)
                text += ' ';
            text += format_double(ps.coords()(d, c));
        }
        text += '\n';
    }
    write_file(path, text);
}

namespace {

constexpr std::array<const char*, 12> kPalette = {
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4",
    "#f032e6", "#9a6324", "#800000", "#469990", "#000075", "#808000",
};

std::string color_for(std::size_t i)
{
    if (i < kPalette.size())
        return kPalette[i];
    // Golden-angle hue walk keeps colours distinct past the fixed palette.
    const double hue = std::fmod(static_cast<double>(i) * 137.50776405, 360.0);
    const int lightness = 35 + static_cast<int>((i / 7) % 4) * 8;
    std::array<char, 48> buf{};
    std::snprintf(buf.data(), buf.size(), "hsl(%.3f,70%%,%d%%)", hue, lightness);
    return buf.data();
}

} // namespace

std::string svg_document(const std::vector<PointSet>& sets)
{
    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    bool any = false;
    for (const auto& s : sets) {
        if (s.dim() != 2)
            fail(ErrorCode::NotTwoDimensional, "SVG plots need 2D point sets");
        if (s.empty())
            continue;
        const Eigen::Vector2d lo = s.coords().rowwise().minCoeff();
        const Eigen::Vector2d hi = s.coords().rowwise().maxCoeff();
        if (!any) {
            min_x = lo.x(), max_x = hi.x(), min_y = lo.y(), max_y = hi.y();
            any = true;
        } else {
            min_x = std::min(min_x, lo.x()), max_x = std::max(max_x, hi.x());
            min_y = std::min(min_y, lo.y()), max_y = std::max(max_y, hi.y());
        }
    }
    double span = std::max(max_x - min_x, max_y - min_y);
    if (!(span > 0.0))
        span = 1.0;
    const double margin = 0.05 * span;
    const double radius = 0.008 * span;

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
    // y is flipped so that +y points up.
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"600\" height=\"600\" viewBox=\""
        << format_double(min_x - margin) << ' ' << format_double(-max_y - margin) << ' '
        << format_double(max_x - min_x + 2 * margin) << ' ' << format_double(max_y - min_y + 2 * margin)
        << "\">\n";
    for (std::size_t i = 0; i < sets.size(); ++i) {
        out << "  <g fill=\"" << color_for(i) << "\" fill-opacity=\"0.85\">\n";
        const auto& c = sets[i].coords();
        for (Eigen::Index j = 0; j < c.cols(); ++j)
            out << "    <circle cx=\"" << format_double(c(0, j)) << "\" cy=\"" << format_double(-c(1, j))
                << "\" r=\"" << format_double(radius) << "\"/>\n";
        out << "  </g>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void render_svg(const std::vector<PointSet>& sets, const fs::path& path)
{
    write_file(path, svg_document(sets));
}

fs::path GroupManifest::resolve(const fs::path& member) const
{
    return member.is_absolute() || base_dir.empty() ? member : base_dir / member;
}

GroupManifest parse_manifest(const std::string& json_text, const fs::path& base_dir)
{
    GroupManifest m;
    m.base_dir = base_dir;
    try {
        const json j = json::parse(json_text);
        m.dim = j.at("dim").get<int>();
        if (m.dim != 2 && m.dim != 3)
            fail(ErrorCode::ParseError, "manifest dim must be 2 or 3");
        for (const auto& g : j.at("groups")) {
            ManifestGroup mg;
            mg.id = g.at("id").get<std::string>();
            for (const auto& p : g.at("members"))
                mg.members.emplace_back(p.get<std::string>());
            if (mg.members.size() < 2)
                fail(ErrorCode::TooFewSets, "manifest group '" + mg.id + "' lists fewer than 2 members");
            m.groups.push_back(std::move(mg));
        }
        if (j.contains("meta"))
            m.meta_json = j.at("meta").dump();
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("manifest: ") + e.what());
    }
    return m;
}

GroupManifest load_manifest(const fs::path& path)
{
    try {
        return parse_manifest(read_file(path), path.parent_path());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IoError)
            throw;
        fail(e.code(), path.string() + ": " + e.what());
    }
}

void save_manifest(const GroupManifest& manifest, const fs::path& path)
{
    json j;
    j["dim"] = manifest.dim;
    j["groups"] = json::array();
    for (const auto& g : manifest.groups) {
        json members = json::array();
        for (const auto& p : g.members)
            members.push_back(p.generic_string());
        j["groups"].push_back({{"id", g.id}, {"members", members}});
    }
    j["meta"] = json::parse(manifest.meta_json.empty() ? "{}" : manifest.meta_json);
    write_file(path, j.dump(2) + "\n");
}

std::vector<Group> load_groups(const GroupManifest& manifest)
{
    std::vector<Group> groups;
    for (const auto& g : manifest.groups) {
        std::vector<PointSet> members;
        for (const auto& p : g.members) {
            const fs::path full = manifest.resolve(p);
            if (!fs::exists(full))
                fail(ErrorCode::IoError, full.string() + ": member of group '" + g.id + "' does not exist");
            auto ps = read_point_set(full);
            if (ps.dim() != manifest.dim)
                fail(ErrorCode::DimMismatch, full.string() + ": " + std::to_string(ps.dim()) +
                                                 "D points in a " + std::to_string(manifest.dim) + "D manifest");
            members.push_back(std::move(ps));
        }
        groups.emplace_back(g.id, std::move(members));
    }
    return groups;
}

void apply_config_json(OptimConfig& cfg, const std::string& json_text)
{
    try {
        const json j = json::parse(json_text);
        if (!j.is_object())
            fail(ErrorCode::ParseError, "config must be a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (key == "max_steps") cfg.max_steps = value.get<std::size_t>();
            else if (key == "lr_start") cfg.lr_start = value.get<double>();
            else if (key == "lr_end") cfg.lr_end = value.get<double>();
            else if (key == "lr_decay_steps") cfg.lr_decay_steps = value.get<std::size_t>();
            else if (key == "lambda") cfg.lambda = value.get<double>();
            else if (key == "latent_dim") cfg.latent_dim = value.get<std::size_t>();
            else if (key == "hidden") cfg.hidden = value.get<std::vector<int>>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "convergence_rel_tol") cfg.convergence_rel_tol = value.get<double>();
            else if (key == "convergence_window") cfg.convergence_window = value.get<std::size_t>();
            else if (key == "shared_decoder") cfg.shared_decoder = value.get<bool>();
            else if (key == "threads") cfg.threads = value.get<std::size_t>();
            else fail(ErrorCode::ParseError, "unknown config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("config: ") + e.what());
    }
}

OptimConfig load_config(const fs::path& path)
{
    OptimConfig cfg;
    try {
        apply_config_json(cfg, read_file(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IoError)
            throw;
        fail(e.code(), path.string() + ": " + e.what());
    }
    return cfg;
}

std::string config_to_json(const OptimConfig& cfg)
{
    const json j = {
        {"max_steps", cfg.max_steps},
        {"lr_start", cfg.lr_start},
        {"lr_end", cfg.lr_end},
        {"lr_decay_steps", cfg.lr_decay_steps},
        {"lambda", cfg.lambda},
        {"latent_dim", cfg.latent_dim},
        {"hidden", cfg.hidden},
        {"seed", cfg.seed},
        {"convergence_rel_tol", cfg.convergence_rel_tol},
        {"convergence_window", cfg.convergence_window},
        {"shared_decoder", cfg.shared_decoder},
        {"threads", cfg.threads},
    };
    return j.dump(2);
}

double RunReport::mean_reduction() const
{
    if (rows.empty())
        return 0.0;
    double sum = 0.0;
    for (const auto& r : rows)
        sum += r.initial_normalized_cd > 0.0
                   ? (r.initial_normalized_cd - r.final_normalized_cd) / r.initial_normalized_cd
                   : 0.0;
    return sum / static_cast<double>(rows.size());
}

RunReport make_report(const AlignmentResult& result, double wall_seconds)
{
    RunReport report;
    for (const auto& g : result.groups) {
        ReportRow row;
        row.group_id = g.id;
        row.k = g.transformed.size();
        row.initial_normalized_cd = g.initial_normalized_cd;
        row.final_normalized_cd = g.final_loss.normalized_cd;
        row.steps = g.steps;
        row.wall_seconds = wall_seconds;
        row.converged = row.final_normalized_cd <= row.initial_normalized_cd;
        report.rows.push_back(std::move(row));
    }
    if (!report.rows.empty()) {
        for (const auto& r : report.rows) {
            report.mean_initial += r.initial_normalized_cd;
            report.mean_final += r.final_normalized_cd;
            report.mean_wall_seconds += r.wall_seconds;
        }
        const auto n = static_cast<double>(report.rows.size());
        report.mean_initial /= n;
        report.mean_final /= n;
        report.mean_wall_seconds /= n;
    }
    return report;
}

std::string report_csv(const RunReport& report)
{
    std::ostringstream out;
    out << "group_id,K,initial_normalized_cd,final_normalized_cd,steps,wall_seconds,converged\n";
    for (const auto& r : report.rows)
        out << r.group_id << ',' << r.k << ',' << format_double(r.initial_normalized_cd) << ','
            << format_double(r.final_normalized_cd) << ',' << r.steps << ',' << format_double(r.wall_seconds)
            << ',' << (r.converged ? "true" : "false") << '\n';
    out << "mean,," << format_double(report.mean_initial) << ',' << format_double(report.mean_final) << ",,"
        << format_double(report.mean_wall_seconds) << ",\n";
    return out.str();
}

void write_report_csv(const RunReport& report, const fs::path& path)
{
    write_file(path, report_csv(report));
}

std::string trace_csv(const std::vector<LossBreakdown>& trace)
{
    std::ostringstream out;
    out << "step,alignment,regularizer,total\n";
    for (std::size_t s = 0; s < trace.size(); ++s)
        out << s << ',' << format_double(trace[s].alignment) << ',' << format_double(trace[s].regularizer) << ','
            << format_double(trace[s].total) << '\n';
    return out.str();
}

void write_trace_csv(const std::vector<LossBreakdown>& trace, const fs::path& path)
{
    write_file(path, trace_csv(trace));
}

} // namespace gpalign
