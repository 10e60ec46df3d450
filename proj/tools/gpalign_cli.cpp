// Command-line harness: synth / noise / align / eval / plot.
// Talks to the library exclusively through the C API in gpalign.h.

#include "gpalign/gpalign.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(gpa_status status, const std::string& context)
{
    if (status != GPA_OK)
        throw CliError(context + ": " + gpa_status_string(status) + ": " + gpa_last_error());
}

struct PointSetDeleter {
    void operator()(gpa_point_set* p) const { gpa_point_set_free(p); }
};
struct ManifestDeleter {
    void operator()(gpa_manifest* p) const { gpa_manifest_free(p); }
};
struct ConfigDeleter {
    void operator()(gpa_config* p) const { gpa_config_free(p); }
};
struct ResultDeleter {
    void operator()(gpa_result* p) const { gpa_result_free(p); }
};

using PointSetPtr = std::unique_ptr<gpa_point_set, PointSetDeleter>;
using ManifestPtr = std::unique_ptr<gpa_manifest, ManifestDeleter>;
using ConfigPtr = std::unique_ptr<gpa_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<gpa_result, ResultDeleter>;

PointSetPtr read_points(const std::string& path)
{
    gpa_point_set* ps = nullptr;
    check(gpa_point_set_read(path.c_str(), &ps), path);
    return PointSetPtr(ps);
}

void write_points(const gpa_point_set* ps, const fs::path& path)
{
    check(gpa_point_set_write(ps, path.string().c_str()), path.string());
}

ManifestPtr load_manifest(const std::string& path)
{
    gpa_manifest* m = nullptr;
    check(gpa_manifest_load(path.c_str(), &m), path);
    return ManifestPtr(m);
}

std::vector<const gpa_point_set*> raw(const std::vector<PointSetPtr>& sets)
{
    std::vector<const gpa_point_set*> out;
    for (const auto& s : sets)
        out.push_back(s.get());
    return out;
}

std::vector<PointSetPtr> read_group(const gpa_manifest* m, std::size_t g)
{
    std::vector<PointSetPtr> sets;
    for (std::size_t k = 0; k < gpa_manifest_group_size(m, g); ++k)
        sets.push_back(read_points(gpa_manifest_member_path(m, g, k)));
    return sets;
}

std::string member_name(std::size_t k)
{
    return "member_" + std::to_string(k) + ".txt";
}

// Writes each group's sets to out/<group>/member_k.txt and records them in a manifest.
void save_groups(const std::vector<std::pair<std::string, std::vector<PointSetPtr>>>& groups, int dim,
                 const nlohmann::json& meta, const fs::path& out_dir)
{
    gpa_manifest* raw_manifest = nullptr;
    check(gpa_manifest_create(dim, &raw_manifest), "manifest");
    ManifestPtr manifest(raw_manifest);
    for (const auto& [id, sets] : groups) {
        fs::create_directories(out_dir / id);
        std::vector<std::string> rel;
        for (std::size_t k = 0; k < sets.size(); ++k) {
            rel.push_back((fs::path(id) / member_name(k)).generic_string());
            write_points(sets[k].get(), out_dir / rel.back());
        }
        std::vector<const char*> cpaths;
        for (const auto& r : rel)
            cpaths.push_back(r.c_str());
        check(gpa_manifest_add_group(manifest.get(), id.c_str(), cpaths.data(), cpaths.size()), id);
    }
    check(gpa_manifest_set_meta(manifest.get(), meta.dump().c_str()), "manifest meta");
    const auto path = (out_dir / "manifest.json").string();
    check(gpa_manifest_save(manifest.get(), path.c_str()), path);
    std::cout << "wrote " << path << '\n';
}

gpa_noise_kind parse_kind(const std::string& s)
{
    if (s == "po")
        return GPA_NOISE_POINT_OUTLIER;
    if (s == "di")
        return GPA_NOISE_DATA_INCOMPLETENESS;
    if (s == "gd")
        return GPA_NOISE_GAUSSIAN_DISPLACEMENT;
    throw CliError("unknown noise kind '" + s + "' (expected po, di or gd)");
}

struct SynthOptions {
    std::string base = "fish";
    std::string mode = "deform";
    std::size_t points = 2048;
    std::size_t k = 7;
    std::size_t groups = 1;
    double level = 0.4;
    std::uint64_t seed = 1;
    std::string out = "synth_out";
};

int run_synth(const SynthOptions& o)
{
    const bool builtin = o.base == "fish" || o.base == "chair" || o.base == "table";
    if (o.mode != "deform" && o.mode != "instances")
        throw CliError("--mode must be 'deform' or 'instances'");
    if (o.mode == "instances" && (!builtin || o.base == "fish"))
        throw CliError("--mode instances needs a 3D built-in base (chair or table)");

    std::vector<std::pair<std::string, std::vector<PointSetPtr>>> groups;
    int dim = 0;
    for (std::size_t g = 0; g < o.groups; ++g) {
        const std::uint64_t group_seed = o.seed + 7919 * g;
        std::vector<PointSetPtr> members(o.k);
        if (o.mode == "deform") {
            gpa_point_set* base = nullptr;
            if (builtin) {
                check(gpa_builtin_shape(o.base.c_str(), o.points, group_seed, &base), o.base);
            } else {
                auto loaded = read_points(o.base);
                check(gpa_normalize(loaded.get(), &base), o.base);
            }
            PointSetPtr base_ptr(base);
            std::vector<gpa_point_set*> out(o.k, nullptr);
            check(gpa_make_group(base_ptr.get(), o.k, o.level, group_seed, out.data()), "make_group");
            for (std::size_t k = 0; k < o.k; ++k)
                members[k].reset(out[k]);
        } else {
            for (std::size_t k = 0; k < o.k; ++k) {
                gpa_point_set* shape = nullptr;
                check(gpa_builtin_shape(o.base.c_str(), o.points, group_seed * 131 + k, &shape), o.base);
                PointSetPtr shape_ptr(shape);
                gpa_point_set* deformed = nullptr;
                check(gpa_tps_deform(shape_ptr.get(), o.level, group_seed * 131 + k, &deformed), "tps_deform");
                members[k].reset(deformed);
            }
        }
        dim = gpa_point_set_dim(members.front().get());
        groups.emplace_back("group" + std::to_string(g), std::move(members));
    }
    const nlohmann::json meta = {{"generator", "synth"}, {"base", o.base},   {"mode", o.mode},
                                 {"level", o.level},     {"seed", o.seed},   {"k", o.k},
                                 {"groups", o.groups},   {"noise", nlohmann::json::array()}};
    save_groups(groups, dim, meta, o.out);
    return 0;
}

struct NoiseOptions {
    std::string manifest;
    std::string kind;
    double level = 0.0;
    std::uint64_t seed = 1;
    std::vector<std::size_t> members;
    std::string out = "noise_out";
};

int run_noise(const NoiseOptions& o)
{
    const auto kind = parse_kind(o.kind);
    auto manifest = load_manifest(o.manifest);
    std::vector<std::pair<std::string, std::vector<PointSetPtr>>> groups;
    for (std::size_t g = 0; g < gpa_manifest_group_count(manifest.get()); ++g) {
        auto sets = read_group(manifest.get(), g);
        for (std::size_t k = 0; k < sets.size(); ++k) {
            const bool selected =
                o.members.empty() || std::find(o.members.begin(), o.members.end(), k) != o.members.end();
            if (!selected)
                continue;
            gpa_point_set* noisy = nullptr;
            check(gpa_apply_noise(sets[k].get(), kind, o.level, o.seed + 104729 * g + k, &noisy), "noise");
            sets[k].reset(noisy);
        }
        groups.emplace_back(gpa_manifest_group_id(manifest.get(), g), std::move(sets));
    }
    const nlohmann::json meta = {{"generator", "noise"},
                                 {"source", o.manifest},
                                 {"noise", {{{"kind", o.kind}, {"level", o.level}, {"seed", o.seed},
                                             {"members", o.members}}}}};
    save_groups(groups, gpa_manifest_dim(manifest.get()), meta, o.out);
    return 0;
}

struct AlignOptions {
    std::string manifest;
    std::string config;
    std::string out = "align_out";
    bool svg = false;
    bool quiet = false;
    bool per_group = false;
};

void print_progress(std::size_t step, double alignment, double regularizer, double total, void*)
{
    if (step % 50 == 0)
        std::fprintf(stderr, "step %5zu  alignment %.6g  regularizer %.6g  total %.6g\n", step, alignment,
                     regularizer, total);
}

int run_align(const AlignOptions& o, const nlohmann::json& overrides)
{
    auto manifest = load_manifest(o.manifest);
    gpa_config* raw_cfg = nullptr;
    check(gpa_config_create(&raw_cfg), "config");
    ConfigPtr cfg(raw_cfg);
    if (!o.config.empty())
        check(gpa_config_load_json(cfg.get(), o.config.c_str()), o.config);
    if (!overrides.empty())
        check(gpa_config_merge_json(cfg.get(), overrides.dump().c_str()), "command-line overrides");
    if (o.per_group)
        check(gpa_config_set_int(cfg.get(), "shared_decoder", 0), "per-group");

    gpa_result* raw_result = nullptr;
    check(gpa_align(manifest.get(), cfg.get(), o.quiet ? nullptr : print_progress, nullptr, &raw_result), "align");
    ResultPtr result(raw_result);

    const fs::path out(o.out);
    fs::create_directories(out);
    std::vector<std::pair<std::string, std::vector<PointSetPtr>>> aligned;
    for (std::size_t g = 0; g < gpa_result_group_count(result.get()); ++g) {
        const std::string id = gpa_result_group_id(result.get(), g);
        std::vector<PointSetPtr> sets;
        for (std::size_t k = 0; k < gpa_result_member_count(result.get(), g); ++k) {
            gpa_point_set* ps = nullptr;
            check(gpa_result_transformed(result.get(), g, k, &ps), id);
            sets.emplace_back(ps);
        }
        if (o.svg && gpa_manifest_dim(manifest.get()) == 2) {
            const auto before = read_group(manifest.get(), g);
            const auto before_raw = raw(before);
            const auto after_raw = raw(sets);
            const auto p0 = (out / (id + "_input.svg")).string();
            const auto p1 = (out / (id + "_aligned.svg")).string();
            check(gpa_render_svg(before_raw.data(), before_raw.size(), p0.c_str()), p0);
            check(gpa_render_svg(after_raw.data(), after_raw.size(), p1.c_str()), p1);
        }
        double initial = 0.0, final_ = 0.0;
        check(gpa_result_normalized_cd(result.get(), g, &initial, &final_), id);
        std::printf("%-12s K=%-3zu normalized CD %.6g -> %.6g (%.1f%% reduction)\n", id.c_str(), sets.size(),
                    initial, final_, initial > 0 ? 100.0 * (initial - final_) / initial : 0.0);
        aligned.emplace_back(id, std::move(sets));
    }

    std::vector<char> cfg_text;
    std::size_t needed = 0;
    check(gpa_config_to_json(cfg.get(), nullptr, 0, &needed), "config");
    cfg_text.resize(needed);
    check(gpa_config_to_json(cfg.get(), cfg_text.data(), cfg_text.size(), &needed), "config");
    const nlohmann::json meta = {{"generator", "align"},
                                 {"source", o.manifest},
                                 {"config", nlohmann::json::parse(cfg_text.data())}};
    save_groups(aligned, gpa_manifest_dim(manifest.get()), meta, out);

    const auto report = (out / "report.csv").string();
    const auto trace = (out / "trace.csv").string();
    check(gpa_result_write_report(result.get(), report.c_str()), report);
    check(gpa_result_write_trace(result.get(), trace.c_str()), trace);
    std::printf("steps %zu, %.2f s; wrote %s and %s\n", gpa_result_steps(result.get()),
                gpa_result_wall_seconds(result.get()), report.c_str(), trace.c_str());
    return 0;
}

int run_eval(const std::string& manifest_path)
{
    auto manifest = load_manifest(manifest_path);
    const std::size_t n = gpa_manifest_group_count(manifest.get());
    double sum = 0.0;
    std::printf("group_id,K,normalized_cd\n");
    for (std::size_t g = 0; g < n; ++g) {
        double ncd = 0.0;
        check(gpa_manifest_normalized_cd(manifest.get(), g, &ncd), gpa_manifest_group_id(manifest.get(), g));
        std::printf("%s,%zu,%.17g\n", gpa_manifest_group_id(manifest.get(), g),
                    gpa_manifest_group_size(manifest.get(), g), ncd);
        sum += ncd;
    }
    std::printf("mean,,%.17g\n", n ? sum / static_cast<double>(n) : 0.0);
    return 0;
}

int run_plot(const std::vector<std::string>& files, const std::string& out)
{
    std::vector<PointSetPtr> sets;
    for (const auto& f : files)
        sets.push_back(read_points(f));
    const auto ptrs = raw(sets);
    check(gpa_render_svg(ptrs.data(), ptrs.size(), out.c_str()), out);
    std::cout << "wrote " << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Groupwise non-rigid point set alignment"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(gpa_version()));

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a group of TPS-deformed shapes and a manifest");
    synth_cmd->add_option("--base", synth.base, "Built-in shape (fish, chair, table) or a point file")
        ->capture_default_str();
    synth_cmd->add_option("--mode", synth.mode,
                          "deform: K deformed copies of one base; instances: K random 3D instances")
        ->capture_default_str();
    synth_cmd->add_option("--points", synth.points, "Points per built-in 3D shape")->capture_default_str();
    synth_cmd->add_option("--k", synth.k, "Shapes per group")->check(CLI::Range(2, 100000))->capture_default_str();
    synth_cmd->add_option("--groups", synth.groups, "Number of groups")->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth_cmd->add_option("--level", synth.level, "Deformation level")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();

    NoiseOptions noise;
    auto* noise_cmd = app.add_subcommand("noise", "Corrupt group members with P.O., D.I. or G.D. noise");
    noise_cmd->add_option("--manifest", noise.manifest, "Input manifest")->required();
    noise_cmd->add_option("--kind", noise.kind, "po | di | gd")->required();
    noise_cmd->add_option("--level", noise.level, "Noise level")->required();
    noise_cmd->add_option("--seed", noise.seed, "Random seed")->capture_default_str();
    noise_cmd->add_option("--members", noise.members, "Member indices to corrupt (default: all)")->delimiter(',');
    noise_cmd->add_option("--out", noise.out, "Output directory")->capture_default_str();

    AlignOptions align;
    std::size_t steps = 0, latent_dim = 0, threads = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    auto* align_cmd = app.add_subcommand("align", "Jointly align every group in a manifest");
    align_cmd->add_option("--manifest", align.manifest, "Input manifest")->required();
    align_cmd->add_option("--config", align.config, "JSON config (flags override it)");
    auto* steps_opt = align_cmd->add_option("--steps", steps, "Maximum optimization steps");
    auto* lambda_opt = align_cmd->add_option("--lambda", lambda, "Drift regularization weight");
    auto* seed_opt = align_cmd->add_option("--seed", seed, "Initialization seed");
    auto* latent_opt = align_cmd->add_option("--latent-dim", latent_dim, "Group latent descriptor length");
    auto* threads_opt = align_cmd->add_option("--threads", threads, "Worker threads over groups");
    align_cmd->add_flag("--per-group", align.per_group, "Independent decoder per group");
    align_cmd->add_option("--out", align.out, "Output directory")->capture_default_str();
    align_cmd->add_flag("--svg", align.svg, "Write before/after SVG plots (2D only)");
    align_cmd->add_flag("--quiet", align.quiet, "No progress output");

    std::string eval_manifest;
    auto* eval_cmd = app.add_subcommand("eval", "Normalized groupwise Chamfer distance per group");
    eval_cmd->add_option("--manifest", eval_manifest, "Manifest to evaluate")->required();

    std::vector<std::string> plot_files;
    std::string plot_out = "plot.svg";
    auto* plot_cmd = app.add_subcommand("plot", "Overlay 2D point files in one SVG");
    plot_cmd->add_option("files", plot_files, "Point files")->required();
    plot_cmd->add_option("--out", plot_out, "Output SVG")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed())
            return run_synth(synth);
        if (noise_cmd->parsed())
            return run_noise(noise);
        if (align_cmd->parsed()) {
            nlohmann::json overrides = nlohmann::json::object();
            if (steps_opt->count())
                overrides["max_steps"] = steps;
            if (lambda_opt->count())
                overrides["lambda"] = lambda;
            if (seed_opt->count())
                overrides["seed"] = seed;
            if (latent_opt->count())
                overrides["latent_dim"] = latent_dim;
            if (threads_opt->count())
                overrides["threads"] = threads;
            return run_align(align, overrides);
        }
        if (eval_cmd->parsed())
            return run_eval(eval_manifest);
        if (plot_cmd->parsed())
            return run_plot(plot_files, plot_out);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
