#include "gpalign/gpalign.h"

#include "gpalign/error.hpp"
#include "gpalign/geometry.hpp"
#include "gpalign/io.hpp"
#include "gpalign/loss.hpp"
#include "gpalign/optimizer.hpp"
#include "gpalign/synthesis.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iterator>
#include <memory>
#include <cstring>
#include <new>
#include <string>
#include <utility>
#include <vector>

struct gpa_point_set {
    gpalign::PointSet value;
};

struct gpa_config {
    gpalign::OptimConfig value;
};

struct gpa_manifest {
    gpalign::GroupManifest value;
    std::vector<std::vector<std::string>> resolved; // backing store for member_path
};

struct gpa_result {
    gpalign::AlignmentResult value;
    double wall_seconds = 0.0;
};

namespace {

thread_local std::string g_last_error;

gpa_status record(gpa_status status, std::string message)
{
    g_last_error = std::move(message);
    return status;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
gpa_status guarded(Fn&& fn) noexcept
{
    try {
        fn();
        return GPA_OK;
    } catch (const gpalign::Error& e) {
        return record(static_cast<gpa_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return record(GPA_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return record(GPA_ERR_INTERNAL, e.what());
    } catch (...) {
        return record(GPA_ERR_INTERNAL, "unknown exception");
    }
}

#define GPA_REQUIRE(cond)                                                                  \
    do {                                                                                   \
        if (!(cond))                                                                       \
            return record(GPA_ERR_INVALID_ARGUMENT, "invalid argument: " #cond);           \
    } while (0)

gpa_point_set* wrap(gpalign::PointSet ps)
{
    return new gpa_point_set{std::move(ps)};
}

std::vector<gpalign::PointSet> unwrap(const gpa_point_set* const* sets, std::size_t k)
{
    std::vector<gpalign::PointSet> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!sets[i])
            gpalign::fail(gpalign::ErrorCode::InvalidArgument, "null point set at position " + std::to_string(i));
        out.push_back(sets[i]->value);
    }
    return out;
}

void refresh_paths(gpa_manifest& m)
{
    m.resolved.clear();
    for (const auto& g : m.value.groups) {
        std::vector<std::string> paths;
        for (const auto& p : g.members)
            paths.push_back(m.value.resolve(p).string());
        m.resolved.push_back(std::move(paths));
    }
}

} // namespace

extern "C" {

const char* gpa_version(void)
{
    return "1.0.0";
}

const char* gpa_status_string(gpa_status status)
{
    return gpalign::to_string(static_cast<gpalign::ErrorCode>(status));
}

const char* gpa_last_error(void)
{
    return g_last_error.c_str();
}

gpa_status gpa_point_set_create(const double* coords, size_t n_points, int dim, gpa_point_set** out)
{
    GPA_REQUIRE(out);
    GPA_REQUIRE(coords || n_points == 0);
    return guarded([&] {
        if (dim != 2 && dim != 3)
            gpalign::fail(gpalign::ErrorCode::DimMismatch, "dim must be 2 or 3");
        Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(coords, dim, static_cast<Eigen::Index>(n_points));
        *out = wrap(gpalign::PointSet(std::move(m)));
    });
}

void gpa_point_set_free(gpa_point_set* ps)
{
    delete ps;
}

size_t gpa_point_set_size(const gpa_point_set* ps)
{
    return ps ? ps->value.size() : 0;
}

int gpa_point_set_dim(const gpa_point_set* ps)
{
    return ps ? ps->value.dim() : 0;
}

gpa_status gpa_point_set_coords(const gpa_point_set* ps, double* out, size_t capacity)
{
    GPA_REQUIRE(ps && out);
    const auto& c = ps->value.coords();
    if (capacity < static_cast<size_t>(c.size()))
        return record(GPA_ERR_LENGTH_MISMATCH, "output buffer holds " + std::to_string(capacity) + " doubles, need " +
                                                   std::to_string(c.size()));
    std::memcpy(out, c.data(), sizeof(double) * static_cast<size_t>(c.size()));
    return GPA_OK;
}

gpa_status gpa_point_set_read(const char* path, gpa_point_set** out)
{
    GPA_REQUIRE(path && out);
    return guarded([&] { *out = wrap(gpalign::read_point_set(path)); });
}

gpa_status gpa_point_set_write(const gpa_point_set* ps, const char* path)
{
    GPA_REQUIRE(ps && path);
    return guarded([&] { gpalign::write_point_set(ps->value, path); });
}

gpa_status gpa_normalize(const gpa_point_set* ps, gpa_point_set** out)
{
    GPA_REQUIRE(ps && out);
    return guarded([&] { *out = wrap(gpalign::normalize(ps->value)); });
}

gpa_status gpa_builtin_shape(const char* name, size_t n_points, uint64_t seed, gpa_point_set** out)
{
    GPA_REQUIRE(name && out);
    return guarded([&] { *out = wrap(gpalign::builtin_shape(name, n_points, seed)); });
}

gpa_status gpa_tps_deform(const gpa_point_set* ps, double level, uint64_t seed, gpa_point_set** out)
{
    GPA_REQUIRE(ps && out);
    return guarded([&] { *out = wrap(gpalign::tps_deform(ps->value, level, seed)); });
}

gpa_status gpa_make_group(const gpa_point_set* base, size_t k, double level, uint64_t seed,
                          gpa_point_set** members)
{
    GPA_REQUIRE(base && members);
    return guarded([&] {
        auto group = gpalign::make_group(base->value, k, level, seed);
        std::vector<std::unique_ptr<gpa_point_set>> owned;
        for (const auto& m : group.members())
            owned.emplace_back(wrap(m));
        for (size_t i = 0; i < k; ++i)
            members[i] = owned[i].release();
    });
}

gpa_status gpa_apply_noise(const gpa_point_set* ps, gpa_noise_kind kind, double level, uint64_t seed,
                           gpa_point_set** out)
{
    GPA_REQUIRE(ps && out);
    GPA_REQUIRE(kind >= GPA_NOISE_POINT_OUTLIER && kind <= GPA_NOISE_GAUSSIAN_DISPLACEMENT);
    return guarded([&] {
        const gpalign::NoiseSpec spec{static_cast<gpalign::NoiseKind>(kind), level, seed};
        *out = wrap(gpalign::apply_noise(ps->value, spec));
    });
}

gpa_status gpa_chamfer(const gpa_point_set* a, const gpa_point_set* b, double* out)
{
    GPA_REQUIRE(a && b && out);
    return guarded([&] { *out = gpalign::chamfer(a->value, b->value); });
}

gpa_status gpa_groupwise_chamfer(const gpa_point_set* const* sets, size_t k, double* out)
{
    GPA_REQUIRE((sets || k == 0) && out);
    return guarded([&] { *out = gpalign::groupwise_chamfer(unwrap(sets, k)); });
}

gpa_status gpa_normalized_cd(const gpa_point_set* const* sets, size_t k, double* out)
{
    GPA_REQUIRE((sets || k == 0) && out);
    return guarded([&] { *out = gpalign::normalized_cd(unwrap(sets, k)); });
}

gpa_status gpa_render_svg(const gpa_point_set* const* sets, size_t k, const char* path)
{
    GPA_REQUIRE((sets || k == 0) && path);
    return guarded([&] { gpalign::render_svg(unwrap(sets, k), path); });
}

gpa_status gpa_config_create(gpa_config** out)
{
    GPA_REQUIRE(out);
    return guarded([&] { *out = new gpa_config{}; });
}

void gpa_config_free(gpa_config* cfg)
{
    delete cfg;
}

gpa_status gpa_config_load_json(gpa_config* cfg, const char* path)
{
    GPA_REQUIRE(cfg && path);
    return guarded([&] {
        gpalign::OptimConfig next = cfg->value;
        std::ifstream in(path);
        if (!in)
            gpalign::fail(gpalign::ErrorCode::IoError, std::string(path) + ": cannot open config");
        const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            gpalign::apply_config_json(next, text);
        } catch (const gpalign::Error& e) {
            gpalign::fail(e.code(), std::string(path) + ": " + e.what());
        }
        cfg->value = std::move(next);
    });
}

gpa_status gpa_config_merge_json(gpa_config* cfg, const char* json_text)
{
    GPA_REQUIRE(cfg && json_text);
    return guarded([&] {
        gpalign::OptimConfig next = cfg->value;
        gpalign::apply_config_json(next, json_text);
        cfg->value = std::move(next);
    });
}

gpa_status gpa_config_set_double(gpa_config* cfg, const char* key, double value)
{
    GPA_REQUIRE(cfg && key);
    return guarded([&] {
        const nlohmann::json j = {{key, value}};
        gpalign::apply_config_json(cfg->value, j.dump());
    });
}

gpa_status gpa_config_set_int(gpa_config* cfg, const char* key, int64_t value)
{
    GPA_REQUIRE(cfg && key);
    return guarded([&] {
        nlohmann::json j;
        if (std::strcmp(key, "shared_decoder") == 0)
            j[key] = value != 0;
        else if (value >= 0)
            j[key] = static_cast<std::uint64_t>(value);
        else
            j[key] = value;
        gpalign::apply_config_json(cfg->value, j.dump());
    });
}

gpa_status gpa_config_to_json(const gpa_config* cfg, char* buf, size_t capacity, size_t* needed)
{
    GPA_REQUIRE(cfg);
    return guarded([&] {
        const std::string text = gpalign::config_to_json(cfg->value);
        if (needed)
            *needed = text.size() + 1;
        if (!buf)
            return;
        if (capacity < text.size() + 1)
            gpalign::fail(gpalign::ErrorCode::LengthMismatch, "buffer holds " + std::to_string(capacity) +
                                                                  " bytes, need " + std::to_string(text.size() + 1));
        std::memcpy(buf, text.c_str(), text.size() + 1);
    });
}

gpa_status gpa_manifest_create(int dim, gpa_manifest** out)
{
    GPA_REQUIRE(out);
    if (dim != 2 && dim != 3)
        return record(GPA_ERR_DIM_MISMATCH, "manifest dim must be 2 or 3");
    return guarded([&] {
        auto* m = new gpa_manifest{};
        m->value.dim = dim;
        *out = m;
    });
}

gpa_status gpa_manifest_load(const char* path, gpa_manifest** out)
{
    GPA_REQUIRE(path && out);
    return guarded([&] {
        auto m = std::make_unique<gpa_manifest>();
        m->value = gpalign::load_manifest(path);
        refresh_paths(*m);
        *out = m.release();
    });
}

void gpa_manifest_free(gpa_manifest* m)
{
    delete m;
}

gpa_status gpa_manifest_add_group(gpa_manifest* m, const char* id, const char* const* member_paths, size_t k)
{
    GPA_REQUIRE(m && id && member_paths);
    if (k < 2)
        return record(GPA_ERR_TOO_FEW_SETS, "a group needs at least 2 members");
    return guarded([&] {
        gpalign::ManifestGroup g;
        g.id = id;
        for (size_t i = 0; i < k; ++i) {
            if (!member_paths[i])
                gpalign::fail(gpalign::ErrorCode::InvalidArgument, "null member path");
            g.members.emplace_back(member_paths[i]);
        }
        m->value.groups.push_back(std::move(g));
        refresh_paths(*m);
    });
}

gpa_status gpa_manifest_set_meta(gpa_manifest* m, const char* json_text)
{
    GPA_REQUIRE(m && json_text);
    return guarded([&] {
        try {
            m->value.meta_json = nlohmann::json::parse(json_text).dump();
        } catch (const nlohmann::json::exception& e) {
            gpalign::fail(gpalign::ErrorCode::ParseError, std::string("manifest meta: ") + e.what());
        }
    });
}

gpa_status gpa_manifest_save(const gpa_manifest* m, const char* path)
{
    GPA_REQUIRE(m && path);
    return guarded([&] { gpalign::save_manifest(m->value, path); });
}

int gpa_manifest_dim(const gpa_manifest* m)
{
    return m ? m->value.dim : 0;
}

size_t gpa_manifest_group_count(const gpa_manifest* m)
{
    return m ? m->value.groups.size() : 0;
}

const char* gpa_manifest_group_id(const gpa_manifest* m, size_t group)
{
    if (!m || group >= m->value.groups.size())
        return nullptr;
    return m->value.groups[group].id.c_str();
}

size_t gpa_manifest_group_size(const gpa_manifest* m, size_t group)
{
    if (!m || group >= m->value.groups.size())
        return 0;
    return m->value.groups[group].members.size();
}

const char* gpa_manifest_member_path(const gpa_manifest* m, size_t group, size_t member)
{
    if (!m || group >= m->resolved.size() || member >= m->resolved[group].size())
        return nullptr;
    return m->resolved[group][member].c_str();
}

gpa_status gpa_manifest_normalized_cd(const gpa_manifest* m, size_t group, double* out)
{
    GPA_REQUIRE(m && out);
    GPA_REQUIRE(group < m->value.groups.size());
    return guarded([&] {
        gpalign::GroupManifest one = m->value;
        one.groups = {m->value.groups[group]};
        const auto groups = gpalign::load_groups(one);
        *out = gpalign::normalized_cd(groups.front().members());
    });
}

gpa_status gpa_align(const gpa_manifest* m, const gpa_config* cfg, gpa_progress_fn progress, void* user,
                     gpa_result** out)
{
    GPA_REQUIRE(m && out);
    return guarded([&] {
        const auto groups = gpalign::load_groups(m->value);
        const gpalign::OptimConfig config = cfg ? cfg->value : gpalign::OptimConfig{};
        gpalign::ProgressFn fn;
        if (progress)
            fn = [progress, user](std::size_t step, const gpalign::LossBreakdown& l) {
                progress(step, l.alignment, l.regularizer, l.total, user);
            };
        auto r = std::make_unique<gpa_result>();
        const auto start = std::chrono::steady_clock::now();
        r->value = gpalign::align(groups, config, fn);
        r->wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        *out = r.release();
    });
}

void gpa_result_free(gpa_result* r)
{
    delete r;
}

size_t gpa_result_group_count(const gpa_result* r)
{
    return r ? r->value.groups.size() : 0;
}

size_t gpa_result_steps(const gpa_result* r)
{
    return r ? r->value.steps : 0;
}

double gpa_result_wall_seconds(const gpa_result* r)
{
    return r ? r->wall_seconds : 0.0;
}

const char* gpa_result_group_id(const gpa_result* r, size_t group)
{
    if (!r || group >= r->value.groups.size())
        return nullptr;
    return r->value.groups[group].id.c_str();
}

size_t gpa_result_member_count(const gpa_result* r, size_t group)
{
    if (!r || group >= r->value.groups.size())
        return 0;
    return r->value.groups[group].transformed.size();
}

gpa_status gpa_result_transformed(const gpa_result* r, size_t group, size_t member, gpa_point_set** out)
{
    GPA_REQUIRE(r && out);
    GPA_REQUIRE(group < r->value.groups.size());
    GPA_REQUIRE(member < r->value.groups[group].transformed.size());
    return guarded([&] { *out = wrap(r->value.groups[group].transformed[member]); });
}

gpa_status gpa_result_normalized_cd(const gpa_result* r, size_t group, double* initial, double* final_)
{
    GPA_REQUIRE(r);
    GPA_REQUIRE(group < r->value.groups.size());
    const auto& g = r->value.groups[group];
    if (initial)
        *initial = g.initial_normalized_cd;
    if (final_)
        *final_ = g.final_loss.normalized_cd;
    return GPA_OK;
}

size_t gpa_result_trace_length(const gpa_result* r)
{
    return r ? r->value.trace.size() : 0;
}

gpa_status gpa_result_trace_entry(const gpa_result* r, size_t step, double* alignment, double* regularizer,
                                  double* total)
{
    GPA_REQUIRE(r);
    GPA_REQUIRE(step < r->value.trace.size());
    const auto& e = r->value.trace[step];
    if (alignment)
        *alignment = e.alignment;
    if (regularizer)
        *regularizer = e.regularizer;
    if (total)
        *total = e.total;
    return GPA_OK;
}

gpa_status gpa_result_write_report(const gpa_result* r, const char* path)
{
    GPA_REQUIRE(r && path);
    return guarded([&] { gpalign::write_report_csv(gpalign::make_report(r->value, r->wall_seconds), path); });
}

gpa_status gpa_result_write_trace(const gpa_result* r, const char* path)
{
    GPA_REQUIRE(r && path);
    return guarded([&] { gpalign::write_trace_csv(r->value.trace, path); });
}

} // extern "C"
