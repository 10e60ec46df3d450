#ifndef GPALIGN_H
#define GPALIGN_H

/*
 * C interface to the gpalign library: groupwise non-rigid point set
 * alignment with an optimized group latent code and an MLP drift decoder.
 *
 * Conventions:
 *  - Every fallible call returns gpa_status; GPA_OK is 0.
 *  - Output handles are written only on success and are owned by the caller
 *    (release with the matching *_free function).
 *  - On failure gpa_last_error() returns a thread-local description, valid
 *    until the next failing call on the same thread.
 *  - Point coordinates cross the boundary point-major: x0 y0 [z0] x1 y1 ...
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(GPALIGN_BUILDING)
#    define GPA_API __declspec(dllexport)
#  else
#    define GPA_API __declspec(dllimport)
#  endif
#else
#  define GPA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gpa_status {
    GPA_OK = 0,
    GPA_ERR_INVALID_ARGUMENT = 1,
    GPA_ERR_EMPTY_SET = 2,
    GPA_ERR_DEGENERATE_SET = 3,
    GPA_ERR_LENGTH_MISMATCH = 4,
    GPA_ERR_DIM_MISMATCH = 5,
    GPA_ERR_ZERO_DIM = 6,
    GPA_ERR_SINGULAR_TPS = 7,
    GPA_ERR_LEVEL_OUT_OF_RANGE = 8,
    GPA_ERR_TOO_FEW_SETS = 9,
    GPA_ERR_EMPTY_INDEX = 10,
    GPA_ERR_SHAPE_MISMATCH = 11,
    GPA_ERR_NON_FINITE_GRADIENT = 12,
    GPA_ERR_NON_FINITE_LOSS = 13,
    GPA_ERR_MISSING_FORWARD_CACHE = 14,
    GPA_ERR_PARSE = 15,
    GPA_ERR_MIXED_DIMENSIONALITY = 16,
    GPA_ERR_EMPTY_FILE = 17,
    GPA_ERR_IO = 18,
    GPA_ERR_NOT_2D = 19,
    GPA_ERR_INTERNAL = 20
} gpa_status;

typedef enum gpa_noise_kind {
    GPA_NOISE_POINT_OUTLIER = 0,        /* P.O.: append Gaussian outliers */
    GPA_NOISE_DATA_INCOMPLETENESS = 1,  /* D.I.: delete a contiguous patch */
    GPA_NOISE_GAUSSIAN_DISPLACEMENT = 2 /* G.D.: jitter every coordinate */
} gpa_noise_kind;

typedef struct gpa_point_set gpa_point_set;
typedef struct gpa_config gpa_config;
typedef struct gpa_manifest gpa_manifest;
typedef struct gpa_result gpa_result;

typedef void (*gpa_progress_fn)(size_t step, double alignment, double regularizer, double total, void* user);

GPA_API const char* gpa_version(void);
GPA_API const char* gpa_status_string(gpa_status status);
GPA_API const char* gpa_last_error(void);

/* ---- point sets ---- */

GPA_API gpa_status gpa_point_set_create(const double* coords, size_t n_points, int dim, gpa_point_set** out);
GPA_API void gpa_point_set_free(gpa_point_set* ps);
GPA_API size_t gpa_point_set_size(const gpa_point_set* ps);
GPA_API int gpa_point_set_dim(const gpa_point_set* ps);
/* Copies size*dim doubles; capacity is counted in doubles. */
GPA_API gpa_status gpa_point_set_coords(const gpa_point_set* ps, double* out, size_t capacity);
GPA_API gpa_status gpa_point_set_read(const char* path, gpa_point_set** out);
GPA_API gpa_status gpa_point_set_write(const gpa_point_set* ps, const char* path);
GPA_API gpa_status gpa_normalize(const gpa_point_set* ps, gpa_point_set** out);

/* "fish" (91-point 2D contour), "chair" or "table" (3D surface samples). */
GPA_API gpa_status gpa_builtin_shape(const char* name, size_t n_points, uint64_t seed, gpa_point_set** out);

/* ---- synthesis ---- */

GPA_API gpa_status gpa_tps_deform(const gpa_point_set* ps, double level, uint64_t seed, gpa_point_set** out);
/* k independently deformed copies of base; writes k new handles into members. */
GPA_API gpa_status gpa_make_group(const gpa_point_set* base, size_t k, double level, uint64_t seed,
                                  gpa_point_set** members);
GPA_API gpa_status gpa_apply_noise(const gpa_point_set* ps, gpa_noise_kind kind, double level, uint64_t seed,
                                   gpa_point_set** out);

/* ---- metrics and plots ---- */

GPA_API gpa_status gpa_chamfer(const gpa_point_set* a, const gpa_point_set* b, double* out);
GPA_API gpa_status gpa_groupwise_chamfer(const gpa_point_set* const* sets, size_t k, double* out);
GPA_API gpa_status gpa_normalized_cd(const gpa_point_set* const* sets, size_t k, double* out);
GPA_API gpa_status gpa_render_svg(const gpa_point_set* const* sets, size_t k, const char* path);

/* ---- optimizer configuration ---- */

GPA_API gpa_status gpa_config_create(gpa_config** out);
GPA_API void gpa_config_free(gpa_config* cfg);
/* Keys mirror the config file: max_steps, lr_start, lr_end, lr_decay_steps,
 * lambda, latent_dim, hidden, seed, convergence_rel_tol, convergence_window,
 * shared_decoder, threads. Later calls override earlier ones. */
GPA_API gpa_status gpa_config_load_json(gpa_config* cfg, const char* path);
GPA_API gpa_status gpa_config_merge_json(gpa_config* cfg, const char* json_text);
GPA_API gpa_status gpa_config_set_double(gpa_config* cfg, const char* key, double value);
GPA_API gpa_status gpa_config_set_int(gpa_config* cfg, const char* key, int64_t value);
/* Writes a NUL-terminated JSON dump; *needed receives the full length + 1.
 * Pass buf = NULL to query the size; a short buffer gives GPA_ERR_LENGTH_MISMATCH. */
GPA_API gpa_status gpa_config_to_json(const gpa_config* cfg, char* buf, size_t capacity, size_t* needed);

/* ---- group manifests ---- */

GPA_API gpa_status gpa_manifest_create(int dim, gpa_manifest** out);
GPA_API gpa_status gpa_manifest_load(const char* path, gpa_manifest** out);
GPA_API void gpa_manifest_free(gpa_manifest* m);
GPA_API gpa_status gpa_manifest_add_group(gpa_manifest* m, const char* id, const char* const* member_paths,
                                          size_t k);
GPA_API gpa_status gpa_manifest_set_meta(gpa_manifest* m, const char* json_text);
GPA_API gpa_status gpa_manifest_save(const gpa_manifest* m, const char* path);
GPA_API int gpa_manifest_dim(const gpa_manifest* m);
GPA_API size_t gpa_manifest_group_count(const gpa_manifest* m);
GPA_API const char* gpa_manifest_group_id(const gpa_manifest* m, size_t group);
GPA_API size_t gpa_manifest_group_size(const gpa_manifest* m, size_t group);
/* Member path resolved against the manifest directory; NULL when out of range. */
GPA_API const char* gpa_manifest_member_path(const gpa_manifest* m, size_t group, size_t member);
/* Normalized groupwise Chamfer distance of one group's files as they are. */
GPA_API gpa_status gpa_manifest_normalized_cd(const gpa_manifest* m, size_t group, double* out);

/* ---- alignment ---- */

GPA_API gpa_status gpa_align(const gpa_manifest* m, const gpa_config* cfg, gpa_progress_fn progress, void* user,
                             gpa_result** out);
GPA_API void gpa_result_free(gpa_result* r);
GPA_API size_t gpa_result_group_count(const gpa_result* r);
GPA_API size_t gpa_result_steps(const gpa_result* r);
GPA_API double gpa_result_wall_seconds(const gpa_result* r);
GPA_API const char* gpa_result_group_id(const gpa_result* r, size_t group);
GPA_API size_t gpa_result_member_count(const gpa_result* r, size_t group);
GPA_API gpa_status gpa_result_transformed(const gpa_result* r, size_t group, size_t member, gpa_point_set** out);
GPA_API gpa_status gpa_result_normalized_cd(const gpa_result* r, size_t group, double* initial, double* final_);
GPA_API size_t gpa_result_trace_length(const gpa_result* r);
GPA_API gpa_status gpa_result_trace_entry(const gpa_result* r, size_t step, double* alignment, double* regularizer,
                                          double* total);
GPA_API gpa_status gpa_result_write_report(const gpa_result* r, const char* path);
GPA_API gpa_status gpa_result_write_trace(const gpa_result* r, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* GPALIGN_H */
