#pragma once

#include "gpalign/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>

namespace gpalign {

/// Thin-plate-spline interpolant mapping control points onto targets.
/// Kernel U(r) = r^2 log r in 2D and U(r) = r in 3D, plus an affine term.
class TpsWarp {
public:
    /// Solves the interpolation system. Columns of both matrices are points.
    static TpsWarp solve(Eigen::MatrixXd control_points, Eigen::MatrixXd targets);

    Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
    PointSet apply(const PointSet& ps) const { return PointSet(apply(ps.coords())); }

    int dim() const noexcept { return static_cast<int>(control_points_.rows()); }
    const Eigen::MatrixXd& control_points() const noexcept { return control_points_; }
    const Eigen::MatrixXd& targets() const noexcept { return targets_; }
    /// n x dim radial coefficients.
    const Eigen::MatrixXd& kernel_weights() const noexcept { return kernel_weights_; }
    /// (dim + 1) x dim; first row is the translation.
    const Eigen::MatrixXd& affine_part() const noexcept { return affine_; }

    static double kernel(int dim, double r) noexcept;

private:
    Eigen::MatrixXd control_points_;
    Eigen::MatrixXd targets_;
    Eigen::MatrixXd kernel_weights_;
    Eigen::MatrixXd affine_;
};

inline constexpr double kTpsRidge = 1e-8;
inline constexpr int kTpsGrid2d = 5;
inline constexpr int kTpsGrid3d = 4;
inline constexpr double kOutlierStddev = 0.5;

/// Uniform control grid over the bounding box of `ps` (5x5 in 2D, 4x4x4 in 3D).
Eigen::MatrixXd control_grid(const PointSet& ps);

/// Adds i.i.d. N(0, (2 * level)^2) shifts to every grid coordinate.
Eigen::MatrixXd perturb_control_points(const Eigen::MatrixXd& grid, double level, std::uint64_t seed);

TpsWarp make_tps_warp(const PointSet& ps, double level, std::uint64_t seed);

/// Random smooth non-rigid deformation at the given deformation level.
PointSet tps_deform(const PointSet& ps, double level, std::uint64_t seed);

enum class NoiseKind { PointOutlier, DataIncompleteness, GaussianDisplacement };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::GaussianDisplacement;
    double level = 0.0;
    std::uint64_t seed = 0;
};

NoiseKind parse_noise_kind(const std::string& name);
const char* noise_kind_name(NoiseKind kind) noexcept;

/// Appends round(level * N) Gaussian outliers after the original points.
PointSet add_outlier_noise(const PointSet& ps, double level, std::uint64_t seed);

/// Deletes a random anchor and its round(level * N) - 1 nearest neighbours.
PointSet remove_patch(const PointSet& ps, double level, std::uint64_t seed);

/// Jitters every coordinate with N(0, level^2).
PointSet add_gaussian_displacement(const PointSet& ps, double level, std::uint64_t seed);

PointSet apply_noise(const PointSet& ps, const NoiseSpec& spec);

/// k independently deformed copies of `base`.
Group make_group(const PointSet& base, std::size_t k, double level, std::uint64_t seed,
                 std::string id = "group0");

/// 91-point normalized 2D fish contour.
PointSet fish_shape();

/// Chair-like 3D surface sample (seat, backrest, four legs) with seeded proportions, normalized.
PointSet chair_shape(std::size_t n_points, std::uint64_t seed);

/// Table-like 3D surface sample (top, four legs) with seeded proportions, normalized.
PointSet table_shape(std::size_t n_points, std::uint64_t seed);

/// Looks up "fish", "chair" or "table"; n_points and seed are ignored for the fish.
PointSet builtin_shape(const std::string& name, std::size_t n_points, std::uint64_t seed);

} // namespace gpalign
