#include "gpalign/synthesis.hpp"

#include "gpalign/error.hpp"
#include "gpalign/random.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace gpalign {

namespace {

void check_level(double level, const char* what)
{
    if (!(level >= 0.0) || !std::isfinite(level))
        fail(ErrorCode::LevelOutOfRange, std::string(what) + " level must be finite and >= 0");
}

Eigen::MatrixXd kernel_matrix(int dim, const Eigen::MatrixXd& centers, const Eigen::MatrixXd& points)
{
    Eigen::MatrixXd u(centers.cols(), points.cols());
    for (Eigen::Index j = 0; j < points.cols(); ++j)
        for (Eigen::Index i = 0; i < centers.cols(); ++i)
            u(i, j) = TpsWarp::kernel(dim, (points.col(j) - centers.col(i)).norm());
    return u;
}

} // namespace

double TpsWarp::kernel(int dim, double r) noexcept
{
    if (dim == 2)
        return r > 0.0 ? r * r * std::log(r) : 0.0;
    return r;
}

TpsWarp TpsWarp::solve(Eigen::MatrixXd control_points, Eigen::MatrixXd targets)
{
    const auto dim = control_points.rows();
    const auto n = control_points.cols();
    if (targets.rows() != dim || targets.cols() != n)
        fail(ErrorCode::ShapeMismatch, "TPS targets must match control points");
    if (n < dim + 1)
        fail(ErrorCode::SingularTpsSystem, "TPS needs at least dim + 1 control points");

    const auto m = n + dim + 1;
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(m, m);
    system.topLeftCorner(n, n) = kernel_matrix(static_cast<int>(dim), control_points, control_points);
    system.topLeftCorner(n, n).diagonal().array() += kTpsRidge;
    system.block(0, n, n, 1).setOnes();
    system.block(0, n + 1, n, dim) = control_points.transpose();
    system.block(n, 0, dim + 1, n) = system.block(0, n, n, dim + 1).transpose();

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, dim);
    rhs.topRows(n) = targets.transpose();

    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible())
        fail(ErrorCode::SingularTpsSystem, "TPS interpolation system is singular");
    Eigen::MatrixXd sol = lu.solve(rhs);
    if (!sol.allFinite())
        fail(ErrorCode::SingularTpsSystem, "TPS solution is not finite");

    TpsWarp warp;
    warp.control_points_ = std::move(control_points);
    warp.targets_ = std::move(targets);
    warp.kernel_weights_ = sol.topRows(n);
    warp.affine_ = sol.bottomRows(dim + 1);
    return warp;
}

Eigen::MatrixXd TpsWarp::apply(const Eigen::MatrixXd& points) const
{
    if (points.rows() != control_points_.rows())
        fail(ErrorCode::DimMismatch, "TPS warp applied to points of the wrong dimension");
    const Eigen::MatrixXd u = kernel_matrix(dim(), control_points_, points);
    Eigen::MatrixXd out = kernel_weights_.transpose() * u;
    out += affine_.bottomRows(dim()).transpose() * points;
    out.colwise() += affine_.row(0).transpose();
    return out;
}

Eigen::MatrixXd control_grid(const PointSet& ps)
{
    if (ps.empty())
        fail(ErrorCode::EmptySet, "cannot build a control grid for an empty set");
    const int dim = ps.dim();
    const int per_axis = dim == 2 ? kTpsGrid2d : kTpsGrid3d;
    const Eigen::VectorXd lo = ps.coords().rowwise().minCoeff();
    const Eigen::VectorXd hi = ps.coords().rowwise().maxCoeff();
    if (((hi - lo).array() <= 1e-12).any())
        fail(ErrorCode::SingularTpsSystem, "shape bounding box is flat; control grid is degenerate");

    Eigen::Index total = 1;
    for (int d = 0; d < dim; ++d)
        total *= per_axis;
    Eigen::MatrixXd grid(dim, total);
    for (Eigen::Index c = 0; c < total; ++c) {
        Eigen::Index rest = c;
        for (int d = 0; d < dim; ++d) {
            const auto step = rest % per_axis;
            rest /= per_axis;
            grid(d, c) = lo[d] + (hi[d] - lo[d]) * static_cast<double>(step) / (per_axis - 1);
        }
    }
    return grid;
}

Eigen::MatrixXd perturb_control_points(const Eigen::MatrixXd& grid, double level, std::uint64_t seed)
{
    check_level(level, "deformation");
    Eigen::MatrixXd out = grid;
    if (level == 0.0)
        return out;
    auto rng = make_rng(seed, 0x7b5);
    std::normal_distribution<double> shift(0.0, 2.0 * level);
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        for (Eigen::Index d = 0; d < out.rows(); ++d)
            out(d, c) += shift(rng);
    return out;
}

TpsWarp make_tps_warp(const PointSet& ps, double level, std::uint64_t seed)
{
    Eigen::MatrixXd grid = control_grid(ps);
    Eigen::MatrixXd targets = perturb_control_points(grid, level, seed);
    return TpsWarp::solve(std::move(grid), std::move(targets));
}

PointSet tps_deform(const PointSet& ps, double level, std::uint64_t seed)
{
    check_level(level, "deformation");
    if (level == 0.0)
        return ps;
    return make_tps_warp(ps, level, seed).apply(ps);
}

NoiseKind parse_noise_kind(const std::string& name)
{
    if (name == "po" || name == "outlier" || name == "PO")
        return NoiseKind::PointOutlier;
    if (name == "di" || name == "incomplete" || name == "DI")
        return NoiseKind::DataIncompleteness;
    if (name == "gd" || name == "gaussian" || name == "GD")
        return NoiseKind::GaussianDisplacement;
    fail(ErrorCode::InvalidArgument, "unknown noise kind '" + name + "' (expected po, di or gd)");
}

const char* noise_kind_name(NoiseKind kind) noexcept
{
    switch (kind) {
    case NoiseKind::PointOutlier: return "po";
    case NoiseKind::DataIncompleteness: return "di";
    case NoiseKind::GaussianDisplacement: return "gd";
    }
    return "?";
}

PointSet add_outlier_noise(const PointSet& ps, double level, std::uint64_t seed)
{
    check_level(level, "outlier");
    const auto extra = static_cast<Eigen::Index>(std::llround(level * static_cast<double>(ps.size())));
    if (extra == 0)
        return ps;
    auto rng = make_rng(seed, 0x0b1);
    std::normal_distribution<double> spread(0.0, kOutlierStddev);
    Eigen::MatrixXd out(ps.dim(), ps.coords().cols() + extra);
    out.leftCols(ps.coords().cols()) = ps.coords();
    for (Eigen::Index c = ps.coords().cols(); c < out.cols(); ++c)
        for (Eigen::Index d = 0; d < out.rows(); ++d)
            out(d, c) = spread(rng);
    return PointSet(std::move(out));
}

PointSet remove_patch(const PointSet& ps, double level, std::uint64_t seed)
{
    if (!(level >= 0.0 && level < 1.0))
        fail(ErrorCode::LevelOutOfRange, "incompleteness level must lie in [0, 1)");
    if (ps.empty())
        fail(ErrorCode::EmptySet, "cannot remove a patch from an empty set");
    const std::size_t n = ps.size();
    const auto k = static_cast<std::size_t>(std::llround(level * static_cast<double>(n)));
    if (k == 0)
        return ps;

    auto rng = make_rng(seed, 0xd1);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t anchor = pick(rng);

    const Eigen::VectorXd a = ps.coords().col(static_cast<Eigen::Index>(anchor));
    std::vector<double> dist(n);
    for (std::size_t j = 0; j < n; ++j)
        dist[j] = (ps.coords().col(static_cast<Eigen::Index>(j)) - a).squaredNorm();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (i == anchor || j == anchor)
            return i == anchor && j != anchor;
        return dist[i] < dist[j];
    });

    std::vector<bool> removed(n, false);
    for (std::size_t r = 0; r < k; ++r)
        removed[order[r]] = true;

    Eigen::MatrixXd out(ps.dim(), static_cast<Eigen::Index>(n - k));
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < n; ++j)
        if (!removed[j])
            out.col(c++) = ps.coords().col(static_cast<Eigen::Index>(j));
    return PointSet(std::move(out));
}

PointSet add_gaussian_displacement(const PointSet& ps, double level, std::uint64_t seed)
{
    check_level(level, "displacement");
    if (level == 0.0)
        return ps;
    auto rng = make_rng(seed, 0x6d);
    std::normal_distribution<double> jitter(0.0, level);
    Eigen::MatrixXd out = ps.coords();
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        for (Eigen::Index d = 0; d < out.rows(); ++d)
            out(d, c) += jitter(rng);
    return PointSet(std::move(out));
}

PointSet apply_noise(const PointSet& ps, const NoiseSpec& spec)
{
    switch (spec.kind) {
    case NoiseKind::PointOutlier: return add_outlier_noise(ps, spec.level, spec.seed);
    case NoiseKind::DataIncompleteness: return remove_patch(ps, spec.level, spec.seed);
    case NoiseKind::GaussianDisplacement: return add_gaussian_displacement(ps, spec.level, spec.seed);
    }
    fail(ErrorCode::InvalidArgument, "unknown noise kind");
}

Group make_group(const PointSet& base, std::size_t k, double level, std::uint64_t seed, std::string id)
{
    if (k < 2)
        fail(ErrorCode::TooFewSets, "a group needs k >= 2 members");
    std::vector<PointSet> members;
    members.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        members.push_back(tps_deform(base, level, derive_seed(seed, i)));
    return Group(std::move(id), std::move(members));
}

namespace {

// Closed polyline resampled at equal arc-length spacing.
Eigen::MatrixXd resample_closed(const std::vector<Eigen::Vector2d>& poly, std::size_t count)
{
    const std::size_t n = poly.size();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        cum[i + 1] = cum[i] + (poly[(i + 1) % n] - poly[i]).norm();
    const double perimeter = cum[n];

    Eigen::MatrixXd out(2, static_cast<Eigen::Index>(count));
    std::size_t seg = 0;
    for (std::size_t s = 0; s < count; ++s) {
        const double t = perimeter * static_cast<double>(s) / static_cast<double>(count);
        while (cum[seg + 1] < t)
            ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double u = len > 0.0 ? (t - cum[seg]) / len : 0.0;
        out.col(static_cast<Eigen::Index>(s)) = (1.0 - u) * poly[seg] + u * poly[(seg + 1) % n];
    }
    return out;
}

std::vector<Eigen::Vector2d> chaikin(const std::vector<Eigen::Vector2d>& poly)
{
    std::vector<Eigen::Vector2d> out;
    out.reserve(poly.size() * 2);
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        out.emplace_back(0.75 * p + 0.25 * q);
        out.emplace_back(0.25 * p + 0.75 * q);
    }
    return out;
}

struct Face {
    Eigen::Vector3d origin, u, v;
    double area() const { return u.cross(v).norm(); }
};

void add_box(std::vector<Face>& faces, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi)
{
    const Eigen::Vector3d e = hi - lo;
    const Eigen::Vector3d ex(e.x(), 0, 0), ey(0, e.y(), 0), ez(0, 0, e.z());
    faces.push_back({lo, ex, ey});
    faces.push_back({lo + ez, ex, ey});
    faces.push_back({lo, ex, ez});
    faces.push_back({lo + ey, ex, ez});
    faces.push_back({lo, ey, ez});
    faces.push_back({lo + ex, ey, ez});
}

PointSet sample_faces(const std::vector<Face>& faces, std::size_t n_points, Rng& rng)
{
    if (n_points == 0)
        fail(ErrorCode::EmptySet, "shape needs at least one point");
    std::vector<double> areas;
    areas.reserve(faces.size());
    for (const auto& f : faces)
        areas.push_back(f.area());
    std::discrete_distribution<std::size_t> which(areas.begin(), areas.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd out(3, static_cast<Eigen::Index>(n_points));
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const auto& f = faces[which(rng)];
        const double a = unit(rng);
        const double b = unit(rng);
        out.col(c) = f.origin + a * f.u + b * f.v;
    }
    return normalize(PointSet(std::move(out)));
}

void add_legs(std::vector<Face>& faces, double w, double d, double h, double t)
{
    for (double x : {0.0, w - t})
        for (double y : {0.0, d - t})
            add_box(faces, {x, y, 0.0}, {x + t, y + t, h});
}

} // namespace

PointSet fish_shape()
{
    // Nose at +x, forked tail at -x.
    const std::vector<Eigen::Vector2d> outline = {
        {1.00, 0.00},   {0.85, 0.20},   {0.55, 0.34},  {0.20, 0.40},  {0.02, 0.56},
        {-0.12, 0.40},  {-0.40, 0.24},  {-0.66, 0.09}, {-1.00, 0.44}, {-0.86, 0.00},
        {-1.00, -0.44}, {-0.66, -0.09}, {-0.40, -0.20}, {-0.16, -0.30}, {-0.26, -0.46},
        {0.02, -0.36},  {0.45, -0.32},  {0.82, -0.18},
    };
    auto smooth = chaikin(chaikin(outline));
    return normalize(PointSet(resample_closed(smooth, 91)));
}

PointSet chair_shape(std::size_t n_points, std::uint64_t seed)
{
    auto rng = make_rng(seed, 0xc4a1);
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    const double w = jitter(rng), d = jitter(rng), leg_h = jitter(rng), back_h = jitter(rng) * 1.1;
    const double t = 0.08;

    std::vector<Face> faces;
    add_legs(faces, w, d, leg_h, t);
    add_box(faces, {0.0, 0.0, leg_h}, {w, d, leg_h + t});
    add_box(faces, {0.0, d - t, leg_h + t}, {w, d, leg_h + t + back_h});
    return sample_faces(faces, n_points, rng);
}

PointSet table_shape(std::size_t n_points, std::uint64_t seed)
{
    auto rng = make_rng(seed, 0x7ab1);
    std::uniform_real_distribution<double> width(1.2, 1.8), depth(0.7, 1.1), height(0.6, 0.9);
    const double w = width(rng), d = depth(rng), leg_h = height(rng);
    const double t = 0.07;

    std::vector<Face> faces;
    add_legs(faces, w, d, leg_h, t);
    add_box(faces, {0.0, 0.0, leg_h}, {w, d, leg_h + 0.06});
    return sample_faces(faces, n_points, rng);
}

PointSet builtin_shape(const std::string& name, std::size_t n_points, std::uint64_t seed)
{
    if (name == "fish")
        return fish_shape();
    if (name == "chair")
        return chair_shape(n_points, seed);
    if (name == "table")
        return table_shape(n_points, seed);
    fail(ErrorCode::InvalidArgument, "unknown built-in shape '" + name + "'");
}

} // namespace gpalign
