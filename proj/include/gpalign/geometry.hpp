#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace gpalign {

/// An ordered set of 2D or 3D points stored column-wise (dim x size).
/// Construction validates dimensionality and finiteness; the value is
/// immutable afterwards.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(Eigen::MatrixXd coords);

    /// Builds a set from a list of points, e.g. {{0, 0}, {1, 0}}.
    static PointSet from_list(std::initializer_list<std::initializer_list<double>> points);
    static PointSet from_rows(const std::vector<std::vector<double>>& rows);

    int dim() const noexcept { return static_cast<int>(coords_.rows()); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(coords_.cols()); }
    bool empty() const noexcept { return coords_.cols() == 0; }

    const Eigen::MatrixXd& coords() const noexcept { return coords_; }
    Eigen::VectorXd point(std::size_t i) const { return coords_.col(static_cast<Eigen::Index>(i)); }

    friend bool operator==(const PointSet& a, const PointSet& b)
    {
        return a.coords_.rows() == b.coords_.rows() && a.coords_.cols() == b.coords_.cols() &&
               a.coords_ == b.coords_;
    }

private:
    Eigen::MatrixXd coords_;
};

/// K >= 2 point sets sharing one dimensionality. Cardinalities may differ.
class Group {
public:
    Group(std::string id, std::vector<PointSet> members);

    const std::string& id() const noexcept { return id_; }
    const std::vector<PointSet>& members() const noexcept { return members_; }
    std::size_t size() const noexcept { return members_.size(); }
    int dim() const noexcept { return members_.front().dim(); }
    std::size_t total_points() const noexcept;

private:
    std::string id_;
    std::vector<PointSet> members_;
};

/// Per-group optimizable latent code Z.
class GroupLatentDescriptor {
public:
    GroupLatentDescriptor() = default;
    explicit GroupLatentDescriptor(Eigen::VectorXd values);

    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
    const Eigen::VectorXd& values() const noexcept { return values_; }

private:
    Eigen::VectorXd values_;
};

/// Per-point displacement vectors, index-aligned with a PointSet.
class DriftField {
public:
    DriftField() = default;
    explicit DriftField(Eigen::MatrixXd drifts);

    static DriftField zeros(int dim, std::size_t n);

    int dim() const noexcept { return static_cast<int>(drifts_.rows()); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(drifts_.cols()); }
    const Eigen::MatrixXd& drifts() const noexcept { return drifts_; }

private:
    Eigen::MatrixXd drifts_;
};

/// Centers at the centroid and scales so the farthest point lies at radius 1.
PointSet normalize(const PointSet& ps);

/// T(x) = x + dx for every point; order preserved.
PointSet apply_drift(const PointSet& ps, const DriftField& df);

/// Entries drawn i.i.d. from N(0, 0.1^2), deterministic in (latent_dim, seed).
GroupLatentDescriptor init_gld(std::size_t latent_dim, std::uint64_t seed);

inline constexpr double kGldStddev = 0.1;

} // namespace gpalign
