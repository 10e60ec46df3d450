#include "gpalign/geometry.hpp"

#include "gpalign/error.hpp"
#include "gpalign/random.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace gpalign {

const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::Ok: return "ok";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::EmptySet: return "empty point set";
    case ErrorCode::DegenerateSet: return "degenerate point set";
    case ErrorCode::LengthMismatch: return "length mismatch";
    case ErrorCode::DimMismatch: return "dimension mismatch";
    case ErrorCode::ZeroDim: return "zero dimension";
    case ErrorCode::SingularTpsSystem: return "singular TPS system";
    case ErrorCode::LevelOutOfRange: return "level out of range";
    case ErrorCode::TooFewSets: return "too few point sets";
    case ErrorCode::EmptyIndex: return "empty index";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::NonFiniteGradient: return "non-finite gradient";
    case ErrorCode::NonFiniteLoss: return "non-finite loss";
    case ErrorCode::MissingForwardCache: return "missing forward cache";
    case ErrorCode::ParseError: return "parse error";
    case ErrorCode::MixedDimensionality: return "mixed dimensionality";
    case ErrorCode::EmptyFile: return "empty file";
    case ErrorCode::IoError: return "I/O error";
    case ErrorCode::NotTwoDimensional: return "not two-dimensional";
    case ErrorCode::Internal: return "internal error";
    }
    return "unknown error";
}

PointSet::PointSet(Eigen::MatrixXd coords) : coords_(std::move(coords))
{
    if (coords_.rows() != 2 && coords_.rows() != 3)
        fail(ErrorCode::DimMismatch,
             "point dimension must be 2 or 3, got " + std::to_string(coords_.rows()));
    if (!coords_.allFinite())
        fail(ErrorCode::InvalidArgument, "point coordinates must be finite");
}

PointSet PointSet::from_list(std::initializer_list<std::initializer_list<double>> points)
{
    std::vector<std::vector<double>> rows;
    rows.reserve(points.size());
    for (const auto& p : points)
        rows.emplace_back(p);
    return from_rows(rows);
}

PointSet PointSet::from_rows(const std::vector<std::vector<double>>& rows)
{
    if (rows.empty())
        return PointSet(Eigen::MatrixXd(2, 0));
    const auto dim = static_cast<Eigen::Index>(rows.front().size());
    Eigen::MatrixXd coords(dim, static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
        if (static_cast<Eigen::Index>(rows[j].size()) != dim)
            fail(ErrorCode::DimMismatch, "point " + std::to_string(j) + " has wrong dimension");
        for (Eigen::Index d = 0; d < dim; ++d)
            coords(d, static_cast<Eigen::Index>(j)) = rows[j][static_cast<std::size_t>(d)];
    }
    return PointSet(std::move(coords));
}

Group::Group(std::string id, std::vector<PointSet> members)
    : id_(std::move(id)), members_(std::move(members))
{
    if (members_.size() < 2)
        fail(ErrorCode::TooFewSets, "group '" + id_ + "' needs at least 2 members");
    for (const auto& m : members_) {
        if (m.dim() != members_.front().dim())
            fail(ErrorCode::DimMismatch, "group '" + id_ + "' mixes 2D and 3D members");
        if (m.empty())
            fail(ErrorCode::EmptySet, "group '" + id_ + "' has an empty member");
    }
}

std::size_t Group::total_points() const noexcept
{
    std::size_t n = 0;
    for (const auto& m : members_)
        n += m.size();
    return n;
}

GroupLatentDescriptor::GroupLatentDescriptor(Eigen::VectorXd values) : values_(std::move(values))
{
    if (values_.size() == 0)
        fail(ErrorCode::ZeroDim, "latent descriptor must have at least one entry");
    if (!values_.allFinite())
        fail(ErrorCode::InvalidArgument, "latent descriptor entries must be finite");
}

DriftField::DriftField(Eigen::MatrixXd drifts) : drifts_(std::move(drifts))
{
    if (!drifts_.allFinite())
        fail(ErrorCode::InvalidArgument, "drift entries must be finite");
}

DriftField DriftField::zeros(int dim, std::size_t n)
{
    return DriftField(Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(n)));
}

PointSet normalize(const PointSet& ps)
{
    if (ps.empty())
        fail(ErrorCode::EmptySet, "cannot normalize an empty point set");
    const Eigen::VectorXd centroid = ps.coords().rowwise().mean();
    Eigen::MatrixXd centered = ps.coords().colwise() - centroid;
    const double radius = centered.colwise().norm().maxCoeff();
    if (!(radius > 0.0))
        fail(ErrorCode::DegenerateSet, "all points coincide; scale is undefined");
    centered /= radius;
    return PointSet(std::move(centered));
}

PointSet apply_drift(const PointSet& ps, const DriftField& df)
{
    if (df.size() != ps.size())
        fail(ErrorCode::LengthMismatch, "drift field has " + std::to_string(df.size()) +
                                            " entries for " + std::to_string(ps.size()) + " points");
    if (df.dim() != ps.dim())
        fail(ErrorCode::DimMismatch, "drift field dimension differs from point set");
    return PointSet(ps.coords() + df.drifts());
}

GroupLatentDescriptor init_gld(std::size_t latent_dim, std::uint64_t seed)
{
    if (latent_dim == 0)
        fail(ErrorCode::ZeroDim, "latent_dim must be >= 1");
    auto rng = make_rng(seed, 0x91d);
    std::normal_distribution<double> normal(0.0, kGldStddev);
    Eigen::VectorXd z(static_cast<Eigen::Index>(latent_dim));
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z[i] = normal(rng);
    return GroupLatentDescriptor(std::move(z));
}

} // namespace gpalign
