#include "gpalign/loss.hpp"

#include "gpalign/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace gpalign {

namespace {

constexpr std::size_t kLeafSize = 8;

void check_sets(const std::vector<Eigen::MatrixXd>& sets)
{
    if (sets.size() < 2)
        fail(ErrorCode::TooFewSets, "groupwise loss needs at least 2 sets, got " + std::to_string(sets.size()));
    for (const auto& s : sets) {
        if (s.cols() == 0)
            fail(ErrorCode::EmptySet, "groupwise loss over an empty set");
        if (s.rows() != sets.front().rows())
            fail(ErrorCode::DimMismatch, "groupwise loss over sets of different dimension");
    }
}

std::vector<Eigen::MatrixXd> coords_of(const std::vector<PointSet>& sets)
{
    std::vector<Eigen::MatrixXd> out;
    out.reserve(sets.size());
    for (const auto& s : sets)
        out.push_back(s.coords());
    return out;
}

// One direction of a Chamfer term; optionally scatters d/dpoint with the given weight.
double directed_term(const Eigen::MatrixXd& from, const NnIndex& to_index, const Eigen::MatrixXd& to,
                     double weight, Eigen::MatrixXd* grad_from, Eigen::MatrixXd* grad_to)
{
    double sum = 0.0;
    for (Eigen::Index c = 0; c < from.cols(); ++c) {
        const auto hit = to_index.nearest(from.col(c).data());
        sum += hit.sq_dist;
        if (grad_from) {
            const auto q = static_cast<Eigen::Index>(hit.index);
            const Eigen::VectorXd g = (2.0 * weight) * (from.col(c) - to.col(q));
            grad_from->col(c) += g;
            grad_to->col(q) -= g;
        }
    }
    return sum;
}

double groupwise_sum(const std::vector<Eigen::MatrixXd>& sets, std::vector<Eigen::MatrixXd>* grads)
{
    std::vector<NnIndex> indices;
    indices.reserve(sets.size());
    for (const auto& s : sets)
        indices.emplace_back(s);

    // Chamfer is symmetric: visit unordered pairs once, weight 2.
    double total = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            auto* gi = grads ? &(*grads)[i] : nullptr;
            auto* gj = grads ? &(*grads)[j] : nullptr;
            total += 2.0 * directed_term(sets[i], indices[j], sets[j], 2.0, gi, gj);
            total += 2.0 * directed_term(sets[j], indices[i], sets[i], 2.0, gj, gi);
        }
    }
    return total;
}

double mean_cardinality(const std::vector<Eigen::MatrixXd>& sets)
{
    double n = 0.0;
    for (const auto& s : sets)
        n += static_cast<double>(s.cols());
    return n / static_cast<double>(sets.size());
}

double normalizer(const std::vector<Eigen::MatrixXd>& sets)
{
    const auto k = static_cast<double>(sets.size());
    return k * (k - 1.0) * mean_cardinality(sets);
}

} // namespace

NnIndex::NnIndex(const Eigen::MatrixXd& points) : dim_(static_cast<int>(points.rows()))
{
    if (!points.allFinite())
        fail(ErrorCode::InvalidArgument, "cannot index non-finite coordinates");
    const auto n = static_cast<std::size_t>(points.cols());
    indices_.resize(n);
    std::iota(indices_.begin(), indices_.end(), 0);
    if (n == 0)
        return;
    nodes_.reserve(2 * n / kLeafSize + 2);
    // Building permutes indices_; the coordinates are gathered afterwards.
    coords_.assign(points.data(), points.data() + points.size());
    build(0, n);
    std::vector<double> reordered(coords_.size());
    for (std::size_t s = 0; s < n; ++s)
        for (int d = 0; d < dim_; ++d)
            reordered[s * dim_ + d] = points(d, static_cast<Eigen::Index>(indices_[s]));
    coords_ = std::move(reordered);
}

int NnIndex::build(std::size_t begin, std::size_t end)
{
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end, -1, 0.0, -1, -1});
    if (end - begin <= kLeafSize)
        return id;

    // Split on the widest axis at the median.
    int best_dim = 0;
    double best_spread = -1.0;
    for (int d = 0; d < dim_; ++d) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t s = begin; s < end; ++s) {
            const double v = coords_[indices_[s] * dim_ + d];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            best_dim = d;
        }
    }
    if (best_spread <= 0.0)
        return id; // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(indices_.begin() + static_cast<std::ptrdiff_t>(begin),
                     indices_.begin() + static_cast<std::ptrdiff_t>(mid),
                     indices_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                         return coords_[a * dim_ + best_dim] < coords_[b * dim_ + best_dim];
                     });
    const double split = coords_[indices_[mid] * dim_ + best_dim];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].split_dim = best_dim;
    nodes_[id].split_value = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void NnIndex::search(int node_id, const double* q, Hit& best) const
{
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.left < 0) {
        for (std::size_t s = node.begin; s < node.end; ++s) {
            const double* p = &coords_[s * dim_];
            double d2 = 0.0;
            for (int d = 0; d < dim_; ++d) {
                const double diff = p[d] - q[d];
                d2 += diff * diff;
            }
            if (d2 < best.sq_dist || (d2 == best.sq_dist && indices_[s] < best.index)) {
                best.sq_dist = d2;
                best.index = indices_[s];
            }
        }
        return;
    }
    // Left holds values <= split, right holds values >= split.
    const double diff = q[node.split_dim] - node.split_value;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    if (diff * diff <= best.sq_dist)
        search(far, q, best);
}

NnIndex::Hit NnIndex::nearest(const double* query) const
{
    if (indices_.empty())
        fail(ErrorCode::EmptyIndex, "nearest-neighbour query on an empty index");
    Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
    search(0, query, best);
    return best;
}

NnIndex::Hit NnIndex::nearest(const Eigen::VectorXd& query) const
{
    if (indices_.empty())
        fail(ErrorCode::EmptyIndex, "nearest-neighbour query on an empty index");
    if (query.size() != dim_)
        fail(ErrorCode::DimMismatch, "query dimension differs from index");
    return nearest(query.data());
}

NnIndex::Hit nearest(const NnIndex& index, const Eigen::VectorXd& query)
{
    return index.nearest(query);
}

double chamfer(const PointSet& x, const PointSet& y)
{
    if (x.empty() || y.empty())
        fail(ErrorCode::EmptySet, "chamfer distance of an empty set");
    if (x.dim() != y.dim())
        fail(ErrorCode::DimMismatch, "chamfer distance between sets of different dimension");
    const NnIndex ix(x), iy(y);
    return directed_term(x.coords(), iy, y.coords(), 1.0, nullptr, nullptr) +
           directed_term(y.coords(), ix, x.coords(), 1.0, nullptr, nullptr);
}

double groupwise_chamfer(const std::vector<PointSet>& sets)
{
    const auto coords = coords_of(sets);
    check_sets(coords);
    return groupwise_sum(coords, nullptr);
}

double normalized_cd(const std::vector<PointSet>& sets)
{
    const auto coords = coords_of(sets);
    check_sets(coords);
    return groupwise_sum(coords, nullptr) / normalizer(coords);
}

LossBreakdown evaluate_group_loss(const std::vector<Eigen::MatrixXd>& transformed,
                                  const std::vector<Eigen::MatrixXd>& drifts, double lambda,
                                  std::vector<Eigen::MatrixXd>* grads)
{
    check_sets(transformed);
    if (!(lambda >= 0.0))
        fail(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (drifts.size() != transformed.size())
        fail(ErrorCode::LengthMismatch, "need one drift field per set");
    for (std::size_t k = 0; k < drifts.size(); ++k) {
        if (drifts[k].cols() != transformed[k].cols())
            fail(ErrorCode::LengthMismatch, "drift field " + std::to_string(k) + " length differs from its set");
        if (drifts[k].rows() != transformed[k].rows())
            fail(ErrorCode::DimMismatch, "drift field " + std::to_string(k) + " dimension differs from its set");
        if (!transformed[k].allFinite() || !drifts[k].allFinite())
            fail(ErrorCode::NonFiniteLoss, "set " + std::to_string(k) + " drifted to non-finite coordinates");
    }

    if (grads) {
        grads->clear();
        for (const auto& t : transformed)
            grads->push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
    }

    LossBreakdown out;
    out.alignment = groupwise_sum(transformed, grads);
    for (std::size_t k = 0; k < drifts.size(); ++k) {
        const Eigen::RowVectorXd norms = drifts[k].colwise().norm();
        out.regularizer += norms.sum();
        if (grads && lambda > 0.0) {
            for (Eigen::Index c = 0; c < norms.size(); ++c)
                if (norms[c] > 0.0)
                    (*grads)[k].col(c) += (lambda / norms[c]) * drifts[k].col(c);
        }
    }
    out.total = out.alignment + lambda * out.regularizer;
    out.normalized_cd = out.alignment / normalizer(transformed);
    return out;
}

LossBreakdown regularized_loss(const std::vector<PointSet>& sets, const std::vector<DriftField>& drifts,
                               double lambda)
{
    if (drifts.size() != sets.size())
        fail(ErrorCode::LengthMismatch, "need one drift field per set");
    std::vector<Eigen::MatrixXd> transformed, d;
    for (std::size_t k = 0; k < sets.size(); ++k) {
        transformed.push_back(apply_drift(sets[k], drifts[k]).coords());
        d.push_back(drifts[k].drifts());
    }
    return evaluate_group_loss(transformed, d, lambda, nullptr);
}

std::vector<DriftField> loss_gradients(const std::vector<PointSet>& sets, const std::vector<DriftField>& drifts,
                                       double lambda)
{
    if (drifts.size() != sets.size())
        fail(ErrorCode::LengthMismatch, "need one drift field per set");
    std::vector<Eigen::MatrixXd> transformed, d, g;
    for (std::size_t k = 0; k < sets.size(); ++k) {
        transformed.push_back(apply_drift(sets[k], drifts[k]).coords());
        d.push_back(drifts[k].drifts());
    }
    evaluate_group_loss(transformed, d, lambda, &g);
    std::vector<DriftField> out;
    out.reserve(g.size());
    for (auto& m : g)
        out.emplace_back(std::move(m));
    return out;
}

} // namespace gpalign
