#pragma once

#include "gpalign/geometry.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace gpalign {

/// Exact nearest-neighbour index (KD-tree) over a fixed point set.
/// Ties resolve to the lowest original index.
class NnIndex {
public:
    struct Hit {
        std::size_t index = 0;
        double sq_dist = 0.0;
    };

    NnIndex() = default;
    explicit NnIndex(const Eigen::MatrixXd& points);
    explicit NnIndex(const PointSet& ps) : NnIndex(ps.coords()) {}

    std::size_t size() const noexcept { return indices_.size(); }
    int dim() const noexcept { return dim_; }

    Hit nearest(const double* query) const;
    Hit nearest(const Eigen::VectorXd& query) const;

private:
    struct Node {
        std::size_t begin, end;
        int split_dim;
        double split_value;
        int left, right; // -1 for leaves
    };

    int build(std::size_t begin, std::size_t end);
    void search(int node, const double* q, Hit& best) const;

    int dim_ = 0;
    std::vector<double> coords_;       // reordered, dim-strided
    std::vector<std::size_t> indices_; // original index of each stored point
    std::vector<Node> nodes_;
};

NnIndex::Hit nearest(const NnIndex& index, const Eigen::VectorXd& query);

/// Components of the drift-regularized groupwise Chamfer objective.
struct LossBreakdown {
    double alignment = 0.0;   // groupwise Chamfer over transformed sets
    double regularizer = 0.0; // sum of drift norms
    double total = 0.0;       // alignment + lambda * regularizer
    double normalized_cd = 0.0;
};

/// Symmetric sum of squared nearest-neighbour distances.
double chamfer(const PointSet& x, const PointSet& y);

/// Sum over ordered pairs i != j, so each unordered pair counts twice.
double groupwise_chamfer(const std::vector<PointSet>& sets);

/// groupwise_chamfer / (K (K - 1) mean_cardinality).
double normalized_cd(const std::vector<PointSet>& sets);

LossBreakdown regularized_loss(const std::vector<PointSet>& sets, const std::vector<DriftField>& drifts,
                               double lambda);

/// Gradient of LossBreakdown::total w.r.t. every drift vector with
/// nearest-neighbour correspondences frozen at the current configuration.
std::vector<DriftField> loss_gradients(const std::vector<PointSet>& sets, const std::vector<DriftField>& drifts,
                                       double lambda);

/// Matrix-level evaluation used by the optimizer: `transformed` and `drifts`
/// are dim x N_k per member. When `grads` is non-null it receives d total / d drift.
LossBreakdown evaluate_group_loss(const std::vector<Eigen::MatrixXd>& transformed,
                                  const std::vector<Eigen::MatrixXd>& drifts, double lambda,
                                  std::vector<Eigen::MatrixXd>* grads);

} // namespace gpalign
