#pragma once

#include "gpalign/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace gpalign {

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
};

/// Weights of the drift decoder g: [x, Z] -> dx. Hidden layers use ReLU;
/// the output layer is affine so drifts can take either sign.
class DecoderParams {
public:
    DecoderParams() = default;
    DecoderParams(int point_dim, std::vector<DenseLayer> layers);

    int point_dim() const noexcept { return point_dim_; }
    std::size_t latent_dim() const noexcept;
    std::size_t num_layers() const noexcept { return layers_.size(); }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::size_t parameter_count() const noexcept;

    /// Weight then bias for each layer, in order. Shapes never change.
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;

private:
    int point_dim_ = 0;
    std::vector<DenseLayer> layers_;
};

/// Gradients shaped like DecoderParams, plus the latent gradient.
struct DecoderGradients {
    std::vector<DenseLayer> d_layers;
    Eigen::VectorXd d_latent;

    static DecoderGradients zeros_like(const DecoderParams& params);

    DecoderGradients& operator+=(const DecoderGradients& other);
    std::vector<std::span<const double>> tensors() const;
    bool all_finite() const;
};

/// Hidden activations kept from a forward pass (one dim x N matrix per hidden layer).
struct ForwardCache {
    std::vector<Eigen::MatrixXd> hidden;
    Eigen::Index num_points = -1;

    bool empty() const noexcept { return hidden.empty() && num_points < 0; }
};

/// He-initialized weights (std sqrt(2 / fan_in)) and zero biases.
/// Layer widths: (point_dim + latent_dim) -> hidden... -> point_dim.
DecoderParams init_params(int point_dim, std::size_t latent_dim, const std::vector<int>& hidden,
                          std::uint64_t seed);

/// Drifts for a dim x N matrix of points, sharing one latent code.
/// Points are independent; the latent part of the first layer is evaluated once.
Eigen::MatrixXd decode(const DecoderParams& params, const Eigen::VectorXd& z,
                       const Eigen::MatrixXd& points, ForwardCache* cache = nullptr);

DriftField forward(const DecoderParams& params, const GroupLatentDescriptor& z, const PointSet& ps);

/// Adds the gradient of sum_j <upstream_j, drift_j> w.r.t. weights, biases and z
/// into `grads`. Recomputes activations when `cache` is null. Input
/// coordinates are data, so no gradient flows to them.
void backward_accumulate(const DecoderParams& params, const Eigen::VectorXd& z,
                         const Eigen::MatrixXd& points, const Eigen::MatrixXd& upstream,
                         DecoderGradients& grads, const ForwardCache* cache = nullptr);

DecoderGradients backward(const DecoderParams& params, const Eigen::VectorXd& z,
                          const Eigen::MatrixXd& points, const Eigen::MatrixXd& upstream,
                          const ForwardCache* cache = nullptr);

DecoderGradients backward(const DecoderParams& params, const GroupLatentDescriptor& z,
                          const PointSet& ps, const DriftField& upstream,
                          const ForwardCache* cache = nullptr);

} // namespace gpalign
