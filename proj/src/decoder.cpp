#include "gpalign/decoder.hpp"

#include "gpalign/error.hpp"
#include "gpalign/random.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace gpalign {

DecoderParams::DecoderParams(int point_dim, std::vector<DenseLayer> layers)
    : point_dim_(point_dim), layers_(std::move(layers))
{
    if (point_dim_ < 1)
        fail(ErrorCode::DimMismatch, "decoder point dimension must be >= 1");
    if (layers_.empty())
        fail(ErrorCode::ShapeMismatch, "decoder needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.bias.size() != layer.weight.rows())
            fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " bias width differs from its output width");
        if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())
            fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " input width does not chain");
        if (!layer.weight.allFinite() || !layer.bias.allFinite())
            fail(ErrorCode::InvalidArgument, "decoder parameters must be finite");
    }
    if (layers_.front().weight.cols() <= point_dim_)
        fail(ErrorCode::ShapeMismatch, "first layer must take point coordinates plus a latent code");
    if (layers_.back().weight.rows() != point_dim_)
        fail(ErrorCode::ShapeMismatch, "last layer must output one drift per coordinate");
}

std::size_t DecoderParams::latent_dim() const noexcept
{
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols() - point_dim_);
}

std::size_t DecoderParams::parameter_count() const noexcept
{
    std::size_t n = 0;
    for (const auto& l : layers_)
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

std::vector<std::span<double>> DecoderParams::tensors()
{
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
        out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return out;
}

std::vector<std::span<const double>> DecoderParams::tensors() const
{
    std::vector<std::span<const double>> out;
    for (const auto& l : layers_) {
        out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return out;
}

DecoderGradients DecoderGradients::zeros_like(const DecoderParams& params)
{
    DecoderGradients g;
    for (const auto& l : params.layers())
        g.d_layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                              Eigen::VectorXd::Zero(l.bias.size())});
    g.d_latent = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.latent_dim()));
    return g;
}

DecoderGradients& DecoderGradients::operator+=(const DecoderGradients& other)
{
    if (other.d_layers.size() != d_layers.size() || other.d_latent.size() != d_latent.size())
        fail(ErrorCode::ShapeMismatch, "cannot add gradients of different shapes");
    for (std::size_t l = 0; l < d_layers.size(); ++l) {
        d_layers[l].weight += other.d_layers[l].weight;
        d_layers[l].bias += other.d_layers[l].bias;
    }
    d_latent += other.d_latent;
    return *this;
}

std::vector<std::span<const double>> DecoderGradients::tensors() const
{
    std::vector<std::span<const double>> out;
    for (const auto& l : d_layers) {
        out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
        out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return out;
}

bool DecoderGradients::all_finite() const
{
    for (const auto& l : d_layers)
        if (!l.weight.allFinite() || !l.bias.allFinite())
            return false;
    return d_latent.allFinite();
}

DecoderParams init_params(int point_dim, std::size_t latent_dim, const std::vector<int>& hidden,
                          std::uint64_t seed)
{
    if (hidden.empty())
        fail(ErrorCode::ShapeMismatch, "decoder needs at least one hidden layer");
    if (latent_dim == 0)
        fail(ErrorCode::ZeroDim, "latent_dim must be >= 1");

    std::vector<int> widths;
    widths.push_back(point_dim + static_cast<int>(latent_dim));
    for (int h : hidden) {
        if (h < 1)
            fail(ErrorCode::ShapeMismatch, "hidden widths must be positive");
        widths.push_back(h);
    }
    widths.push_back(point_dim);

    auto rng = make_rng(seed, 0xdec0);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
        DenseLayer layer{Eigen::MatrixXd(widths[l + 1], fan_in), Eigen::VectorXd::Zero(widths[l + 1])};
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                layer.weight(r, c) = normal(rng);
        layers.push_back(std::move(layer));
    }
    return DecoderParams(point_dim, std::move(layers));
}

namespace {

void check_inputs(const DecoderParams& params, const Eigen::VectorXd& z, const Eigen::MatrixXd& points)
{
    if (params.num_layers() == 0)
        fail(ErrorCode::ShapeMismatch, "decoder has no layers");
    if (points.rows() != params.point_dim())
        fail(ErrorCode::DimMismatch, "points have dimension " + std::to_string(points.rows()) +
                                         ", decoder expects " + std::to_string(params.point_dim()));
    if (static_cast<std::size_t>(z.size()) != params.latent_dim())
        fail(ErrorCode::DimMismatch, "latent code has length " + std::to_string(z.size()) +
                                         ", decoder expects " + std::to_string(params.latent_dim()));
}

// First-layer pre-activation: W_x x + (W_z z + b), the bracket shared by all points.
Eigen::MatrixXd first_preactivation(const DenseLayer& first, int point_dim, const Eigen::VectorXd& z,
                                    const Eigen::MatrixXd& points)
{
    const auto latent = first.weight.cols() - point_dim;
    const Eigen::VectorXd shared = first.weight.rightCols(latent) * z + first.bias;
    Eigen::MatrixXd pre = first.weight.leftCols(point_dim) * points;
    pre.colwise() += shared;
    return pre;
}

} // namespace

Eigen::MatrixXd decode(const DecoderParams& params, const Eigen::VectorXd& z, const Eigen::MatrixXd& points,
                       ForwardCache* cache)
{
    check_inputs(params, z, points);
    const auto& layers = params.layers();
    if (cache) {
        cache->hidden.clear();
        cache->num_points = points.cols();
    }

    Eigen::MatrixXd h = first_preactivation(layers.front(), params.point_dim(), z, points);
    for (std::size_t l = 1; l < layers.size(); ++l) {
        h = h.cwiseMax(0.0);
        if (cache)
            cache->hidden.push_back(h);
        Eigen::MatrixXd next = layers[l].weight * h;
        next.colwise() += layers[l].bias;
        h = std::move(next);
    }
    return h;
}

DriftField forward(const DecoderParams& params, const GroupLatentDescriptor& z, const PointSet& ps)
{
    return DriftField(decode(params, z.values(), ps.coords()));
}

void backward_accumulate(const DecoderParams& params, const Eigen::VectorXd& z, const Eigen::MatrixXd& points,
                         const Eigen::MatrixXd& upstream, DecoderGradients& grads, const ForwardCache* cache)
{
    check_inputs(params, z, points);
    const auto& layers = params.layers();
    if (upstream.rows() != params.point_dim() || upstream.cols() != points.cols())
        fail(ErrorCode::DimMismatch, "upstream gradient must be shaped like the drift field");
    if (grads.d_layers.size() != layers.size() ||
        grads.d_latent.size() != static_cast<Eigen::Index>(params.latent_dim()))
        fail(ErrorCode::ShapeMismatch, "gradient buffer does not match decoder shape");

    ForwardCache local;
    if (!cache) {
        decode(params, z, points, &local);
        cache = &local;
    } else if (cache->num_points != points.cols() || cache->hidden.size() + 1 != layers.size()) {
        fail(ErrorCode::MissingForwardCache, "forward cache does not belong to these inputs");
    }

    Eigen::MatrixXd delta = upstream;
    for (std::size_t l = layers.size() - 1; l > 0; --l) {
        const Eigen::MatrixXd& input = cache->hidden[l - 1];
        grads.d_layers[l].weight.noalias() += delta * input.transpose();
        grads.d_layers[l].bias += delta.rowwise().sum();
        Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
        delta = (input.array() > 0.0).select(back, 0.0);
    }

    const int dim = params.point_dim();
    const auto latent = layers.front().weight.cols() - dim;
    const Eigen::VectorXd delta_sum = delta.rowwise().sum();
    auto& first = grads.d_layers.front();
    first.weight.leftCols(dim).noalias() += delta * points.transpose();
    first.weight.rightCols(latent).noalias() += delta_sum * z.transpose();
    first.bias += delta_sum;
    grads.d_latent.noalias() += layers.front().weight.rightCols(latent).transpose() * delta_sum;
}

DecoderGradients backward(const DecoderParams& params, const Eigen::VectorXd& z, const Eigen::MatrixXd& points,
                          const Eigen::MatrixXd& upstream, const ForwardCache* cache)
{
    auto grads = DecoderGradients::zeros_like(params);
    backward_accumulate(params, z, points, upstream, grads, cache);
    return grads;
}

DecoderGradients backward(const DecoderParams& params, const GroupLatentDescriptor& z, const PointSet& ps,
                          const DriftField& upstream, const ForwardCache* cache)
{
    return backward(params, z.values(), ps.coords(), upstream.drifts(), cache);
}

} // namespace gpalign
