#include "gpalign/optimizer.hpp"

#include "gpalign/error.hpp"
#include "gpalign/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <utility>

namespace gpalign {

void adam_step(AdamState& state, std::span<double> variable, std::span<const double> gradient, double lr)
{
    if (variable.size() != gradient.size())
        fail(ErrorCode::ShapeMismatch, "Adam variable and gradient sizes differ");
    if (state.first_moment.empty() && state.second_moment.empty() && state.step_count == 0) {
        state.first_moment.assign(variable.size(), 0.0);
        state.second_moment.assign(variable.size(), 0.0);
    }
    if (state.first_moment.size() != variable.size() || state.second_moment.size() != variable.size())
        fail(ErrorCode::ShapeMismatch, "Adam moments do not match the variable");
    for (double g : gradient)
        if (!std::isfinite(g))
            fail(ErrorCode::NonFiniteGradient, "Adam received a non-finite gradient");

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < variable.size(); ++i) {
        const double g = gradient[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        variable[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

void OptimConfig::validate() const
{
    if (max_steps < 1)
        fail(ErrorCode::InvalidArgument, "max_steps must be >= 1");
    if (!(lr_end > 0.0) || !(lr_start >= lr_end))
        fail(ErrorCode::InvalidArgument, "learning rates must satisfy lr_start >= lr_end > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        fail(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
    if (latent_dim < 1)
        fail(ErrorCode::ZeroDim, "latent_dim must be >= 1");
    if (hidden.empty())
        fail(ErrorCode::InvalidArgument, "hidden must list at least one layer width");
    if (convergence_window < 2)
        fail(ErrorCode::InvalidArgument, "convergence_window must be >= 2");
    if (!(convergence_rel_tol >= 0.0))
        fail(ErrorCode::InvalidArgument, "convergence_rel_tol must be >= 0");
}

double lr_at(std::size_t step, const OptimConfig& cfg)
{
    if (step >= cfg.lr_decay_steps)
        return cfg.lr_end;
    const double frac = static_cast<double>(step) / static_cast<double>(cfg.lr_decay_steps);
    return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac;
}

bool converged(std::span<const double> trace, const OptimConfig& cfg)
{
    const std::size_t window = std::max<std::size_t>(cfg.convergence_window, 2);
    if (trace.size() < window)
        return false;
    for (std::size_t i = trace.size() - window + 1; i < trace.size(); ++i) {
        const double change = std::abs(trace[i] - trace[i - 1]) / std::max(std::abs(trace[i]), 1e-12);
        if (!(change < cfg.convergence_rel_tol))
            return false;
    }
    return true;
}

std::uint64_t decoder_seed(std::uint64_t seed, std::size_t group_index, bool shared)
{
    return shared ? derive_seed(seed, 0xdec0de) : derive_seed(derive_seed(seed, 0xdec0de), group_index);
}

std::uint64_t latent_seed(std::uint64_t seed, std::size_t group_index)
{
    return derive_seed(derive_seed(seed, 0x1a7e), group_index);
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn)
{
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < threads; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n; i += threads)
                        fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b)
{
    a.alignment += b.alignment;
    a.regularizer += b.regularizer;
    a.total += b.total;
    a.normalized_cd += b.normalized_cd;
    return a;
}

struct GroupState {
    const Group* group = nullptr;
    Eigen::VectorXd z;
    AdamState z_adam;
};

struct StepOutput {
    LossBreakdown loss;
    DecoderGradients grads;
};

std::vector<Eigen::MatrixXd> decode_group(const DecoderParams& params, const GroupState& gs,
                                          std::vector<ForwardCache>* caches)
{
    const auto& members = gs.group->members();
    std::vector<Eigen::MatrixXd> drifts;
    drifts.reserve(members.size());
    if (caches)
        caches->resize(members.size());
    for (std::size_t k = 0; k < members.size(); ++k)
        drifts.push_back(decode(params, gs.z, members[k].coords(), caches ? &(*caches)[k] : nullptr));
    return drifts;
}

std::vector<Eigen::MatrixXd> transform(const Group& group, const std::vector<Eigen::MatrixXd>& drifts)
{
    std::vector<Eigen::MatrixXd> out;
    out.reserve(drifts.size());
    for (std::size_t k = 0; k < drifts.size(); ++k)
        out.push_back(group.members()[k].coords() + drifts[k]);
    return out;
}

StepOutput group_step(const DecoderParams& params, const GroupState& gs, double lambda)
{
    std::vector<ForwardCache> caches;
    const auto drifts = decode_group(params, gs, &caches);
    const auto moved = transform(*gs.group, drifts);
    std::vector<Eigen::MatrixXd> upstream;
    StepOutput out{evaluate_group_loss(moved, drifts, lambda, &upstream), DecoderGradients::zeros_like(params)};
    const auto& members = gs.group->members();
    for (std::size_t k = 0; k < members.size(); ++k)
        backward_accumulate(params, gs.z, members[k].coords(), upstream[k], out.grads, &caches[k]);
    return out;
}

struct RunOutput {
    DecoderParams params;
    std::vector<GroupState> states;
    std::vector<LossBreakdown> trace;
    bool converged = false;
};

// Optimizes one decoder jointly with the latent codes of `groups`.
RunOutput optimize(const std::vector<const Group*>& groups, const std::vector<std::uint64_t>& z_seeds,
                   std::uint64_t theta_seed, const OptimConfig& cfg, std::size_t threads,
                   const ProgressFn& progress)
{
    const int dim = groups.front()->dim();
    RunOutput run;
    run.params = init_params(dim, cfg.latent_dim, cfg.hidden, theta_seed);
    for (std::size_t g = 0; g < groups.size(); ++g)
        run.states.push_back({groups[g], init_gld(cfg.latent_dim, z_seeds[g]).values(), {}});

    std::vector<AdamState> theta_adam(run.params.tensors().size());
    std::vector<double> totals;
    std::vector<StepOutput> outputs(groups.size());

    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        try {
            parallel_for(groups.size(), threads,
                         [&](std::size_t g) { outputs[g] = group_step(run.params, run.states[g], cfg.lambda); });
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonFiniteLoss)
                throw;
            fail(ErrorCode::NonFiniteLoss, "at step " + std::to_string(step) + ": " + e.what());
        }

        LossBreakdown loss;
        auto grads = DecoderGradients::zeros_like(run.params);
        for (const auto& o : outputs) {
            loss += o.loss;
            grads += o.grads;
        }
        loss.normalized_cd /= static_cast<double>(groups.size());
        if (!std::isfinite(loss.total))
            fail(ErrorCode::NonFiniteLoss, "loss became non-finite at step " + std::to_string(step) +
                                               " (alignment " + std::to_string(loss.alignment) +
                                               ", regularizer " + std::to_string(loss.regularizer) + ")");
        run.trace.push_back(loss);
        totals.push_back(loss.total);
        if (progress)
            progress(step, loss);
        if (converged(totals, cfg)) {
            run.converged = true;
            break;
        }

        const double lr = lr_at(step, cfg);
        auto tensors = run.params.tensors();
        const auto grad_tensors = grads.tensors();
        for (std::size_t t = 0; t < tensors.size(); ++t)
            adam_step(theta_adam[t], tensors[t], grad_tensors[t], lr);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            auto& z = run.states[g].z;
            const auto& dz = outputs[g].grads.d_latent;
            adam_step(run.states[g].z_adam, std::span<double>(z.data(), static_cast<std::size_t>(z.size())),
                      std::span<const double>(dz.data(), static_cast<std::size_t>(dz.size())), lr);
        }
    }
    return run;
}

GroupAlignment finish_group(const DecoderParams& params, const GroupState& gs, const OptimConfig& cfg,
                            std::size_t steps, bool conv)
{
    const Group& group = *gs.group;
    GroupAlignment out;
    out.id = group.id();
    out.latent = GroupLatentDescriptor(gs.z);
    out.initial_normalized_cd = normalized_cd(group.members());
    const auto drifts = decode_group(params, gs, nullptr);
    const auto moved = transform(group, drifts);
    out.final_loss = evaluate_group_loss(moved, drifts, cfg.lambda, nullptr);
    for (std::size_t k = 0; k < drifts.size(); ++k) {
        out.transformed.emplace_back(moved[k]);
        out.drifts.emplace_back(drifts[k]);
    }
    out.steps = steps;
    out.converged = conv;
    return out;
}

std::size_t update_count(const RunOutput& run)
{
    return run.converged ? run.trace.size() - 1 : run.trace.size();
}

} // namespace

AlignmentResult align(const std::vector<Group>& groups, const OptimConfig& cfg, const ProgressFn& progress)
{
    cfg.validate();
    if (groups.empty())
        fail(ErrorCode::TooFewSets, "align needs at least one group");
    for (const auto& g : groups)
        if (g.dim() != groups.front().dim())
            fail(ErrorCode::DimMismatch, "all groups must share one dimensionality");

    AlignmentResult result;
    const std::size_t threads = std::max<std::size_t>(cfg.threads, 1);

    if (cfg.shared_decoder) {
        std::vector<const Group*> ptrs;
        std::vector<std::uint64_t> seeds;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            ptrs.push_back(&groups[g]);
            seeds.push_back(latent_seed(cfg.seed, g));
        }
        auto run = optimize(ptrs, seeds, decoder_seed(cfg.seed, 0, true), cfg, threads, progress);
        result.steps = update_count(run);
        result.converged = run.converged;
        result.groups.resize(groups.size());
        parallel_for(groups.size(), threads, [&](std::size_t g) {
            result.groups[g] = finish_group(run.params, run.states[g], cfg, result.steps, run.converged);
        });
        result.trace = std::move(run.trace);
        result.decoders.push_back(std::move(run.params));
        return result;
    }

    std::vector<RunOutput> runs(groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t g) {
        runs[g] = optimize({&groups[g]}, {latent_seed(cfg.seed, g)}, decoder_seed(cfg.seed, g, false), cfg, 1, {});
    });

    std::size_t longest = 0;
    result.converged = true;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto steps = update_count(runs[g]);
        result.groups.push_back(finish_group(runs[g].params, runs[g].states[0], cfg, steps, runs[g].converged));
        longest = std::max(longest, runs[g].trace.size());
        result.steps = std::max(result.steps, steps);
        result.converged = result.converged && runs[g].converged;
    }
    // Groups that stopped early hold their last value in the combined trace.
    for (std::size_t step = 0; step < longest; ++step) {
        LossBreakdown sum;
        for (const auto& run : runs)
            sum += run.trace[std::min(step, run.trace.size() - 1)];
        sum.normalized_cd /= static_cast<double>(groups.size());
        result.trace.push_back(sum);
        if (progress)
            progress(step, sum);
    }
    for (auto& run : runs)
        result.decoders.push_back(std::move(run.params));
    return result;
}

} // namespace gpalign
