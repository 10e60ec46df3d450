#pragma once

#include "gpalign/decoder.hpp"
#include "gpalign/geometry.hpp"
#include "gpalign/loss.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace gpalign {

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One bias-corrected Adam update. A fresh state (empty moments) is sized on first use.
void adam_step(AdamState& state, std::span<double> variable, std::span<const double> gradient, double lr);

struct OptimConfig {
    std::size_t max_steps = 500;
    double lr_start = 1e-3;
    double lr_end = 1e-4;
    std::size_t lr_decay_steps = 100;
    double lambda = 0.1;
    std::size_t latent_dim = 256;
    std::vector<int> hidden = {128, 64};
    std::uint64_t seed = 0;
    double convergence_rel_tol = 1e-6;
    std::size_t convergence_window = 20;
    /// One decoder for all groups (true) or an independent decoder per group.
    bool shared_decoder = true;
    /// Worker threads over groups. Per-group results are reduced in group
    /// order, so any thread count gives bit-identical output.
    std::size_t threads = 1;

    void validate() const;
};

/// Linear decay from lr_start to lr_end over lr_decay_steps, then constant.
double lr_at(std::size_t step, const OptimConfig& cfg);

/// True iff the last `convergence_window` entries change by less than
/// convergence_rel_tol relative to the current loss at every step.
bool converged(std::span<const double> trace, const OptimConfig& cfg);

struct GroupAlignment {
    std::string id;
    std::vector<PointSet> transformed;
    std::vector<DriftField> drifts;
    GroupLatentDescriptor latent;
    double initial_normalized_cd = 0.0; // raw inputs, before any drift
    LossBreakdown final_loss;
    std::size_t steps = 0;
    bool converged = false;
};

struct AlignmentResult {
    std::vector<GroupAlignment> groups;
    /// One entry when the decoder is shared, otherwise one per group.
    std::vector<DecoderParams> decoders;
    /// Loss summed over groups, one entry per optimization step (before its update).
    std::vector<LossBreakdown> trace;
    std::size_t steps = 0;
    bool converged = false;
};

using ProgressFn = std::function<void(std::size_t step, const LossBreakdown& loss)>;

/// Jointly optimizes the decoder and every group's latent code with Adam.
AlignmentResult align(const std::vector<Group>& groups, const OptimConfig& cfg, const ProgressFn& progress = {});

/// Seeds used for the shared decoder and for group `index`'s latent code.
std::uint64_t decoder_seed(std::uint64_t seed, std::size_t group_index, bool shared);
std::uint64_t latent_seed(std::uint64_t seed, std::size_t group_index);

} // namespace gpalign
