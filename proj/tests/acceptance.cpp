// Acceptance suite: one line per criterion, exit status is the number of failures.
//   gpalign_acceptance               run everything
//   gpalign_acceptance --criterion 4 run one criterion

#include "gpalign/decoder.hpp"
#include "gpalign/io.hpp"
#include "gpalign/loss.hpp"
#include "gpalign/optimizer.hpp"
#include "gpalign/synthesis.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace gpalign;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double reduction(const GroupAlignment& g)
{
    return (g.initial_normalized_cd - g.final_loss.normalized_cd) / g.initial_normalized_cd;
}

OptimConfig default_config(std::uint64_t seed)
{
    OptimConfig cfg;
    cfg.seed = seed;
    return cfg;
}

GroupAlignment align_one(const Group& g, const OptimConfig& cfg)
{
    return align({g}, cfg).groups.front();
}

// ---- 1: analytic gradient of the full objective vs central differences ----

double objective(const DecoderParams& p, const Eigen::VectorXd& z, const std::vector<Eigen::MatrixXd>& xs,
                 double lambda)
{
    std::vector<Eigen::MatrixXd> d;
    for (const auto& x : xs)
        d.push_back(decode(p, z, x));
    return oracle::total_loss(xs, d, lambda);
}

// Smallest |pre-activation| over hidden units; a kink within h of a sample breaks differencing.
double min_preactivation(const DecoderParams& p, const Eigen::VectorXd& z, const Eigen::MatrixXd& x)
{
    double m = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Eigen::VectorXd h(x.rows() + z.size());
        h << x.col(j), z;
        for (std::size_t l = 0; l + 1 < p.num_layers(); ++l) {
            const Eigen::VectorXd a = p.layers()[l].weight * h + p.layers()[l].bias;
            m = std::min(m, a.cwiseAbs().minCoeff());
            h = a.cwiseMax(0.0);
        }
    }
    return m;
}

Outcome gradient_correctness()
{
    const auto t0 = Clock::now();
    const double lambda = 0.1, h = 1e-5;
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> n01;
    int checked = 0, skipped = 0;
    double worst = 0;
    for (std::uint64_t seed = 0; checked < 20 && seed < 500; ++seed) {
        const int dim = 2 + int(seed % 2);
        auto params = init_params(dim, 8, {16, 8}, seed);
        auto tensors = params.tensors();
        for (std::size_t t = 1; t < tensors.size(); t += 2) // biases start at zero; give them a role
            for (double& v : tensors[t])
                v = 0.2 * n01(rng);
        Eigen::VectorXd z(8);
        for (auto& v : z)
            v = n01(rng);
        std::vector<Eigen::MatrixXd> xs, drifts, moved;
        double kink = std::numeric_limits<double>::infinity(), min_drift = kink;
        for (int k = 0; k < 3; ++k) {
            xs.push_back(oracle::random_points(dim, 10, rng));
            drifts.push_back(decode(params, z, xs.back()));
            moved.push_back(xs.back() + drifts.back());
            kink = std::min(kink, min_preactivation(params, z, xs.back()));
            min_drift = std::min(min_drift, drifts.back().colwise().norm().minCoeff());
        }
        if (oracle::nn_margin(moved) < 1e-3 || kink < 1e-3 || min_drift < 1e-3) {
            ++skipped;
            continue;
        }
        ++checked;

        std::vector<Eigen::MatrixXd> upstream;
        evaluate_group_loss(moved, drifts, lambda, &upstream);
        auto grads = DecoderGradients::zeros_like(params);
        for (int k = 0; k < 3; ++k)
            backward_accumulate(params, z, xs[k], upstream[k], grads);

        auto pt = params.tensors();
        const auto gt = grads.tensors();
        for (std::size_t t = 0; t < pt.size(); ++t)
            for (std::size_t i = 0; i < pt[t].size(); ++i) {
                const double keep = pt[t][i];
                pt[t][i] = keep + h;
                const double up = objective(params, z, xs, lambda);
                pt[t][i] = keep - h;
                const double down = objective(params, z, xs, lambda);
                pt[t][i] = keep;
                worst = std::max(worst, oracle::rel_err(gt[t][i], (up - down) / (2 * h), 1e-6));
            }
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double keep = z(i);
            z(i) = keep + h;
            const double up = objective(params, z, xs, lambda);
            z(i) = keep - h;
            const double down = objective(params, z, xs, lambda);
            z(i) = keep;
            worst = std::max(worst, oracle::rel_err(grads.d_latent(i), (up - down) / (2 * h), 1e-6));
        }
    }
    const double secs = seconds_since(t0);
    return {checked >= 20 && worst < 1e-4 && secs < 10.0,
            fmt("%d instances (%d NN/ReLU-unstable skipped), max rel err %.2e, %.2fs", checked, skipped, worst,
                secs)};
}

// ---- 2: KD-tree exactness ----

Outcome nn_exactness()
{
    const auto t0 = Clock::now();
    int mismatches = 0;
    for (int dim : {2, 3}) {
        std::mt19937_64 rng(77 + dim);
        const Eigen::MatrixXd pts = oracle::random_points(dim, 1000, rng);
        const NnIndex idx(pts);
        for (int q = 0; q < 1000; ++q) {
            const Eigen::VectorXd query = oracle::random_points(dim, 1, rng, -1.1, 1.1);
            const auto hit = idx.nearest(query);
            const auto ref = oracle::brute_nearest(pts, query);
            mismatches += hit.index != ref.first || hit.sq_dist != ref.second;
        }
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 1.0, fmt("%d mismatches over 2x1000 queries, %.3fs", mismatches, secs)};
}

// ---- 3: Chamfer vs O(N^2) oracle ----

Outcome chamfer_oracle()
{
    std::mt19937_64 rng(303);
    double worst_pair = 0, worst_group = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 2 + trial % 2;
        const int k = 2 + trial % 5;
        std::vector<Eigen::MatrixXd> sets;
        std::vector<PointSet> ps;
        for (int i = 0; i < k; ++i) {
            sets.push_back(oracle::random_points(dim, 20 + (trial * 13 + i * 7) % 60, rng));
            ps.emplace_back(sets.back());
        }
        worst_pair = std::max(worst_pair, oracle::rel_err(chamfer(ps[0], ps[1]), oracle::chamfer(sets[0], sets[1])));
        worst_group = std::max(worst_group,
                               oracle::rel_err(groupwise_chamfer(ps), 2.0 * oracle::unordered_pair_sum(sets)));
    }
    return {worst_pair < 1e-12 && worst_group < 1e-12,
            fmt("50 instances, pair rel err %.1e, groupwise vs 2x unordered rel err %.1e", worst_pair, worst_group)};
}

// ---- 4: fish group at level 0.4 ----

Outcome fish_convergence()
{
    const auto t0 = Clock::now();
    const auto g = align_one(make_group(fish_shape(), 7, 0.4, 1), default_config(1));
    const double secs = seconds_since(t0);
    const double red = reduction(g);
    return {g.final_loss.normalized_cd <= 0.01 && red >= 0.95 && secs < 120.0,
            fmt("initial %.4g -> final %.4g (%.2f%% reduction), %zu steps, %.1fs", g.initial_normalized_cd,
                g.final_loss.normalized_cd, 100 * red, g.steps, secs)};
}

// ---- 5: deformation sweep ----

Outcome deformation_sweep()
{
    std::vector<double> finals, reds;
    for (double level : {0.2, 0.4, 0.6}) {
        const auto g = align_one(make_group(fish_shape(), 7, level, 1), default_config(1));
        finals.push_back(g.final_loss.normalized_cd);
        reds.push_back(reduction(g));
    }
    const bool ordered = finals[0] <= finals[1] && finals[1] <= finals[2];
    const bool reduced = reds[0] >= 0.9 && reds[1] >= 0.9 && reds[2] >= 0.9;
    return {ordered && reduced, fmt("final %.3g / %.3g / %.3g, reductions %.1f%% / %.1f%% / %.1f%%", finals[0],
                                    finals[1], finals[2], 100 * reds[0], 100 * reds[1], 100 * reds[2])};
}

// ---- 6: seed robustness ----

Outcome seed_robustness()
{
    const auto group = make_group(fish_shape(), 7, 0.4, 1);
    std::vector<double> finals;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
        finals.push_back(align_one(group, default_config(seed)).final_loss.normalized_cd);
    double mean = 0;
    for (double f : finals)
        mean += f;
    mean /= double(finals.size());
    double var = 0;
    for (double f : finals)
        var += (f - mean) * (f - mean);
    const double sd = std::sqrt(var / double(finals.size() - 1));
    return {sd / mean < 0.3, fmt("10 seeds: mean %.4g, sample std %.3g, CV %.3f", mean, sd, sd / mean)};
}

// ---- 7: group size ----

Outcome group_size_scaling()
{
    const auto t0 = Clock::now();
    std::vector<double> finals;
    bool reduced = true;
    std::string parts;
    for (std::size_t k : {10, 20, 50}) {
        const auto g = align_one(make_group(fish_shape(), k, 0.2, 1), default_config(1));
        finals.push_back(g.final_loss.normalized_cd);
        reduced = reduced && reduction(g) >= 0.9;
        parts += fmt("K=%zu %.3g (%.1f%%) ", k, g.final_loss.normalized_cd, 100 * reduction(g));
    }
    const double band = *std::max_element(finals.begin(), finals.end()) /
                        *std::min_element(finals.begin(), finals.end());
    const double secs = seconds_since(t0);
    return {band <= 3.0 && reduced && secs < 900.0, parts + fmt("max/min %.2f, %.1fs", band, secs)};
}

// ---- 8: regularization weight ----

Outcome regularization_tradeoff()
{
    const auto group = make_group(chair_shape(2048, 1), 3, 0.4, 1);
    std::vector<double> align_cd;
    for (double lambda : {0.01, 0.1, 1.2}) {
        auto cfg = default_config(1);
        cfg.max_steps = 200;
        cfg.lambda = lambda;
        align_cd.push_back(align_one(group, cfg).final_loss.alignment);
    }
    return {align_cd[0] < align_cd[1] && align_cd[1] < align_cd[2],
            fmt("final alignment CD at lambda 0.01 / 0.1 / 1.2: %.4g / %.4g / %.4g", align_cd[0], align_cd[1],
                align_cd[2])};
}

// ---- 9: multi-group batch ----

Outcome multi_group_batch()
{
    const auto t0 = Clock::now();
    std::vector<Group> groups;
    for (int i = 0; i < 10; ++i) {
        const auto base = i % 2 ? table_shape(2048, 100 + i) : chair_shape(2048, 100 + i);
        groups.push_back(make_group(base, 3, 0.4, 1000 + i, "g" + std::to_string(i)));
    }
    auto cfg = default_config(1);
    cfg.threads = std::max(1u, std::thread::hardware_concurrency());
    const auto report = make_report(align(groups, cfg), seconds_since(t0));
    const double secs = seconds_since(t0);
    const double red = (report.mean_initial - report.mean_final) / report.mean_initial;
    return {red >= 0.8 && secs < 1800.0,
            fmt("mean normalized CD %.4g -> %.4g (%.2f%% reduction; mean per-group %.2f%%), %zu thread(s), %.1fs",
                report.mean_initial, report.mean_final, 100 * red, 100 * report.mean_reduction(), cfg.threads,
                secs)};
}

// ---- 10: noise robustness ----

Outcome noise_robustness()
{
    struct Case {
        NoiseKind kind;
        double level;
    };
    bool ok = true;
    std::string parts;
    for (const Case c : {Case{NoiseKind::PointOutlier, 0.4}, Case{NoiseKind::DataIncompleteness, 0.2},
                         Case{NoiseKind::GaussianDisplacement, 0.05}}) {
        const auto clean = make_group(fish_shape(), 3, 0.4, 1);
        std::vector<PointSet> noisy;
        for (std::size_t i = 0; i < clean.size(); ++i)
            noisy.push_back(apply_noise(clean.members()[i], {c.kind, c.level, 500 + i}));
        const auto r = align({Group(noise_kind_name(c.kind), noisy)}, default_config(1));
        bool finite = true;
        for (const auto& l : r.trace)
            finite = finite && std::isfinite(l.total);
        const double red = reduction(r.groups[0]);
        ok = ok && finite && red >= 0.7;
        parts += fmt("%s %.2g: %.1f%%%s; ", noise_kind_name(c.kind), c.level, 100 * red, finite ? "" : " NON-FINITE");
    }
    return {ok, parts};
}

// ---- 11: trivial optimum ----

Outcome trivial_optimum()
{
    const auto fish = fish_shape();
    const auto g = align_one(Group("same", std::vector<PointSet>(5, fish)), default_config(1));
    double sum = 0;
    std::size_t n = 0;
    for (const auto& d : g.drifts) {
        sum += d.drifts().colwise().norm().sum();
        n += d.size();
    }
    const double mean_drift = sum / double(n);
    return {mean_drift < 0.05 && g.final_loss.normalized_cd < 1e-4,
            fmt("mean drift norm %.3g, final normalized CD %.3g", mean_drift, g.final_loss.normalized_cd)};
}

// ---- 12: determinism ----

Outcome determinism()
{
    const auto group = make_group(fish_shape(), 7, 0.4, 1);
    const auto a = make_report(align({group}, default_config(1)), 0.0);
    const auto b = make_report(align({group}, default_config(1)), 0.0);
    bool same = a.rows.size() == b.rows.size() && a.mean_initial == b.mean_initial && a.mean_final == b.mean_final;
    for (std::size_t i = 0; same && i < a.rows.size(); ++i) {
        const auto &x = a.rows[i], &y = b.rows[i];
        same = x.group_id == y.group_id && x.k == y.k && x.initial_normalized_cd == y.initial_normalized_cd &&
               x.final_normalized_cd == y.final_normalized_cd && x.steps == y.steps && x.converged == y.converged;
    }
    return {same, fmt("final %.17g vs %.17g", a.rows[0].final_normalized_cd, b.rows[0].final_normalized_cd)};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"gpalign acceptance suite"};
    std::vector<int> only;
    app.add_option("-c,--criterion", only, "Run only these criteria (1-12)")->check(CLI::Range(1, 12));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "gradient-correctness", gradient_correctness},
        {2, "nn-exactness", nn_exactness},
        {3, "chamfer-oracle", chamfer_oracle},
        {4, "fish-convergence", fish_convergence},
        {5, "deformation-sweep", deformation_sweep},
        {6, "seed-robustness", seed_robustness},
        {7, "group-size-scaling", group_size_scaling},
        {8, "regularization-tradeoff", regularization_tradeoff},
        {9, "multi-group-batch", multi_group_batch},
        {10, "noise-robustness", noise_robustness},
        {11, "trivial-optimum", trivial_optimum},
        {12, "determinism", determinism},
    };

    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end())
            continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("[%s] %2d %-24s %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
