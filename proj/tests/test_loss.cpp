#include "gpalign/error.hpp"
#include "gpalign/loss.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace gpalign;

namespace {

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Ok;
}

std::vector<PointSet> wrap(const std::vector<Eigen::MatrixXd>& ms)
{
    return {ms.begin(), ms.end()};
}

} // namespace

TEST_CASE("nearest examples")
{
    NnIndex idx(PointSet::from_list({{0, 0}, {10, 0}}));
    Eigen::VectorXd q(2);
    q << 1, 0;
    auto hit = nearest(idx, q);
    CHECK(hit.index == 0);
    CHECK(hit.sq_dist == 1.0);
    q << 10, 0;
    hit = nearest(idx, q);
    CHECK(hit.index == 1);
    CHECK(hit.sq_dist == 0.0);

    CHECK(code_of([&] { NnIndex().nearest(q); }) == ErrorCode::EmptyIndex);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 20);
    bad(1, 7) = std::numeric_limits<double>::quiet_NaN();
    CHECK(code_of([&] { NnIndex{bad}; }) == ErrorCode::InvalidArgument);
}

TEST_CASE("nearest ties go to the lowest index")
{
    // Duplicates and equidistant points spread across leaves.
    Eigen::MatrixXd pts(2, 40);
    for (int j = 0; j < 40; ++j) {
        pts(0, j) = (j % 4) - 1.5;
        pts(1, j) = ((j / 4) % 2) - 0.5;
    }
    NnIndex idx(pts);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
    CHECK(idx.nearest(q).index == oracle::brute_nearest(pts, q).first);
    for (int j = 0; j < 40; ++j) {
        const Eigen::VectorXd p = pts.col(j);
        CHECK(idx.nearest(p).index == oracle::brute_nearest(pts, p).first);
    }
}

TEST_CASE("kd-tree matches brute force")
{
    for (int dim : {2, 3}) {
        std::mt19937_64 rng(dim);
        for (Eigen::Index n : {1, 7, 9, 100, 1000}) {
            const Eigen::MatrixXd pts = oracle::random_points(dim, n, rng);
            NnIndex idx(pts);
            CHECK(idx.size() == std::size_t(n));
            int mismatches = 0;
            for (int i = 0; i < 1000; ++i) {
                const Eigen::VectorXd q = oracle::random_points(dim, 1, rng, -1.2, 1.2);
                const auto hit = idx.nearest(q);
                const auto ref = oracle::brute_nearest(pts, q);
                mismatches += (hit.index != ref.first || hit.sq_dist != ref.second);
            }
            CHECK(mismatches == 0);
        }
    }
}

TEST_CASE("chamfer examples")
{
    CHECK(chamfer(PointSet::from_list({{0, 0}}), PointSet::from_list({{0, 0}})) == 0.0);
    CHECK(chamfer(PointSet::from_list({{0, 0}}), PointSet::from_list({{3, 4}})) == 50.0);
    CHECK(chamfer(PointSet::from_list({{0, 0}, {1, 0}}), PointSet::from_list({{0, 0}})) == 1.0);
    CHECK(code_of([] { chamfer(PointSet(Eigen::MatrixXd(2, 0)), PointSet::from_list({{0, 0}})); }) ==
          ErrorCode::EmptySet);
    CHECK(code_of([] { chamfer(PointSet::from_list({{0, 0, 0}}), PointSet::from_list({{0, 0}})); }) ==
          ErrorCode::DimMismatch);
}

TEST_CASE("chamfer and groupwise against the double-loop oracle")
{
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 2 + trial % 2;
        const std::size_t k = 2 + trial % 4;
        std::vector<Eigen::MatrixXd> sets;
        for (std::size_t i = 0; i < k; ++i)
            sets.push_back(oracle::random_points(dim, 5 + (trial * 7 + long(i) * 3) % 40, rng));

        const double c = chamfer(PointSet(sets[0]), PointSet(sets[1]));
        CHECK(oracle::rel_err(c, oracle::chamfer(sets[0], sets[1])) < 1e-12);
        CHECK(c == chamfer(PointSet(sets[1]), PointSet(sets[0])));

        const double g = groupwise_chamfer(wrap(sets));
        CHECK(oracle::rel_err(g, 2.0 * oracle::unordered_pair_sum(sets)) < 1e-12);

        double mean_n = 0;
        for (const auto& s : sets)
            mean_n += double(s.cols());
        mean_n /= double(k);
        CHECK(oracle::rel_err(normalized_cd(wrap(sets)), g / (double(k * (k - 1)) * mean_n)) < 1e-12);
    }
}

TEST_CASE("chamfer is permutation invariant")
{
    std::mt19937_64 rng(9);
    const Eigen::MatrixXd x = oracle::random_points(3, 30, rng);
    const Eigen::MatrixXd y = oracle::random_points(3, 20, rng);
    const Eigen::MatrixXd xr = x.rowwise().reverse();
    CHECK(oracle::rel_err(chamfer(PointSet(x), PointSet(y)), chamfer(PointSet(xr), PointSet(y))) < 1e-14);
}

TEST_CASE("groupwise examples")
{
    const auto a = PointSet::from_list({{0, 0}, {1, 1}});
    CHECK(groupwise_chamfer({a, a, a}) == 0.0);
    const auto p = PointSet::from_list({{0, 0}});
    const auto q = PointSet::from_list({{3, 4}});
    CHECK(groupwise_chamfer({p, q}) == 100.0);
    CHECK(normalized_cd({p, q}) == 50.0);
    CHECK(normalized_cd({a, a}) == 0.0);
    CHECK(code_of([&] { groupwise_chamfer({a}); }) == ErrorCode::TooFewSets);
    CHECK(code_of([&] { normalized_cd({a}); }) == ErrorCode::TooFewSets);
}

TEST_CASE("normalized cd when duplicating a group")
{
    // Doubling {A, B} to {A, B, A, B}: ordered pairs go 2 -> 12, of which
    // 8 are cross pairs (A, B) and 4 are identical copies, so the raw sum is 4x
    // and the normalizer is 6x.
    std::mt19937_64 rng(3);
    const PointSet a(oracle::random_points(2, 25, rng));
    const PointSet b(oracle::random_points(2, 25, rng));
    const double two = normalized_cd({a, b});
    const double four = normalized_cd({a, b, a, b});
    const double c = oracle::chamfer(a.coords(), b.coords());
    CHECK(oracle::rel_err(two, 2 * c / (2 * 25.0)) < 1e-12);
    CHECK(oracle::rel_err(four, 8 * c / (12 * 25.0)) < 1e-12);
    CHECK(oracle::rel_err(four / two, 2.0 / 3.0) < 1e-12);
}

TEST_CASE("regularized loss examples")
{
    const auto a = PointSet::from_list({{0, 0}, {1, 0}});
    const std::vector<DriftField> zero{DriftField::zeros(2, 2), DriftField::zeros(2, 2)};
    const auto l0 = regularized_loss({a, a}, zero, 0.1);
    CHECK(l0.total == 0.0);
    CHECK(l0.alignment == 0.0);

    Eigen::MatrixXd d(2, 1);
    d << 3, 4;
    const auto p = PointSet::from_list({{0, 0}});
    const auto l = regularized_loss({p, p}, {DriftField(d), DriftField::zeros(2, 1)}, 0.1);
    CHECK(l.regularizer == 5.0);
    CHECK(l.total - l.alignment == doctest::Approx(0.5));
    CHECK(l.alignment == 100.0);

    const auto l_no = regularized_loss({p, p}, {DriftField(d), DriftField::zeros(2, 1)}, 0.0);
    CHECK(l_no.total == l_no.alignment);

    CHECK(code_of([&] { regularized_loss({p, p}, {DriftField(d)}, 0.1); }) == ErrorCode::LengthMismatch);
    CHECK(code_of([&] { regularized_loss({p, p}, {DriftField(d), DriftField::zeros(2, 2)}, 0.1); }) ==
          ErrorCode::LengthMismatch);
}

TEST_CASE("loss breakdown invariants")
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<PointSet> sets;
        std::vector<DriftField> drifts;
        for (int k = 0; k < 3; ++k) {
            sets.emplace_back(oracle::random_points(2, 12, rng));
            drifts.emplace_back(oracle::random_points(2, 12, rng, -0.2, 0.2));
        }
        double prev = -1;
        for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0}) {
            const auto l = regularized_loss(sets, drifts, lambda);
            CHECK(l.alignment >= 0);
            CHECK(l.regularizer >= 0);
            CHECK(l.normalized_cd >= 0);
            CHECK(oracle::rel_err(l.total, l.alignment + lambda * l.regularizer) < 1e-12);
            CHECK(l.total >= prev);
            prev = l.total;
        }
    }
}

TEST_CASE("loss gradient examples")
{
    const auto a = PointSet::from_list({{0, 0}, {1, 0}, {0, 2}});
    auto g = loss_gradients({a, a, a}, {DriftField::zeros(2, 3), DriftField::zeros(2, 3), DriftField::zeros(2, 3)},
                            0.1);
    for (const auto& d : g)
        CHECK(d.drifts().isZero());

    const auto p = PointSet::from_list({{0, 0}});
    const auto q = PointSet::from_list({{3, 4}});
    g = loss_gradients({p, q}, {DriftField::zeros(2, 1), DriftField::zeros(2, 1)}, 0.0);
    CHECK(g[0].drifts()(0, 0) == -24.0);
    CHECK(g[0].drifts()(1, 0) == -32.0);
    CHECK(g[1].drifts()(0, 0) == 24.0);
    CHECK(g[1].drifts()(1, 0) == 32.0);
}

TEST_CASE("loss gradients match central differences at NN-stable points")
{
    std::mt19937_64 rng(23);
    int checked = 0;
    for (int trial = 0; checked < 20 && trial < 200; ++trial) {
        const int dim = 2 + trial % 2;
        std::vector<Eigen::MatrixXd> x, d, moved;
        for (int k = 0; k < 3; ++k) {
            x.push_back(oracle::random_points(dim, 8, rng));
            d.push_back(oracle::random_points(dim, 8, rng, -0.1, 0.1));
            moved.push_back(x.back() + d.back());
        }
        if (oracle::nn_margin(moved) < 1e-3)
            continue;
        ++checked;
        const double lambda = 0.3;
        std::vector<DriftField> dfs(d.begin(), d.end());
        const auto g = loss_gradients(wrap(x), dfs, lambda);
        const double h = 1e-6;
        double worst = 0;
        for (int k = 0; k < 3; ++k)
            for (Eigen::Index i = 0; i < d[k].size(); ++i) {
                const double keep = d[k].data()[i];
                d[k].data()[i] = keep + h;
                const double up = oracle::total_loss(x, d, lambda);
                d[k].data()[i] = keep - h;
                const double down = oracle::total_loss(x, d, lambda);
                d[k].data()[i] = keep;
                worst = std::max(worst, oracle::rel_err(g[k].drifts().data()[i], (up - down) / (2 * h), 1e-4));
            }
        CHECK(worst < 1e-4);
    }
    CHECK(checked == 20);
}

TEST_CASE("evaluate_group_loss agrees with the typed API")
{
    std::mt19937_64 rng(31);
    std::vector<Eigen::MatrixXd> x, d, moved;
    for (int k = 0; k < 4; ++k) {
        x.push_back(oracle::random_points(3, 10 + k, rng));
        d.push_back(oracle::random_points(3, 10 + k, rng, -0.1, 0.1));
        moved.push_back(x.back() + d.back());
    }
    std::vector<Eigen::MatrixXd> grads;
    const auto l = evaluate_group_loss(moved, d, 0.2, &grads);
    const auto ref = regularized_loss(wrap(x), {d.begin(), d.end()}, 0.2);
    CHECK(oracle::rel_err(l.total, ref.total) < 1e-12);
    CHECK(oracle::rel_err(l.normalized_cd, ref.normalized_cd) < 1e-12);
    const auto g = loss_gradients(wrap(x), {d.begin(), d.end()}, 0.2);
    for (int k = 0; k < 4; ++k)
        CHECK((grads[k] - g[k].drifts()).cwiseAbs().maxCoeff() < 1e-12);
}
