#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "crowdloc/assign.hpp"
#include "crowdloc/net.hpp"
#include "oracle.hpp"

using namespace crowdloc;

namespace {

CostMatrix matrix(int n, int m, std::initializer_list<double> values) {
    CostMatrix d;
    d.n_targets = n;
    d.m_proposals = m;
    d.values = values;
    return d;
}

CostMatrix random_matrix(Rng& rng, int n, int m, double lo = 0.0, double hi = 10.0) {
    CostMatrix d;
    d.n_targets = n;
    d.m_proposals = m;
    d.values.resize(static_cast<std::size_t>(n) * m);
    for (double& v : d.values) v = rng.uniform(lo, hi);
    return d;
}

}  // namespace

TEST_SUITE("assign") {

TEST_CASE("1x1 matrix") {
    const MatchResult r = hungarian_match(matrix(1, 1, {3.0}));
    CHECK(r.assignment == std::vector<int>{0});
    CHECK(r.total_cost == 3.0);
    CHECK(r.positive_set == std::vector<int>{0});
    CHECK(r.negative_set.empty());
}

TEST_CASE("2x2 with a unique optimum") {
    const MatchResult r = hungarian_match(matrix(2, 2, {1.0, 2.0, 2.0, 1.0}));
    CHECK(r.assignment == std::vector<int>{0, 1});
    CHECK(r.total_cost == 2.0);
}

TEST_CASE("matches the exhaustive optimum on random rectangular instances") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = rng.uniform_int(1, 7);
        const int m = rng.uniform_int(n, 9);
        const CostMatrix d = random_matrix(rng, n, m, -2.0, 10.0);
        const MatchResult r = hungarian_match(d);
        CHECK(r.total_cost == doctest::Approx(oracle::min_cost_exhaustive(d)).epsilon(1e-12));
        // assignment must be injective
        std::vector<int> sorted = r.assignment;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    }
}

TEST_CASE("permuting target rows permutes the assignment and keeps the cost") {
    Rng rng(32);
    const int n = 5, m = 8;
    const CostMatrix d = random_matrix(rng, n, m);
    const MatchResult base = hungarian_match(d);

    const std::vector<int> perm{3, 0, 4, 1, 2};
    CostMatrix p = d;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) p.at(i, j) = d.at(perm[i], j);
    const MatchResult permuted = hungarian_match(p);
    CHECK(permuted.total_cost == doctest::Approx(base.total_cost).epsilon(1e-12));
    for (int i = 0; i < n; ++i) CHECK(permuted.assignment[i] == base.assignment[perm[i]]);
}

TEST_CASE("adding a constant shifts the cost by n times it and keeps the argmin") {
    Rng rng(33);
    const CostMatrix d = random_matrix(rng, 4, 7);
    const MatchResult base = hungarian_match(d);
    CostMatrix shifted = d;
    for (double& v : shifted.values) v += 2.5;
    const MatchResult r = hungarian_match(shifted);
    CHECK(r.assignment == base.assignment);
    CHECK(r.total_cost == doctest::Approx(base.total_cost + 4 * 2.5).epsilon(1e-12));
}

TEST_CASE("exactly m - n proposals land in the negative set") {
    Rng rng(34);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = rng.uniform_int(0, 6);
        const int m = rng.uniform_int(std::max(n, 1), 12);
        const MatchResult r = hungarian_match(random_matrix(rng, n, m));
        CHECK(r.negative_set.size() == static_cast<std::size_t>(m - n));
        CHECK(r.positive_set.size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("empty target set yields an all-negative match") {
    const MatchResult r = hungarian_match(matrix(0, 3, {}));
    CHECK(r.assignment.empty());
    CHECK(r.total_cost == 0.0);
    CHECK(r.negative_set == std::vector<int>{0, 1, 2});
}

TEST_CASE("non-finite costs are rejected") {
    CHECK_THROWS_AS(hungarian_match(matrix(1, 2, {1.0, std::numeric_limits<double>::infinity()})),
                    std::invalid_argument);
}

TEST_CASE("cost matrix formula and preconditions") {
    const Field field = make_field(16, 16);
    const ProposalSet props = forward(zero_params(NetHyper{9, 4, 4.0}), field);  // 4x4 anchors

    SUBCASE("mu = 0 reduces to pure distances") {
        const PointSet targets{anchor_center(props.grid_meta, 5)};
        const CostMatrix d = build_cost_matrix(targets, props, 0.0);
        CHECK(d.at(0, 5) == 0.0);
        for (int j = 0; j < d.m_proposals; ++j)
            CHECK(d.at(0, j) ==
                  euclidean_distance(targets[0], anchor_center(props.grid_meta, j)));
    }

    SUBCASE("uniform scores shift every entry by mu times the score") {
        const PointSet targets{Point2D{3.0, 7.0}};
        const CostMatrix plain = build_cost_matrix(targets, props, 0.0);
        const CostMatrix mixed = build_cost_matrix(targets, props, 1.0);
        for (int j = 0; j < plain.m_proposals; ++j)
            CHECK(mixed.at(0, j) == doctest::Approx(plain.at(0, j) - 0.5).epsilon(1e-15));
    }

    SUBCASE("more targets than proposals is an error told in terms of density") {
        const PointSet targets(17, Point2D{1.0, 1.0});
        CHECK_THROWS_WITH_AS(static_cast<void>(build_cost_matrix(targets, props, 0.0)),
                             doctest::Contains("density"), std::invalid_argument);
    }
}

}  // TEST_SUITE
