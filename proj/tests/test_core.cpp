#include <doctest.h>

#include "crowdloc/core.hpp"
#include "crowdloc/rng.hpp"
#include "oracle.hpp"

using namespace crowdloc;

TEST_SUITE("core") {

TEST_CASE("euclidean_distance on known pairs") {
    CHECK(euclidean_distance({0, 0}, {0, 0}) == 0.0);
    CHECK(euclidean_distance({0, 0}, {3, 4}) == 5.0);
    CHECK(euclidean_distance({1.5, 2.5}, {4.5, 6.5}) == 5.0);
}

TEST_CASE("euclidean_distance is symmetric and zero only at identity") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const Point2D a{rng.uniform(-50, 50), rng.uniform(-50, 50)};
        const Point2D b{rng.uniform(-50, 50), rng.uniform(-50, 50)};
        CHECK(euclidean_distance(a, b) == euclidean_distance(b, a));
        if (a.x != b.x || a.y != b.y) CHECK(euclidean_distance(a, b) > 0.0);
    }
}

TEST_CASE("triangle inequality on random triples") {
    Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        const Point2D a{rng.uniform(-100, 100), rng.uniform(-100, 100)};
        const Point2D b{rng.uniform(-100, 100), rng.uniform(-100, 100)};
        const Point2D c{rng.uniform(-100, 100), rng.uniform(-100, 100)};
        CHECK(euclidean_distance(a, c) <=
              euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12);
    }
}

TEST_CASE("grid dimensions follow ceil(extent / stride)") {
    const AnchorGridMeta g = make_grid(64, 64, 4.0);
    CHECK(g.rows == 16);
    CHECK(g.cols == 16);
    CHECK(anchor_count(g) == 256);
    const AnchorGridMeta ragged = make_grid(65, 63, 4.0);
    CHECK(ragged.rows == 17);
    CHECK(ragged.cols == 16);
}

TEST_CASE("anchor centers sit mid-cell") {
    const AnchorGridMeta g = make_grid(64, 64, 4.0);
    const Point2D c0 = anchor_center(g, 0);
    CHECK(c0.x == 2.0);
    CHECK(c0.y == 2.0);
    const Point2D c17 = anchor_center(g, anchor_index(g, 1, 1));
    CHECK(c17.x == 6.0);
    CHECK(c17.y == 6.0);
}

TEST_CASE("cell lookup inverts the center formula on every anchor") {
    for (const auto& [h, w, s] : {std::tuple{64, 64, 4.0}, {65, 63, 4.0}, {48, 96, 3.0}, {16, 16, 5.0}}) {
        const AnchorGridMeta g = make_grid(h, w, s);
        for (int a = 0; a < anchor_count(g); ++a) CHECK(cell_of(g, anchor_center(g, a)) == a);
    }
}

TEST_CASE("grid rejects degenerate shapes") {
    CHECK_THROWS_AS(make_grid(0, 10, 4.0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(10, 10, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(10, 10, -1.0), std::invalid_argument);
}

TEST_CASE("rng state serialization round-trips the stream") {
    Rng a(99);
    for (int i = 0; i < 17; ++i) a.uniform01();
    Rng b = Rng::deserialize(a.serialize());
    CHECK(a == b);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng normal moments are sane") {
    Rng rng(5);
    double s1 = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(0.0, 2.0);
        s1 += x;
        s2 += x * x;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(4.0).epsilon(0.02));
}

}  // TEST_SUITE
