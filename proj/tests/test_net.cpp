#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "crowdloc/net.hpp"
#include "oracle.hpp"

using namespace crowdloc;
namespace fs = std::filesystem;

TEST_SUITE("net") {

TEST_CASE("parameter count matches the layout") {
    const NetHyper h{9, 32, 4.0};
    CHECK(param_count(h) == 81u * 32 + 32 + 3 * 32 + 3);
    CHECK(zero_params(h).theta.size() == param_count(h));
}

TEST_CASE("zero parameters leave proposals at the anchor centers with score one half") {
    Rng rng(3);
    const Field field = oracle::random_field(rng, 64, 64);
    const ProposalSet props = forward(zero_params(NetHyper{}), field);
    CHECK(props.proposals.size() == 256);
    for (const ScoredProposal& p : props.proposals) {
        const Point2D center = anchor_center(props.grid_meta, p.anchor_index);
        CHECK(p.position.x == center.x);
        CHECK(p.position.y == center.y);
        CHECK(p.score == 0.5);
    }
}

TEST_CASE("forward is pure") {
    Rng rng(4);
    const Field field = oracle::random_field(rng, 32, 48);
    ModelParams params = init_params(NetHyper{5, 7, 4.0}, rng);
    const ProposalSet a = forward(params, field);
    const ProposalSet b = forward(params, field);
    REQUIRE(a.proposals.size() == b.proposals.size());
    for (std::size_t i = 0; i < a.proposals.size(); ++i) {
        CHECK(a.proposals[i].position.x == b.proposals[i].position.x);
        CHECK(a.proposals[i].score == b.proposals[i].score);
    }
}

TEST_CASE("scores stay strictly inside (0, 1)") {
    Rng rng(5);
    ModelParams params = init_params(NetHyper{5, 7, 4.0}, rng);
    for (double& t : params.theta) t *= 40.0;  // push logits far out
    const Field field = oracle::random_field(rng, 24, 24, 3.0);
    for (const ScoredProposal& p : forward(params, field).proposals) {
        CHECK(p.score > 0.0);
        CHECK(p.score < 1.0);
    }
}

TEST_CASE("a proposal only sees its own patch") {
    Rng rng(6);
    const NetHyper hyper{9, 8, 4.0};
    ModelParams params = init_params(hyper, rng);
    Field field = oracle::random_field(rng, 40, 40);
    const int probe = 12;  // some interior anchor
    const ProposalSet before = forward(params, field);

    // anchor 12 of a 10x10 grid is cell (1, 2): center (10, 6), patch rows 2..10, cols 6..14
    field.at(30, 30) += 5.0f;  // far outside that patch
    const ProposalSet after = forward(params, field);
    CHECK(before.proposals[probe].position.x == after.proposals[probe].position.x);
    CHECK(before.proposals[probe].position.y == after.proposals[probe].position.y);
    CHECK(before.proposals[probe].score == after.proposals[probe].score);

    field.at(6, 8) += 5.0f;  // inside the probe's patch
    const ProposalSet touched = forward(params, field);
    CHECK(before.proposals[probe].score != touched.proposals[probe].score);
}

TEST_CASE("non-finite fields are rejected with a count") {
    Field field = make_field(16, 16);
    field.at(3, 3) = std::numeric_limits<float>::quiet_NaN();
    field.at(5, 5) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_WITH_AS(static_cast<void>(forward(zero_params(NetHyper{}), field)),
                         doctest::Contains("2 non-finite"), std::invalid_argument);
}

TEST_CASE("fields smaller than the patch are rejected") {
    const Field field = make_field(8, 32);
    CHECK_THROWS_AS(static_cast<void>(forward(zero_params(NetHyper{}), field)), std::invalid_argument);
}

TEST_CASE("zero output gradients give a zero parameter gradient") {
    Rng rng(7);
    const Field field = oracle::random_field(rng, 24, 24);
    ModelParams params = init_params(NetHyper{5, 6, 4.0}, rng);
    ForwardCache cache;
    const ProposalSet props = forward(params, field, &cache);
    const std::vector<Point2D> gpos(props.proposals.size(), Point2D{0.0, 0.0});
    const std::vector<double> gscore(props.proposals.size(), 0.0);
    for (double g : backward(cache, gpos, gscore)) CHECK(g == 0.0);
}

TEST_CASE("sigmoid jacobian at zero parameters is one quarter") {
    // loss = score of a single anchor; with zero params the logit is 0 and
    // d score / d logit = 0.25, so the output-bias gradient is exactly 0.25
    const Field field = make_field(16, 16);
    ModelParams params = zero_params(NetHyper{9, 4, 4.0});
    ForwardCache cache;
    const ProposalSet props = forward(params, field, &cache);
    std::vector<Point2D> gpos(props.proposals.size(), Point2D{0.0, 0.0});
    std::vector<double> gscore(props.proposals.size(), 0.0);
    gscore[5] = 1.0;
    const std::vector<double> grad = backward(cache, gpos, gscore);
    const std::size_t logit_bias = param_count(params.hyper) - 1;
    CHECK(grad[logit_bias] == 0.25);
}

TEST_CASE("backward rejects mismatched gradient shapes") {
    const Field field = make_field(16, 16);
    ForwardCache cache;
    const ProposalSet props = forward(zero_params(NetHyper{}), field, &cache);
    const std::vector<Point2D> gpos(props.proposals.size() - 1);
    const std::vector<double> gscore(props.proposals.size() - 1);
    CHECK_THROWS_AS(static_cast<void>(backward(cache, gpos, gscore)), std::invalid_argument);
}

TEST_CASE("analytic gradient matches central finite differences") {
    // random linear functional over all positions and scores, five seeds
    for (std::uint64_t seed : {21u, 22u, 23u, 24u, 25u}) {
        Rng rng(seed);
        const NetHyper hyper{5, 6, 4.0};
        ModelParams params = init_params(hyper, rng);
        const Field field = oracle::random_field(rng, 20, 20);

        ForwardCache cache;
        const ProposalSet props = forward(params, field, &cache);
        const std::size_t m = props.proposals.size();
        std::vector<Point2D> gpos(m);
        std::vector<double> gscore(m);
        for (std::size_t j = 0; j < m; ++j) {
            gpos[j] = Point2D{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            gscore[j] = rng.uniform(-1, 1);
        }
        const std::vector<double> analytic = backward(cache, gpos, gscore);

        auto scalar = [&]() {
            const ProposalSet p = forward(params, field);
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                acc += gpos[j].x * p.proposals[j].position.x + gpos[j].y * p.proposals[j].position.y;
                acc += gscore[j] * p.proposals[j].score;
            }
            return acc;
        };

        double worst = 0.0;
        for (std::size_t i = 0; i < params.theta.size(); ++i) {
            const double fd = oracle::central_diff(scalar, &params.theta[i], 1e-4);
            worst = std::max(worst, oracle::rel_discrepancy(analytic[i], fd));
        }
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("parameter checkpoints round-trip exactly") {
    Rng rng(9);
    const ModelParams params = init_params(NetHyper{7, 5, 3.0}, rng);
    const fs::path path = fs::temp_directory_path() / "crowdloc_test_params.bin";
    save_params(params, path);
    const ModelParams loaded = load_params(path);
    CHECK(loaded.hyper == params.hyper);
    REQUIRE(loaded.theta.size() == params.theta.size());
    for (std::size_t i = 0; i < params.theta.size(); ++i) CHECK(loaded.theta[i] == params.theta[i]);
    fs::remove(path);
}

TEST_CASE("corrupt parameter files are reported, not crashed on") {
    const fs::path path = fs::temp_directory_path() / "crowdloc_test_params_bad.bin";
    std::ofstream(path, std::ios::binary) << "CLPMgarbage";
    CHECK_THROWS_AS(static_cast<void>(load_params(path)), std::runtime_error);
    fs::remove(path);
}

}  // TEST_SUITE
