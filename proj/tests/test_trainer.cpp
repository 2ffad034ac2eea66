#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "crowdloc/serialize.hpp"
#include "crowdloc/trainer.hpp"
#include "oracle.hpp"

using namespace crowdloc;
namespace fs = std::filesystem;

namespace {

SynthConfig tiny_synth(std::uint64_t seed = 42) {
    SynthConfig cfg;
    cfg.field_size = 32;
    cfg.n_scenes = 10;
    cfg.heads_per_scene = {2, 6};
    cfg.labeled_ratio = 0.2;
    cfg.seed = seed;
    return cfg;
}

TrainConfig tiny_train(long steps = 5) {
    TrainConfig cfg;
    cfg.net = NetHyper{5, 6, 4.0};
    cfg.crop_size = 24;
    cfg.batch_labeled = 2;
    cfg.batch_unlabeled = 2;
    cfg.steps = steps;
    cfg.eval_every = 4;
    cfg.seed = 3;
    return cfg;
}

std::vector<const Scene*> ptrs(const std::vector<Scene>& scenes, std::initializer_list<int> idx) {
    std::vector<const Scene*> out;
    for (int i : idx) out.push_back(&scenes[i]);
    return out;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("augmentation primitives") {
    Field f = make_field(4, 6);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 6; ++c) f.at(r, c) = static_cast<float>(10 * r + c);

    SUBCASE("crop copies the window") {
        const Field crop = crop_field(f, 2, 1, 2);
        CHECK(crop.at(0, 0) == 12.0f);
        CHECK(crop.at(1, 1) == 23.0f);
        CHECK_THROWS_AS(crop_field(f, 5, 0, 2), std::invalid_argument);
    }
    SUBCASE("point crop keeps and shifts only interior points") {
        const PointSet pts{{2.5, 2.5}, {0.5, 0.5}, {3.9, 3.9}};
        const PointSet cropped = crop_points(pts, 2, 2, 2);
        REQUIRE(cropped.size() == 2);
        CHECK(cropped[0].x == 0.5);
        CHECK(cropped[1].y == doctest::Approx(1.9));
    }
    SUBCASE("flip mirrors columns and points consistently") {
        const Field flipped = flip_field(f);
        CHECK(flipped.at(0, 0) == 5.0f);
        CHECK(flipped.at(2, 5) == 20.0f);
        const Point2D p = flip_point({1.25, 3.0}, 6);
        CHECK(p.x == 3.75);
        CHECK(p.y == 3.0);
        // pixel-center alignment: a point at column c maps onto column w-1-c
        const Point2D q = flip_point({5.0, 0.0}, 6);
        CHECK(q.x == 0.0);
    }
}

TEST_CASE("ema decay one freezes the teacher") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(1);
    cfg.ema_decay = 1.0;
    TrainerState state = init_trainer(cfg);
    const std::vector<double> teacher0 = state.teacher.theta;
    train_step(state, ptrs(data.labeled, {0, 1}), ptrs(data.unlabeled, {0, 1}), cfg);
    CHECK(state.teacher.theta == teacher0);
    CHECK(state.student.theta != teacher0);  // student did move
}

TEST_CASE("one ema step moves a zero teacher toward a unit student by 1 - alpha") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(1);
    cfg.optimizer.learning_rate = 1e-300;  // freezes the student in double precision
    TrainerState state = init_trainer(cfg);
    std::fill(state.student.theta.begin(), state.student.theta.end(), 1.0);
    std::fill(state.teacher.theta.begin(), state.teacher.theta.end(), 0.0);
    train_step(state, ptrs(data.labeled, {0}), {}, cfg);
    // 1 - 0.99 is not an exact double, so the comparison carries an ulp of slack
    for (double t : state.teacher.theta) CHECK(t == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("ema follows the closed form over a thousand steps") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(1000);
    cfg.optimizer.learning_rate = 1e-300;
    cfg.batch_labeled = 1;
    cfg.batch_unlabeled = 0;
    TrainerState state = init_trainer(cfg);
    const std::vector<double> s = state.student.theta;  // constant under the frozen learning rate
    Rng perturb(77);
    for (double& t : state.teacher.theta) t = perturb.uniform(-1.0, 1.0);
    const std::vector<double> t0 = state.teacher.theta;

    const int n = 1000;
    for (int i = 0; i < n; ++i) train_step(state, ptrs(data.labeled, {0}), {}, cfg);

    const double alpha_n = std::pow(cfg.ema_decay, n);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double expected = s[i] + (t0[i] - s[i]) * alpha_n;
        CHECK(std::abs(state.teacher.theta[i] - expected) <= 1e-12);
    }
}

TEST_CASE("with lambda 0 and no unlabeled batch the update equals a hand-built supervised step") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(1);
    cfg.lambda = 0.0;
    cfg.batch_labeled = 1;
    cfg.batch_unlabeled = 0;

    TrainerState state = init_trainer(cfg);
    const ModelParams student0 = state.student;
    Rng replay = state.rng;  // replicate the augmentation draws

    train_step(state, ptrs(data.labeled, {1}), {}, cfg);

    // reference: same crop/flip, forward, match, loss, backward, adam
    const Scene& scene = data.labeled[1];
    const int x0 = replay.uniform_int(0, scene.field.width - cfg.crop_size);
    const int y0 = replay.uniform_int(0, scene.field.height - cfg.crop_size);
    const bool flip = replay.bernoulli(cfg.flip_prob);
    Field field = crop_field(scene.field, x0, y0, cfg.crop_size);
    PointSet targets = crop_points(*scene.gt_points, x0, y0, cfg.crop_size);
    if (flip) {
        field = flip_field(field);
        for (Point2D& p : targets) p = flip_point(p, cfg.crop_size);
    }
    ForwardCache cache;
    const ProposalSet props = forward(student0, field, &cache);
    const MatchResult match = hungarian_match(build_cost_matrix(targets, props, cfg.score_weight_mu));
    const LossBreakdown bd = labeled_loss(targets, props, match, cfg.lambda1, cfg.lambda2);
    std::vector<double> g = backward(cache, bd.pos_grads, bd.score_grads);
    for (double& v : g) v *= 1.0;  // batch of one

    ModelParams expected = student0;
    std::vector<double> m(g.size(), 0.0), v(g.size(), 0.0);
    const AdamConfig& opt = cfg.optimizer;
    for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
        v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
        const double mhat = m[i] / (1.0 - opt.beta1);
        const double vhat = v[i] / (1.0 - opt.beta2);
        expected.theta[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.eps);
    }
    CHECK(state.student.theta == expected.theta);
}

TEST_CASE("matching commutes with a horizontal flip of both point sets") {
    ProposalSet props;
    props.grid_meta = make_grid(8, 40, 8.0);
    props.proposals = {{Point2D{3.0, 2.0}, 0.7, 0},
                       {Point2D{11.0, 4.0}, 0.6, 1},
                       {Point2D{22.0, 1.0}, 0.9, 2},
                       {Point2D{31.0, 6.0}, 0.2, 3},
                       {Point2D{38.5, 3.0}, 0.5, 4}};
    const PointSet targets{{4.0, 2.5}, {21.0, 1.5}, {37.0, 3.5}};
    const int width = 40;

    const MatchResult base = hungarian_match(build_cost_matrix(targets, props, 0.05));

    ProposalSet flipped = props;
    for (auto& p : flipped.proposals) p.position = flip_point(p.position, width);
    PointSet flipped_targets = targets;
    for (auto& t : flipped_targets) t = flip_point(t, width);
    const MatchResult after = hungarian_match(build_cost_matrix(flipped_targets, flipped, 0.05));

    CHECK(after.assignment == base.assignment);
    CHECK(after.total_cost == doctest::Approx(base.total_cost).epsilon(1e-12));
}

TEST_CASE("teacher is untouched by the optimizer, only by ema") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(3);
    cfg.ema_decay = 0.5;
    TrainerState state = init_trainer(cfg);
    for (int i = 0; i < 3; ++i) {
        const std::vector<double> teacher_before = state.teacher.theta;
        const std::vector<double> student_before = state.student.theta;
        train_step(state, ptrs(data.labeled, {0, 1}), ptrs(data.unlabeled, {0}), cfg);
        for (std::size_t k = 0; k < teacher_before.size(); ++k) {
            const double expected = 0.5 * teacher_before[k] + 0.5 * state.student.theta[k];
            CHECK(state.teacher.theta[k] == doctest::Approx(expected).epsilon(1e-15));
        }
        (void)student_before;
    }
}

TEST_CASE("full runs are deterministic given the seed") {
    const SynthDataset data = generate_dataset(tiny_synth());
    const TrainConfig cfg = tiny_train(6);
    TrainerState s1 = init_trainer(cfg);
    TrainerState s2 = init_trainer(cfg);
    const RunReport r1 = run(data, cfg, s1);
    const RunReport r2 = run(data, cfg, s2);
    CHECK(s1.student.theta == s2.student.theta);
    CHECK(s1.teacher.theta == s2.teacher.theta);
    CHECK(nlohmann::json(r1).dump() == nlohmann::json(r2).dump());
}

TEST_CASE("steps = 0 gives a report with only the initial evaluation") {
    const SynthDataset data = generate_dataset(tiny_synth());
    const TrainConfig cfg = tiny_train(0);
    TrainerState state = init_trainer(cfg);
    const RunReport report = run(data, cfg, state);
    CHECK(report.steps.empty());
    REQUIRE(report.evals.size() == 1);
    CHECK(report.evals[0].step == 0);
}

TEST_CASE("checkpoints round-trip every piece of state") {
    const SynthDataset data = generate_dataset(tiny_synth());
    const TrainConfig cfg = tiny_train(4);
    TrainerState state = init_trainer(cfg);
    run(data, cfg, state);

    const fs::path path = fs::temp_directory_path() / "crowdloc_test_ckpt.bin";
    save_checkpoint(state, path);
    const TrainerState loaded = load_checkpoint(path);
    CHECK(loaded.step == state.step);
    CHECK(loaded.student.theta == state.student.theta);
    CHECK(loaded.teacher.theta == state.teacher.theta);
    CHECK(loaded.adam_m == state.adam_m);
    CHECK(loaded.adam_v == state.adam_v);
    CHECK(loaded.rng == state.rng);
    CHECK(loaded.clamp_count_total == state.clamp_count_total);
    fs::remove(path);
}

TEST_CASE("resuming from a checkpoint continues bit-identically") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(12);

    TrainerState full = init_trainer(cfg);
    run(data, cfg, full);

    TrainConfig half = cfg;
    half.steps = 6;
    TrainerState resumed = init_trainer(cfg);
    run(data, half, resumed);
    const fs::path path = fs::temp_directory_path() / "crowdloc_test_resume.bin";
    save_checkpoint(resumed, path);
    TrainerState reloaded = load_checkpoint(path);
    run(data, cfg, reloaded);  // continues 6..12

    CHECK(reloaded.student.theta == full.student.theta);
    CHECK(reloaded.teacher.theta == full.teacher.theta);
    CHECK(reloaded.adam_m == full.adam_m);
    CHECK(reloaded.rng == full.rng);
    fs::remove(path);
}

TEST_CASE("corrupted checkpoints are load errors, not crashes") {
    const fs::path path = fs::temp_directory_path() / "crowdloc_test_ckpt_bad.bin";
    std::ofstream(path, std::ios::binary) << "CLCK and then nothing useful";
    CHECK_THROWS_AS(static_cast<void>(load_checkpoint(path)), std::runtime_error);
    fs::remove(path);

    CHECK_THROWS_AS(static_cast<void>(load_checkpoint(fs::temp_directory_path() / "missing.ckpt")),
                    std::runtime_error);
}

TEST_CASE("a non-finite loss aborts the step and leaves the state untouched") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(1);
    TrainerState state = init_trainer(cfg);
    state.student.theta[param_count(cfg.net) - 3] = 1e200;  // offset-x output weight blows up l_loc

    const TrainerState before = state;
    const StepSummary summary = train_step(state, ptrs(data.labeled, {0}), {}, cfg);
    CHECK(summary.aborted);
    CHECK(state.step == before.step);
    CHECK(state.student.theta == before.student.theta);
    CHECK(state.rng == before.rng);
    CHECK(state.aborted_steps == before.aborted_steps + 1);
}

TEST_CASE("run propagates the abort as a numeric error and flushes a partial report") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(5);
    TrainerState state = init_trainer(cfg);
    state.student.theta[param_count(cfg.net) - 3] = 1e200;

    const fs::path dir = fs::temp_directory_path() / "crowdloc_test_abort_run";
    fs::create_directories(dir);
    CHECK_THROWS_AS(run(data, cfg, state, &dir), NumericError);
    CHECK(fs::exists(dir / "report.json"));
    fs::remove_all(dir);
}

TEST_CASE("unlabeled scenes with zero pseudo-points still contribute the negative term") {
    const SynthDataset data = generate_dataset(tiny_synth());
    TrainConfig cfg = tiny_train(1);
    TrainerState state = init_trainer(cfg);
    // strongly negative scores everywhere: teacher classifies nothing as a head
    std::fill(state.teacher.theta.begin(), state.teacher.theta.end(), 0.0);
    state.teacher.theta[param_count(cfg.net) - 1] = -8.0;  // logit bias
    const StepSummary summary = train_step(state, ptrs(data.labeled, {0}), ptrs(data.unlabeled, {0}), cfg);
    CHECK(summary.n_pseudo == 0);
    REQUIRE(summary.unlabeled.has_value());
    CHECK(summary.unlabeled->l_loc == 0.0);
    CHECK(summary.unlabeled->l_cls > 0.0);
}

}  // TEST_SUITE
