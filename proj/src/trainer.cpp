#include "crowdloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "crowdloc/serialize.hpp"

namespace crowdloc {

void validate(const TrainConfig& cfg) {
    if (cfg.lambda < 0.0) throw std::invalid_argument("train config: lambda must be >= 0");
    if (cfg.lambda1 < 0.0) throw std::invalid_argument("train config: lambda1 must be >= 0");
    if (cfg.lambda2 < 0.0) throw std::invalid_argument("train config: lambda2 must be >= 0");
    validate(cfg.pa);
    if (!(cfg.ema_decay >= 0.0 && cfg.ema_decay <= 1.0))
        throw std::invalid_argument("train config: ema_decay must be in [0, 1]");
    if (!(cfg.optimizer.learning_rate > 0.0))
        throw std::invalid_argument("train config: learning_rate must be positive");
    if (cfg.crop_size < cfg.net.patch_size)
        throw std::invalid_argument("train config: crop_size smaller than the model patch");
    if (cfg.batch_labeled < 1) throw std::invalid_argument("train config: batch_labeled must be >= 1");
    if (cfg.batch_unlabeled < 0) throw std::invalid_argument("train config: batch_unlabeled must be >= 0");
    if (cfg.steps < 0) throw std::invalid_argument("train config: steps must be >= 0");
    if (!(cfg.flip_prob >= 0.0 && cfg.flip_prob <= 1.0))
        throw std::invalid_argument("train config: flip_prob must be in [0, 1]");
    if (cfg.score_weight_mu < 0.0) throw std::invalid_argument("train config: score_weight_mu must be >= 0");
    if (!(cfg.pseudo_threshold >= 0.0 && cfg.pseudo_threshold <= 1.0))
        throw std::invalid_argument("train config: pseudo_threshold must be in [0, 1]");
    if (cfg.eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
    if (cfg.checkpoint_every < 0) throw std::invalid_argument("train config: checkpoint_every must be >= 0");
    for (double s : cfg.eval_sigmas)
        if (!(s > 0.0)) throw std::invalid_argument("train config: eval sigmas must be positive");
}

TrainerState init_trainer(const TrainConfig& cfg) {
    validate(cfg);
    TrainerState state;
    state.rng = Rng(cfg.seed);
    state.student = init_params(cfg.net, state.rng);
    state.teacher = state.student;
    state.adam_m.assign(state.student.theta.size(), 0.0);
    state.adam_v.assign(state.student.theta.size(), 0.0);
    return state;
}

Field crop_field(const Field& f, int x0, int y0, int size) {
    if (x0 < 0 || y0 < 0 || x0 + size > f.width || y0 + size > f.height)
        throw std::invalid_argument("crop: window outside the field");
    Field out = make_field(size, size);
    for (int r = 0; r < size; ++r)
        std::memcpy(&out.at(r, 0), f.values.data() + static_cast<std::size_t>(y0 + r) * f.width + x0,
                    static_cast<std::size_t>(size) * sizeof(float));
    return out;
}

PointSet crop_points(const PointSet& pts, int x0, int y0, int size) {
    PointSet out;
    for (const Point2D& p : pts) {
        const double x = p.x - x0;
        const double y = p.y - y0;
        if (x >= 0.0 && x < size && y >= 0.0 && y < size) out.push_back(Point2D{x, y});
    }
    return out;
}

Field flip_field(const Field& f) {
    Field out = make_field(f.height, f.width);
    for (int r = 0; r < f.height; ++r)
        for (int c = 0; c < f.width; ++c) out.at(r, c) = f.at(r, f.width - 1 - c);
    return out;
}

Point2D flip_point(const Point2D& p, int width) { return Point2D{(width - 1) - p.x, p.y}; }

namespace {

struct View {
    Field field;
    PointSet points;  // ground truth inside the crop (labeled scenes only)
    bool flipped = false;
};

View sample_view(Rng& rng, const Scene& scene, const TrainConfig& cfg) {
    const Field& f = scene.field;
    if (f.width < cfg.crop_size || f.height < cfg.crop_size)
        throw std::invalid_argument("train: scene '" + scene.scene_id + "' smaller than crop_size");
    // fixed draw count per view keeps the stream layout stable
    const int x0 = rng.uniform_int(0, f.width - cfg.crop_size);
    const int y0 = rng.uniform_int(0, f.height - cfg.crop_size);
    const bool flip = rng.bernoulli(cfg.flip_prob);

    View v;
    v.field = crop_field(f, x0, y0, cfg.crop_size);
    if (scene.is_labeled) {
        if (!scene.gt_points)
            throw std::invalid_argument("train: labeled scene '" + scene.scene_id + "' lacks ground truth");
        v.points = crop_points(*scene.gt_points, x0, y0, cfg.crop_size);
    }
    v.flipped = flip;
    return v;
}

MatchResult match_targets(const PointSet& targets, const ProposalSet& props, double mu) {
    return hungarian_match(build_cost_matrix(targets, props, mu));
}

void axpy(std::vector<double>& acc, double scale, const std::vector<double>& g) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * g[i];
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

StepSummary train_step(TrainerState& state, const std::vector<const Scene*>& labeled_batch,
                       const std::vector<const Scene*>& unlabeled_batch, const TrainConfig& cfg) {
    if (labeled_batch.empty()) throw std::invalid_argument("train_step: labeled batch is empty");

    const Rng rng_snapshot = state.rng;  // restored on abort

    // all augmentation randomness is drawn before any model work
    std::vector<View> labeled_views;
    labeled_views.reserve(labeled_batch.size());
    for (const Scene* s : labeled_batch) labeled_views.push_back(sample_view(state.rng, *s, cfg));
    std::vector<View> unlabeled_views;
    unlabeled_views.reserve(unlabeled_batch.size());
    for (const Scene* s : unlabeled_batch) unlabeled_views.push_back(sample_view(state.rng, *s, cfg));

    StepSummary summary;
    summary.step = state.step + 1;

    std::vector<double> grad(state.student.theta.size(), 0.0);
    const double inv_bl = 1.0 / static_cast<double>(labeled_views.size());

    for (const View& view : labeled_views) {
        const Field& field = view.flipped ? flip_field(view.field) : view.field;
        PointSet targets = view.points;
        if (view.flipped)
            for (Point2D& p : targets) p = flip_point(p, cfg.crop_size);

        ForwardCache cache;
        const ProposalSet props = forward(state.student, field, &cache);
        const MatchResult match = match_targets(targets, props, cfg.score_weight_mu);
        const LossBreakdown bd = labeled_loss(targets, props, match, cfg.lambda1, cfg.lambda2);

        summary.labeled.l_loc += inv_bl * bd.l_loc;
        summary.labeled.l_cls += inv_bl * bd.l_cls;
        summary.labeled.total += inv_bl * bd.total;
        summary.clamp_count += bd.clamp_count;
        axpy(grad, inv_bl, backward(cache, bd.pos_grads, bd.score_grads));
    }

    if (!unlabeled_views.empty()) {
        LossValues unlabeled;
        const double inv_bu = 1.0 / static_cast<double>(unlabeled_views.size());
        for (const View& view : unlabeled_views) {
            // teacher annotates the clean view
            const ProposalSet teacher_props = forward(state.teacher, view.field);
            ConsistentPseudoLabels pseudo = build_consistent_labels(teacher_props, cfg.pa);
            if (!cfg.use_iuc) std::fill(pseudo.weights.begin(), pseudo.weights.end(), 1.0);
            summary.n_pseudo += static_cast<long>(pseudo.size());

            // student learns the same content on the (possibly flipped) view
            const Field& student_field = view.flipped ? flip_field(view.field) : view.field;
            if (view.flipped)
                for (Point2D& p : pseudo.points) p = flip_point(p, cfg.crop_size);

            ForwardCache cache;
            const ProposalSet props = forward(state.student, student_field, &cache);
            const MatchResult match = match_targets(pseudo.points, props, cfg.score_weight_mu);
            const LossBreakdown bd =
                unlabeled_loss(pseudo, props, match, cfg.lambda1, cfg.lambda2, cfg.weight_loc_loss);

            unlabeled.l_loc += inv_bu * bd.l_loc;
            unlabeled.l_cls += inv_bu * bd.l_cls;
            unlabeled.total += inv_bu * bd.total;
            summary.clamp_count += bd.clamp_count;
            axpy(grad, cfg.lambda * inv_bu, backward(cache, bd.pos_grads, bd.score_grads));
        }
        summary.unlabeled = unlabeled;
        summary.combined_total = summary.labeled.total + cfg.lambda * unlabeled.total;
    } else {
        summary.combined_total = summary.labeled.total;
    }

    if (!std::isfinite(summary.combined_total) || !all_finite(grad)) {
        state.rng = rng_snapshot;
        ++state.aborted_steps;
        summary.aborted = true;
        return summary;
    }

    // Adam on the student only
    const AdamConfig& opt = cfg.optimizer;
    const double t = static_cast<double>(state.step + 1);
    const double bc1 = 1.0 - std::pow(opt.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.beta2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        state.adam_m[i] = opt.beta1 * state.adam_m[i] + (1.0 - opt.beta1) * grad[i];
        state.adam_v[i] = opt.beta2 * state.adam_v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        const double mhat = state.adam_m[i] / bc1;
        const double vhat = state.adam_v[i] / bc2;
        state.student.theta[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.eps);
    }

    // EMA teacher update
    const double a = cfg.ema_decay;
    for (std::size_t i = 0; i < grad.size(); ++i)
        state.teacher.theta[i] = a * state.teacher.theta[i] + (1.0 - a) * state.student.theta[i];

    state.clamp_count_total += summary.clamp_count;
    ++state.step;
    return summary;
}

namespace {

void write_report(const RunReport& report, const std::filesystem::path& dir) {
    nlohmann::json j = report;
    std::ofstream os(dir / "report.json", std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("run: cannot write report in '" + dir.string() + "'");
    os << j.dump(2) << '\n';
}

}  // namespace

RunReport run(const SynthDataset& data, const TrainConfig& cfg, TrainerState& state,
              const std::filesystem::path* out_dir) {
    validate(cfg);
    if (data.labeled.empty()) throw std::invalid_argument("run: dataset has no labeled scenes");
    if (state.student.theta.size() != param_count(cfg.net))
        throw std::invalid_argument("run: trainer state does not match the configured net");

    RunReport report;
    report.config = cfg;
    report.n_labeled = static_cast<long>(data.labeled.size());
    report.n_unlabeled = static_cast<long>(data.unlabeled.size());
    report.n_holdout = static_cast<long>(data.holdout.size());
    report.checkpoint_file = "final.ckpt";
    report.model_file = "model.params";

    const bool use_unlabeled = cfg.batch_unlabeled > 0 && !data.unlabeled.empty();
    const bool can_eval = !data.holdout.empty() && !cfg.eval_sigmas.empty();

    auto eval_holdout = [&](long step) {
        if (!can_eval) return;
        if (!report.evals.empty() && report.evals.back().step == step) return;
        EvalRow row;
        row.step = step;
        row.result = evaluate_scenes(state.teacher, data.holdout, cfg.eval_sigmas);
        report.evals.push_back(std::move(row));
    };

    if (state.step == 0) eval_holdout(0);

    try {
        while (state.step < cfg.steps) {
            std::vector<const Scene*> labeled_batch(cfg.batch_labeled);
            for (auto& s : labeled_batch)
                s = &data.labeled[state.rng.uniform_int(0, static_cast<int>(data.labeled.size()) - 1)];
            std::vector<const Scene*> unlabeled_batch;
            if (use_unlabeled) {
                unlabeled_batch.resize(cfg.batch_unlabeled);
                for (auto& s : unlabeled_batch)
                    s = &data.unlabeled[state.rng.uniform_int(0, static_cast<int>(data.unlabeled.size()) - 1)];
            }

            StepSummary summary = train_step(state, labeled_batch, unlabeled_batch, cfg);
            const long done = summary.step;
            report.steps.push_back(std::move(summary));
            if (report.steps.back().aborted)
                throw NumericError("run: non-finite loss at step " + std::to_string(done));

            if (done % cfg.eval_every == 0 && done < cfg.steps) eval_holdout(done);
            if (out_dir && cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.steps) {
                char name[32];
                std::snprintf(name, sizeof(name), "step_%06ld.ckpt", done);
                save_checkpoint(state, *out_dir / name);
            }
        }
    } catch (...) {
        if (out_dir) write_report(report, *out_dir);  // flush what we have
        throw;
    }

    eval_holdout(state.step);

    if (out_dir) {
        save_checkpoint(state, *out_dir / report.checkpoint_file);
        save_params(state.teacher, *out_dir / report.model_file);
        write_report(report, *out_dir);
    }
    return report;
}

namespace {
constexpr char kCkptMagic[4] = {'C', 'L', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot write '" + path.string() + "'");
    auto put = [&os](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    auto put_vec = [&os](const std::vector<double>& v) {
        os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    os.write(kCkptMagic, 4);
    put(kCkptVersion);
    put(static_cast<std::int32_t>(state.student.hyper.patch_size));
    put(static_cast<std::int32_t>(state.student.hyper.hidden_width));
    put(state.student.hyper.stride);
    put(static_cast<std::uint64_t>(state.student.theta.size()));
    put(static_cast<std::int64_t>(state.step));
    put_vec(state.student.theta);
    put_vec(state.teacher.theta);
    put_vec(state.adam_m);
    put_vec(state.adam_v);
    const std::string rng = state.rng.serialize();
    put(static_cast<std::uint32_t>(rng.size()));
    os.write(rng.data(), static_cast<std::streamsize>(rng.size()));
    put(static_cast<std::int64_t>(state.clamp_count_total));
    put(static_cast<std::int64_t>(state.aborted_steps));
    if (!os) throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
}

TrainerState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "'");
    auto get = [&is, &path](auto& v, const char* what) {
        is.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!is) throw std::runtime_error("checkpoint: '" + path.string() + "' truncated at " + what);
    };
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw std::runtime_error("checkpoint: '" + path.string() + "' is not a trainer checkpoint");
    std::uint32_t version;
    get(version, "version");
    if (version != kCkptVersion)
        throw std::runtime_error("checkpoint: '" + path.string() + "' has version " +
                                 std::to_string(version) + ", expected " + std::to_string(kCkptVersion));

    TrainerState state;
    std::int32_t p, h;
    get(p, "patch_size");
    get(h, "hidden_width");
    double stride;
    get(stride, "stride");
    state.student.hyper = NetHyper{p, h, stride};
    state.teacher.hyper = state.student.hyper;
    std::uint64_t n;
    get(n, "parameter count");
    if (n != param_count(state.student.hyper))
        throw std::runtime_error("checkpoint: '" + path.string() + "' parameter count does not match header");
    std::int64_t step;
    get(step, "step");
    state.step = step;
    auto get_vec = [&is, &path](std::vector<double>& v, std::uint64_t count, const char* what) {
        v.resize(count);
        is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: '" + path.string() + "' truncated in " + what);
    };
    get_vec(state.student.theta, n, "student parameters");
    get_vec(state.teacher.theta, n, "teacher parameters");
    get_vec(state.adam_m, n, "optimizer first moment");
    get_vec(state.adam_v, n, "optimizer second moment");
    std::uint32_t rng_len;
    get(rng_len, "rng state length");
    std::string rng_text(rng_len, '\0');
    is.read(rng_text.data(), rng_len);
    if (!is) throw std::runtime_error("checkpoint: '" + path.string() + "' truncated in rng state");
    state.rng = Rng::deserialize(rng_text);
    std::int64_t clamp, aborted;
    get(clamp, "clamp counter");
    get(aborted, "abort counter");
    state.clamp_count_total = clamp;
    state.aborted_steps = aborted;
    return state;
}

}  // namespace crowdloc
