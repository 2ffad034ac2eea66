#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "crowdloc/consist.hpp"
#include "crowdloc/eval.hpp"
#include "crowdloc/loss.hpp"
#include "crowdloc/net.hpp"
#include "crowdloc/rng.hpp"
#include "crowdloc/synth.hpp"

namespace crowdloc {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    double lambda = 0.1;    // unlabeled loss weight
    double lambda1 = 0.5;   // negative classification weight
    double lambda2 = 2e-4;  // localization weight
    PAConfig pa{};          // k_aux = 4
    bool use_iuc = true;    // false: every pseudo-point weight forced to 1
    bool weight_loc_loss = false;
    double ema_decay = 0.99;
    AdamConfig optimizer{};
    NetHyper net{};
    int crop_size = 64;
    int batch_labeled = 4;
    int batch_unlabeled = 4;
    long steps = 2000;
    double flip_prob = 0.5;
    std::uint64_t seed = 1;
    double score_weight_mu = 0.05;  // cost-matrix score weight for training-time matching
    double pseudo_threshold = 0.5;
    long eval_every = 250;
    long checkpoint_every = 0;  // 0 = final checkpoint only
    std::vector<double> eval_sigmas{4.0, 8.0};
};

void validate(const TrainConfig& cfg);

/// Mutable training state; fully serializable, resume is bit-identical.
struct TrainerState {
    ModelParams student;
    ModelParams teacher;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    long step = 0;
    Rng rng;
    long clamp_count_total = 0;
    long aborted_steps = 0;
};

TrainerState init_trainer(const TrainConfig& cfg);

struct LossValues {
    double l_loc = 0.0;
    double l_cls = 0.0;
    double total = 0.0;
};

struct StepSummary {
    long step = 0;
    LossValues labeled;
    std::optional<LossValues> unlabeled;  // absent for supervised-only steps
    double combined_total = 0.0;
    long n_pseudo = 0;
    long clamp_count = 0;
    bool aborted = false;
};

/// One semi-supervised update: augment labeled scenes and apply the
/// supervised loss; let the teacher label the clean unlabeled views and the
/// student learn them on the flipped views; Adam step on the student; EMA
/// update of the teacher. A non-finite loss aborts the step and leaves the
/// state untouched.
StepSummary train_step(TrainerState& state, const std::vector<const Scene*>& labeled_batch,
                       const std::vector<const Scene*>& unlabeled_batch, const TrainConfig& cfg);

struct EvalRow {
    long step = 0;
    EvalResult result;
};

struct RunReport {
    TrainConfig config;
    long n_labeled = 0;
    long n_unlabeled = 0;
    long n_holdout = 0;
    std::vector<StepSummary> steps;
    std::vector<EvalRow> evals;      // teacher metrics on the holdout split
    std::string checkpoint_file;     // relative to the run directory
    std::string model_file;
};

/// Runs cfg.steps steps from the given state with deterministic batch
/// sampling. When out_dir is set, writes report.json, the final trainer
/// checkpoint and the teacher parameters there (plus periodic checkpoints if
/// configured); a partial report is flushed if a step throws.
RunReport run(const SynthDataset& data, const TrainConfig& cfg, TrainerState& state,
              const std::filesystem::path* out_dir = nullptr);

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path);
TrainerState load_checkpoint(const std::filesystem::path& path);

// augmentation primitives (exposed for tests)
Field crop_field(const Field& f, int x0, int y0, int size);
PointSet crop_points(const PointSet& pts, int x0, int y0, int size);
Field flip_field(const Field& f);
Point2D flip_point(const Point2D& p, int width);

}  // namespace crowdloc
