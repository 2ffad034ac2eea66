#include "crowdloc/serialize.hpp"

#include <set>
#include <string>

namespace crowdloc {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const char* what) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key))
            throw std::invalid_argument(std::string(what) + ": unknown key '" + key + "'");
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (const auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace

void to_json(nlohmann::json& j, const IntRange& r) { j = nlohmann::json{r.lo, r.hi}; }

void from_json(const nlohmann::json& j, IntRange& r) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("range: expected [lo, hi]");
    j.at(0).get_to(r.lo);
    j.at(1).get_to(r.hi);
}

void to_json(nlohmann::json& j, const SynthConfig& cfg) {
    j = nlohmann::json{{"field_size", cfg.field_size},
                       {"n_scenes", cfg.n_scenes},
                       {"heads_per_scene", cfg.heads_per_scene},
                       {"cluster_count", cfg.cluster_count},
                       {"cluster_spread", cfg.cluster_spread},
                       {"blob_sigma", cfg.blob_sigma},
                       {"amplitude_min", cfg.amplitude_min},
                       {"amplitude_max", cfg.amplitude_max},
                       {"ambiguous_fraction", cfg.ambiguous_fraction},
                       {"ambiguous_amplitude_scale", cfg.ambiguous_amplitude_scale},
                       {"noise_std", cfg.noise_std},
                       {"seed", cfg.seed},
                       {"labeled_ratio", cfg.labeled_ratio},
                       {"holdout_fraction", cfg.holdout_fraction}};
}

void from_json(const nlohmann::json& j, SynthConfig& cfg) {
    reject_unknown_keys(j,
                        {"field_size", "n_scenes", "heads_per_scene", "cluster_count", "cluster_spread",
                         "blob_sigma", "amplitude_min", "amplitude_max", "ambiguous_fraction",
                         "ambiguous_amplitude_scale", "noise_std", "seed", "labeled_ratio",
                         "holdout_fraction"},
                        "synth config");
    maybe(j, "field_size", cfg.field_size);
    maybe(j, "n_scenes", cfg.n_scenes);
    maybe(j, "heads_per_scene", cfg.heads_per_scene);
    maybe(j, "cluster_count", cfg.cluster_count);
    maybe(j, "cluster_spread", cfg.cluster_spread);
    maybe(j, "blob_sigma", cfg.blob_sigma);
    maybe(j, "amplitude_min", cfg.amplitude_min);
    maybe(j, "amplitude_max", cfg.amplitude_max);
    maybe(j, "ambiguous_fraction", cfg.ambiguous_fraction);
    maybe(j, "ambiguous_amplitude_scale", cfg.ambiguous_amplitude_scale);
    maybe(j, "noise_std", cfg.noise_std);
    maybe(j, "seed", cfg.seed);
    maybe(j, "labeled_ratio", cfg.labeled_ratio);
    maybe(j, "holdout_fraction", cfg.holdout_fraction);
}

void to_json(nlohmann::json& j, const AdamConfig& cfg) {
    j = nlohmann::json{{"learning_rate", cfg.learning_rate},
                       {"beta1", cfg.beta1},
                       {"beta2", cfg.beta2},
                       {"eps", cfg.eps}};
}

void from_json(const nlohmann::json& j, AdamConfig& cfg) {
    reject_unknown_keys(j, {"learning_rate", "beta1", "beta2", "eps"}, "optimizer config");
    maybe(j, "learning_rate", cfg.learning_rate);
    maybe(j, "beta1", cfg.beta1);
    maybe(j, "beta2", cfg.beta2);
    maybe(j, "eps", cfg.eps);
}

void to_json(nlohmann::json& j, const PAConfig& cfg) {
    j = nlohmann::json{{"k_aux", cfg.k_aux}, {"include_self", cfg.include_self}};
}

void from_json(const nlohmann::json& j, PAConfig& cfg) {
    reject_unknown_keys(j, {"k_aux", "include_self"}, "pa config");
    maybe(j, "k_aux", cfg.k_aux);
    maybe(j, "include_self", cfg.include_self);
}

void to_json(nlohmann::json& j, const NetHyper& h) {
    j = nlohmann::json{{"patch_size", h.patch_size}, {"hidden_width", h.hidden_width}, {"stride", h.stride}};
}

void from_json(const nlohmann::json& j, NetHyper& h) {
    reject_unknown_keys(j, {"patch_size", "hidden_width", "stride"}, "net config");
    maybe(j, "patch_size", h.patch_size);
    maybe(j, "hidden_width", h.hidden_width);
    maybe(j, "stride", h.stride);
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
    j = nlohmann::json{{"lambda", cfg.lambda},
                       {"lambda1", cfg.lambda1},
                       {"lambda2", cfg.lambda2},
                       {"pa", cfg.pa},
                       {"use_iuc", cfg.use_iuc},
                       {"weight_loc_loss", cfg.weight_loc_loss},
                       {"ema_decay", cfg.ema_decay},
                       {"optimizer", cfg.optimizer},
                       {"net", cfg.net},
                       {"crop_size", cfg.crop_size},
                       {"batch_labeled", cfg.batch_labeled},
                       {"batch_unlabeled", cfg.batch_unlabeled},
                       {"steps", cfg.steps},
                       {"flip_prob", cfg.flip_prob},
                       {"seed", cfg.seed},
                       {"score_weight_mu", cfg.score_weight_mu},
                       {"pseudo_threshold", cfg.pseudo_threshold},
                       {"eval_every", cfg.eval_every},
                       {"checkpoint_every", cfg.checkpoint_every},
                       {"eval_sigmas", cfg.eval_sigmas}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
    reject_unknown_keys(j,
                        {"lambda", "lambda1", "lambda2", "pa", "use_iuc", "weight_loc_loss", "ema_decay",
                         "optimizer", "net", "crop_size", "batch_labeled", "batch_unlabeled", "steps",
                         "flip_prob", "seed", "score_weight_mu", "pseudo_threshold", "eval_every",
                         "checkpoint_every", "eval_sigmas"},
                        "train config");
    maybe(j, "lambda", cfg.lambda);
    maybe(j, "lambda1", cfg.lambda1);
    maybe(j, "lambda2", cfg.lambda2);
    maybe(j, "pa", cfg.pa);
    maybe(j, "use_iuc", cfg.use_iuc);
    maybe(j, "weight_loc_loss", cfg.weight_loc_loss);
    maybe(j, "ema_decay", cfg.ema_decay);
    maybe(j, "optimizer", cfg.optimizer);
    maybe(j, "net", cfg.net);
    maybe(j, "crop_size", cfg.crop_size);
    maybe(j, "batch_labeled", cfg.batch_labeled);
    maybe(j, "batch_unlabeled", cfg.batch_unlabeled);
    maybe(j, "steps", cfg.steps);
    maybe(j, "flip_prob", cfg.flip_prob);
    maybe(j, "seed", cfg.seed);
    maybe(j, "score_weight_mu", cfg.score_weight_mu);
    maybe(j, "pseudo_threshold", cfg.pseudo_threshold);
    maybe(j, "eval_every", cfg.eval_every);
    maybe(j, "checkpoint_every", cfg.checkpoint_every);
    maybe(j, "eval_sigmas", cfg.eval_sigmas);
}

void to_json(nlohmann::json& j, const LocalizationReport& r) {
    j = nlohmann::json{{"sigma", r.sigma}, {"tp", r.tp},           {"fp", r.fp},
                       {"fn", r.fn},       {"precision", r.precision}, {"recall", r.recall},
                       {"f1", r.f1}};
}

void to_json(nlohmann::json& j, const CountingReport& r) {
    j = nlohmann::json{{"mae", r.mae}, {"mse", r.mse}, {"n_images", r.n_images}};
}

void to_json(nlohmann::json& j, const EvalResult& r) {
    j = nlohmann::json{{"localization", r.localization}, {"counting", r.counting}};
}

void to_json(nlohmann::json& j, const LossValues& v) {
    j = nlohmann::json{{"l_loc", v.l_loc}, {"l_cls", v.l_cls}, {"total", v.total}};
}

void to_json(nlohmann::json& j, const StepSummary& s) {
    j = nlohmann::json{{"step", s.step},
                       {"labeled", s.labeled},
                       {"combined_total", s.combined_total},
                       {"n_pseudo", s.n_pseudo},
                       {"clamp_count", s.clamp_count},
                       {"aborted", s.aborted}};
    if (s.unlabeled) {
        j["unlabeled"] = *s.unlabeled;
    } else {
        j["unlabeled"] = nullptr;
    }
}

void to_json(nlohmann::json& j, const EvalRow& row) {
    j = nlohmann::json{{"step", row.step}, {"result", row.result}};
}

void to_json(nlohmann::json& j, const RunReport& report) {
    j = nlohmann::json{{"format_version", 1},
                       {"config", report.config},
                       {"dataset",
                        {{"n_labeled", report.n_labeled},
                         {"n_unlabeled", report.n_unlabeled},
                         {"n_holdout", report.n_holdout}}},
                       {"steps", report.steps},
                       {"evals", report.evals},
                       {"checkpoint", report.checkpoint_file},
                       {"model", report.model_file}};
}

}  // namespace crowdloc
