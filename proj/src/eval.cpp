#include "crowdloc/eval.hpp"

#include <stdexcept>

namespace crowdloc {

EvalResult evaluate_scenes(const ModelParams& params, const std::vector<Scene>& scenes,
                           const std::vector<double>& sigmas, double score_threshold) {
    if (scenes.empty()) throw std::invalid_argument("evaluate: no scenes");

    std::vector<long> tp(sigmas.size(), 0), fp(sigmas.size(), 0), fn(sigmas.size(), 0);
    std::vector<std::pair<double, double>> counts;
    counts.reserve(scenes.size());

    for (const Scene& scene : scenes) {
        if (!scene.gt_points) throw std::invalid_argument("evaluate: scene '" + scene.scene_id + "' has no ground truth");
        const ProposalSet props = forward(params, scene.field);

        long n_pred = 0;
        for (const ScoredProposal& p : props.proposals)
            if (p.score >= score_threshold) ++n_pred;
        counts.emplace_back(static_cast<double>(scene.gt_points->size()), static_cast<double>(n_pred));

        for (std::size_t s = 0; s < sigmas.size(); ++s) {
            const LocalizationReport r =
                localization_report(*scene.gt_points, props.proposals, score_threshold, sigmas[s]);
            tp[s] += r.tp;
            fp[s] += r.fp;
            fn[s] += r.fn;
        }
    }

    EvalResult out;
    for (std::size_t s = 0; s < sigmas.size(); ++s)
        out.localization.push_back(report_from_counts(tp[s], fp[s], fn[s], sigmas[s]));
    out.counting = counting_report(counts);
    return out;
}

}  // namespace crowdloc
