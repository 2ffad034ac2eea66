#pragma once

#include <vector>

#include "crowdloc/metric.hpp"
#include "crowdloc/net.hpp"
#include "crowdloc/synth.hpp"

namespace crowdloc {

/// Dataset-level metrics: localization counts are summed over scenes before
/// the rates are derived; counting uses one (gt, predicted) pair per scene.
struct EvalResult {
    std::vector<LocalizationReport> localization;  // one entry per sigma
    CountingReport counting;
};

/// Runs the model over every scene (all must carry ground truth) and
/// aggregates. Predictions are proposals with score >= score_threshold.
EvalResult evaluate_scenes(const ModelParams& params, const std::vector<Scene>& scenes,
                           const std::vector<double>& sigmas, double score_threshold = 0.5);

}  // namespace crowdloc
