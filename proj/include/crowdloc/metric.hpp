#pragma once

#include <utility>
#include <vector>

#include "crowdloc/core.hpp"

namespace crowdloc {

/// Localization counts and derived rates at one distance threshold.
/// Conventions: 0/0 ratios are 0 for precision, recall and f1.
struct LocalizationReport {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double sigma = 0.0;
};

/// Thresholded predictions (score >= score_threshold) are matched one-to-one
/// against ground truth on the sigma-feasible bipartite graph, maximizing the
/// number of matches and breaking ties by minimum total distance. Matched
/// pairs are TP, leftover predictions FP, leftover ground truth FN.
LocalizationReport localization_report(const PointSet& gt, const std::vector<ScoredProposal>& pred,
                                       double score_threshold, double sigma);

LocalizationReport report_from_counts(long tp, long fp, long fn, double sigma);

/// mae = mean |gt - pred|; mse = sqrt(mean (gt - pred)^2), following the
/// root-of-mean-of-squares reading of the counting metric.
struct CountingReport {
    double mae = 0.0;
    double mse = 0.0;
    long n_images = 0;
};

CountingReport counting_report(const std::vector<std::pair<double, double>>& gt_pred_counts);

}  // namespace crowdloc
