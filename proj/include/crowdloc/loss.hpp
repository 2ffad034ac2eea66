#pragma once

#include <vector>

#include "crowdloc/assign.hpp"
#include "crowdloc/consist.hpp"
#include "crowdloc/core.hpp"

namespace crowdloc {

/// One loss evaluation with analytic per-anchor gradients of `total`
/// (total = l_cls + lambda2 * l_loc). Gradients are zero at anchors no loss
/// term touches. clamp_count reports how many log arguments had to be pulled
/// into [eps, 1-eps]; persistent growth signals score saturation.
struct LossBreakdown {
    double l_loc = 0.0;
    double l_cls = 0.0;
    double total = 0.0;
    std::vector<Point2D> pos_grads;
    std::vector<double> score_grads;
    long clamp_count = 0;
};

/// Supervised loss against ground truth: mean squared matched distance plus
/// cross entropy over all proposals, negatives weighted by lambda1. Accepts
/// an empty target set with the same degenerate convention as the unlabeled
/// loss (l_loc = 0, negatives-only classification).
LossBreakdown labeled_loss(const PointSet& gt, const ProposalSet& proposals, const MatchResult& match,
                           double lambda1, double lambda2);

/// Pseudo-label loss: localization against the aggregated pseudo-points
/// (unweighted), classification with per-instance weights on the positive
/// terms only. weight_loc additionally applies the weights to the
/// localization terms (ablation, off by default).
LossBreakdown unlabeled_loss(const ConsistentPseudoLabels& pseudo, const ProposalSet& proposals,
                             const MatchResult& match, double lambda1, double lambda2,
                             bool weight_loc = false);

/// total = labeled + lambda * unlabeled. The returned unlabeled breakdown has
/// its per-anchor gradients pre-scaled by lambda so that backpropagating both
/// sides and summing yields the gradient of `total`; its loss values stay
/// unscaled.
struct CombinedLoss {
    double total = 0.0;
    double lambda = 0.0;
    LossBreakdown labeled;
    LossBreakdown unlabeled;
};

CombinedLoss combine(const LossBreakdown& labeled, const LossBreakdown& unlabeled, double lambda);

}  // namespace crowdloc
