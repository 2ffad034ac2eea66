#pragma once

#include <cstdint>
#include <vector>

#include "crowdloc/core.hpp"

namespace crowdloc {

/// Position aggregation settings. k_aux is the aggregation count K (a perfect
/// square): the smoothed position is the mean of K points, the pseudo-point
/// itself plus the K-1 neighboring auxiliary proposals. K = 0 disables
/// aggregation entirely.
struct PAConfig {
    int k_aux = 4;
    bool include_self = true;  // fixed: the mean always contains the pseudo-point
};

void validate(const PAConfig& cfg);

/// Teacher pseudo-points after position aggregation, with their calibration
/// weights. All lists share one length.
struct ConsistentPseudoLabels {
    PointSet points;
    std::vector<double> weights;                // (score - 0.5) / 0.5, in [0, 1]
    std::vector<double> source_scores;          // teacher scores, in [0.5, 1]
    std::vector<int> source_anchor_indices;
    std::vector<int> aux_counts;                // achieved |B| per point after border truncation

    std::size_t size() const { return points.size(); }
};

struct PseudoExtraction {
    std::vector<int> anchor_indices;  // anchor order
    std::vector<double> scores;
};

/// All proposals the teacher classified positive (score >= threshold).
PseudoExtraction extract_pseudo_points(const ProposalSet& teacher_proposals, double threshold = 0.5);

/// Mean of the pseudo-point's regressed position and the regressed positions
/// of proposals in the surrounding sqrt(K) x sqrt(K) anchor block (pseudo cell
/// excluded, block truncated at grid borders). K = 0 returns the position
/// unchanged. aux_count_out, when given, receives the achieved |B|.
Point2D position_aggregate(int pseudo_anchor_index, const ProposalSet& teacher_proposals,
                           const PAConfig& cfg, int* aux_count_out = nullptr);

/// w = (score - 0.5) / 0.5, affine [0.5, 1] -> [0, 1].
double iuc_weight(double score);

/// extract -> aggregate -> weight.
ConsistentPseudoLabels build_consistent_labels(const ProposalSet& teacher_proposals, const PAConfig& cfg);

/// Monte Carlo check of the aggregation variance: draw k iid points with
/// coordinates ~ N(0, sigma^2), average them, repeat. Reports per-coordinate
/// empirical variances of the single draws and of the aggregated means.
struct VarianceProbeResult {
    Point2D var_single;
    Point2D var_aggregated;
};

VarianceProbeResult variance_probe(double sigma, int k, long trials, std::uint64_t seed);

}  // namespace crowdloc
