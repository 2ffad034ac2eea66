#pragma once

#include <vector>

#include "crowdloc/core.hpp"

namespace crowdloc {

/// Pair-wise cost matrix D (n_targets x m_proposals), n <= m.
struct CostMatrix {
    int n_targets = 0;
    int m_proposals = 0;
    std::vector<double> values;  // row-major

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * m_proposals + j]; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * m_proposals + j]; }
};

/// D[i][j] = ||p_i - phat_j|| - score_weight * chat_j. Distance-dominant when
/// score_weight is small; score_weight = 0 is pure distance.
CostMatrix build_cost_matrix(const PointSet& targets, const ProposalSet& proposals, double score_weight);

/// Minimum-cost one-to-one assignment of all n targets to distinct proposals
/// (shortest augmenting path; rectangular n <= m handled natively).
MatchResult hungarian_match(const CostMatrix& cost);

}  // namespace crowdloc
