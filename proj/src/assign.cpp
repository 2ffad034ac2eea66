#include "crowdloc/assign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crowdloc {

CostMatrix build_cost_matrix(const PointSet& targets, const ProposalSet& proposals, double score_weight) {
    const int n = static_cast<int>(targets.size());
    const int m = static_cast<int>(proposals.proposals.size());
    if (n > m)
        throw std::invalid_argument("cost matrix: " + std::to_string(n) + " targets exceed " +
                                    std::to_string(m) +
                                    " proposals; raise proposal density (smaller stride)");
    if (score_weight < 0.0) throw std::invalid_argument("cost matrix: score_weight must be >= 0");
    for (const Point2D& t : targets)
        if (!is_finite(t)) throw std::invalid_argument("cost matrix: non-finite target point");

    CostMatrix d;
    d.n_targets = n;
    d.m_proposals = m;
    d.values.resize(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const ScoredProposal& prop = proposals.proposals[j];
            d.at(i, j) = euclidean_distance(targets[i], prop.position) - score_weight * prop.score;
        }
    }
    return d;
}

MatchResult hungarian_match(const CostMatrix& cost) {
    const int n = cost.n_targets;
    const int m = cost.m_proposals;
    if (n > m) throw std::invalid_argument("hungarian: requires n_targets <= m_proposals");
    for (double v : cost.values)
        if (!std::isfinite(v)) throw std::invalid_argument("hungarian: cost matrix has non-finite entries");

    constexpr double kInf = std::numeric_limits<double>::infinity();

    // shortest augmenting path with potentials, 1-based; col 0 is virtual
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<int> match_col(static_cast<std::size_t>(m) + 1, 0);  // col -> row
    std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match_col[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
        std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match_col[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match_col[j0] != 0);
        do {
            const int j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        } while (j0);
    }

    MatchResult result;
    result.assignment.assign(n, -1);
    for (int j = 1; j <= m; ++j)
        if (match_col[j] != 0) result.assignment[match_col[j] - 1] = j - 1;

    result.positive_set.reserve(n);
    std::vector<char> taken(m, 0);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int j = result.assignment[i];
        total += cost.at(i, j);
        result.positive_set.push_back(j);
        taken[j] = 1;
    }
    result.total_cost = total;
    result.negative_set.reserve(m - n);
    for (int j = 0; j < m; ++j)
        if (!taken[j]) result.negative_set.push_back(j);
    return result;
}

}  // namespace crowdloc
