#include "crowdloc/consist.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "crowdloc/rng.hpp"

namespace crowdloc {

namespace {

int isqrt_exact(int k) {
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
    return r * r == k ? r : -1;
}

}  // namespace

void validate(const PAConfig& cfg) {
    if (cfg.k_aux < 0 || isqrt_exact(cfg.k_aux) < 0)
        throw std::invalid_argument("pa config: k_aux must be a perfect square, got " +
                                    std::to_string(cfg.k_aux));
    if (!cfg.include_self) throw std::invalid_argument("pa config: include_self is fixed true");
}

PseudoExtraction extract_pseudo_points(const ProposalSet& teacher_proposals, double threshold) {
    PseudoExtraction out;
    const int m = static_cast<int>(teacher_proposals.proposals.size());
    for (int j = 0; j < m; ++j) {
        const ScoredProposal& prop = teacher_proposals.proposals[j];
        if (prop.score >= threshold) {
            out.anchor_indices.push_back(j);
            out.scores.push_back(prop.score);
        }
    }
    return out;
}

Point2D position_aggregate(int pseudo_anchor_index, const ProposalSet& teacher_proposals,
                           const PAConfig& cfg, int* aux_count_out) {
    validate(cfg);
    const AnchorGridMeta& grid = teacher_proposals.grid_meta;
    if (pseudo_anchor_index < 0 || pseudo_anchor_index >= anchor_count(grid))
        throw std::invalid_argument("position_aggregate: anchor index out of range");

    const Point2D self = teacher_proposals.proposals[pseudo_anchor_index].position;
    if (cfg.k_aux == 0) {
        if (aux_count_out) *aux_count_out = 0;
        return self;
    }

    const int k = isqrt_exact(cfg.k_aux);
    const int row = anchor_row(grid, pseudo_anchor_index);
    const int col = anchor_col(grid, pseudo_anchor_index);

    // k x k block around the pseudo cell, biased down-right for even k;
    // truncated (not shifted) at the borders
    const int r0 = std::max(0, row - (k - 1) / 2);
    const int c0 = std::max(0, col - (k - 1) / 2);
    const int r1 = std::min(grid.rows, row - (k - 1) / 2 + k);
    const int c1 = std::min(grid.cols, col - (k - 1) / 2 + k);

    double sx = self.x;
    double sy = self.y;
    int aux = 0;
    for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
            if (r == row && c == col) continue;
            const Point2D& p = teacher_proposals.proposals[anchor_index(grid, r, c)].position;
            sx += p.x;
            sy += p.y;
            ++aux;
        }
    }
    if (aux_count_out) *aux_count_out = aux;
    return Point2D{sx / (aux + 1), sy / (aux + 1)};
}

double iuc_weight(double score) {
    if (!(score >= 0.5 && score <= 1.0))
        throw std::invalid_argument("iuc_weight: score " + std::to_string(score) +
                                    " outside [0.5, 1]");
    return (score - 0.5) / 0.5;
}

ConsistentPseudoLabels build_consistent_labels(const ProposalSet& teacher_proposals, const PAConfig& cfg) {
    validate(cfg);
    const PseudoExtraction extracted = extract_pseudo_points(teacher_proposals);

    ConsistentPseudoLabels labels;
    const std::size_t n = extracted.anchor_indices.size();
    labels.points.reserve(n);
    labels.weights.reserve(n);
    labels.source_scores.reserve(n);
    labels.source_anchor_indices.reserve(n);
    labels.aux_counts.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        int aux = 0;
        labels.points.push_back(position_aggregate(extracted.anchor_indices[i], teacher_proposals, cfg, &aux));
        labels.weights.push_back(iuc_weight(extracted.scores[i]));
        labels.source_scores.push_back(extracted.scores[i]);
        labels.source_anchor_indices.push_back(extracted.anchor_indices[i]);
        labels.aux_counts.push_back(aux);
    }
    return labels;
}

VarianceProbeResult variance_probe(double sigma, int k, long trials, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("variance_probe: k must be >= 1");
    if (trials < 10000) throw std::invalid_argument("variance_probe: need at least 10^4 trials");

    Rng rng(seed);
    double sx1 = 0, sx2 = 0, sy1 = 0, sy2 = 0;      // single draws
    double ax1 = 0, ax2 = 0, ay1 = 0, ay2 = 0;      // aggregated means
    for (long t = 0; t < trials; ++t) {
        double mx = 0, my = 0, fx = 0, fy = 0;
        for (int i = 0; i < k; ++i) {
            const double x = rng.normal(0.0, sigma);
            const double y = rng.normal(0.0, sigma);
            if (i == 0) {
                fx = x;
                fy = y;
            }
            mx += x;
            my += y;
        }
        mx /= k;
        my /= k;
        sx1 += fx;
        sx2 += fx * fx;
        sy1 += fy;
        sy2 += fy * fy;
        ax1 += mx;
        ax2 += mx * mx;
        ay1 += my;
        ay2 += my * my;
    }
    const double n = static_cast<double>(trials);
    auto var = [n](double s1, double s2) { return (s2 - s1 * s1 / n) / (n - 1); };
    VarianceProbeResult r;
    r.var_single = Point2D{var(sx1, sx2), var(sy1, sy2)};
    r.var_aggregated = Point2D{var(ax1, ax2), var(ay1, ay2)};
    return r;
}

}  // namespace crowdloc
