#include "crowdloc/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace crowdloc {

namespace {

constexpr double kLogEps = 1e-7;

double clamp_prob(double c, long& clamp_count) {
    if (c < kLogEps) {
        ++clamp_count;
        return kLogEps;
    }
    if (c > 1.0 - kLogEps) {
        ++clamp_count;
        return 1.0 - kLogEps;
    }
    return c;
}

void check_match(std::size_t n_targets, const ProposalSet& proposals, const MatchResult& match) {
    const std::size_t m = proposals.proposals.size();
    if (match.assignment.size() != n_targets)
        throw std::invalid_argument("loss: match covers " + std::to_string(match.assignment.size()) +
                                    " targets, expected " + std::to_string(n_targets));
    if (match.positive_set.size() + match.negative_set.size() != m)
        throw std::invalid_argument("loss: match positive/negative sets do not partition the proposals");
    for (int j : match.assignment)
        if (j < 0 || static_cast<std::size_t>(j) >= m)
            throw std::invalid_argument("loss: match references proposal index out of range");
}

// Shared body for the labeled and unlabeled flavors. `weights` is null for
// ground-truth targets (every positive term carries weight one); the same
// accumulation order is used either way, so the two flavors agree bit-for-bit
// whenever all weights are one. Gradients of log terms are evaluated at the
// clamped argument.
LossBreakdown matching_loss(const PointSet& targets, const std::vector<double>* weights,
                            const ProposalSet& proposals, const MatchResult& match, double lambda1,
                            double lambda2, bool weight_loc) {
    check_match(targets.size(), proposals, match);
    const std::size_t n = targets.size();
    const std::size_t m = proposals.proposals.size();
    if (m == 0) throw std::invalid_argument("loss: empty proposal set");

    LossBreakdown out;
    out.pos_grads.assign(m, Point2D{0.0, 0.0});
    out.score_grads.assign(m, 0.0);

    double loc_sum = 0.0;
    double pos_log_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int j = match.assignment[i];
        const ScoredProposal& prop = proposals.proposals[j];
        const double w = weights ? (*weights)[i] : 1.0;

        const double dx = prop.position.x - targets[i].x;
        const double dy = prop.position.y - targets[i].y;
        const double wloc = weight_loc ? w : 1.0;
        loc_sum += wloc * (dx * dx + dy * dy);

        const double c = clamp_prob(prop.score, out.clamp_count);
        pos_log_sum += w * std::log(c);

        const double loc_coeff = lambda2 * (2.0 / static_cast<double>(n)) * wloc;
        out.pos_grads[j].x += loc_coeff * dx;
        out.pos_grads[j].y += loc_coeff * dy;
        out.score_grads[j] += -w / (static_cast<double>(m) * c);
    }

    double neg_log_sum = 0.0;
    for (int j : match.negative_set) {
        const double c = clamp_prob(proposals.proposals[j].score, out.clamp_count);
        neg_log_sum += std::log(1.0 - c);
        out.score_grads[j] += lambda1 / (static_cast<double>(m) * (1.0 - c));
    }

    out.l_loc = n > 0 ? loc_sum / static_cast<double>(n) : 0.0;
    out.l_cls = -(pos_log_sum + lambda1 * neg_log_sum) / static_cast<double>(m);
    out.total = out.l_cls + lambda2 * out.l_loc;
    return out;
}

}  // namespace

LossBreakdown labeled_loss(const PointSet& gt, const ProposalSet& proposals, const MatchResult& match,
                           double lambda1, double lambda2) {
    return matching_loss(gt, nullptr, proposals, match, lambda1, lambda2, false);
}

LossBreakdown unlabeled_loss(const ConsistentPseudoLabels& pseudo, const ProposalSet& proposals,
                             const MatchResult& match, double lambda1, double lambda2, bool weight_loc) {
    if (pseudo.weights.size() != pseudo.points.size())
        throw std::invalid_argument("loss: pseudo-label weights do not match point count");
    return matching_loss(pseudo.points, &pseudo.weights, proposals, match, lambda1, lambda2, weight_loc);
}

CombinedLoss combine(const LossBreakdown& labeled, const LossBreakdown& unlabeled, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("combine: lambda must be >= 0");
    CombinedLoss out;
    out.lambda = lambda;
    out.total = labeled.total + lambda * unlabeled.total;
    out.labeled = labeled;
    out.unlabeled = unlabeled;
    for (Point2D& g : out.unlabeled.pos_grads) {
        g.x *= lambda;
        g.y *= lambda;
    }
    for (double& g : out.unlabeled.score_grads) g *= lambda;
    return out;
}

}  // namespace crowdloc
