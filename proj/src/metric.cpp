#include "crowdloc/metric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crowdloc/assign.hpp"

namespace crowdloc {

LocalizationReport report_from_counts(long tp, long fp, long fn, double sigma) {
    LocalizationReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.sigma = sigma;
    r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

LocalizationReport localization_report(const PointSet& gt, const std::vector<ScoredProposal>& pred,
                                       double score_threshold, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("localization_report: sigma must be positive");

    PointSet kept;
    kept.reserve(pred.size());
    for (const ScoredProposal& p : pred)
        if (p.score >= score_threshold) kept.push_back(p.position);

    const long n_gt = static_cast<long>(gt.size());
    const long n_pred = static_cast<long>(kept.size());
    if (n_gt == 0 || n_pred == 0) return report_from_counts(0, n_pred, n_gt, sigma);

    // Full assignment of the smaller side; infeasible pairs carry a cost so
    // large that the optimum never trades a feasible pair for them, which
    // makes min-cost equivalent to max-cardinality with min-distance ties.
    const PointSet& rows = n_gt <= n_pred ? gt : kept;
    const PointSet& cols = n_gt <= n_pred ? kept : gt;
    const double big = (static_cast<double>(rows.size()) + 1.0) * (sigma + 1.0);

    CostMatrix d;
    d.n_targets = static_cast<int>(rows.size());
    d.m_proposals = static_cast<int>(cols.size());
    d.values.resize(rows.size() * cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const double dist = euclidean_distance(rows[i], cols[j]);
            d.values[i * cols.size() + j] = dist <= sigma ? dist : big;
        }
    }

    const MatchResult match = hungarian_match(d);
    long tp = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (d.at(static_cast<int>(i), match.assignment[i]) < big) ++tp;

    return report_from_counts(tp, n_pred - tp, n_gt - tp, sigma);
}

CountingReport counting_report(const std::vector<std::pair<double, double>>& gt_pred_counts) {
    if (gt_pred_counts.empty()) throw std::invalid_argument("counting_report: no images");
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (const auto& [gt, pred] : gt_pred_counts) {
        const double e = gt - pred;
        abs_sum += std::abs(e);
        sq_sum += e * e;
    }
    CountingReport r;
    r.n_images = static_cast<long>(gt_pred_counts.size());
    r.mae = abs_sum / static_cast<double>(r.n_images);
    r.mse = std::sqrt(sq_sum / static_cast<double>(r.n_images));
    return r;
}

}  // namespace crowdloc
