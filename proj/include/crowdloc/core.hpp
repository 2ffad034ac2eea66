#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdloc {

/// Raised when a computation produces non-finite values (distinct from bad
/// configuration or I/O failures so callers can map exit codes).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Planar head position in pixel units, origin at the top-left of the field.
/// Coordinates are continuous; nothing in the pipeline snaps to integers.
struct Point2D {
    double x = 0.0;
    double y = 0.0;
};

using PointSet = std::vector<Point2D>;

inline bool is_finite(const Point2D& p) {
    return std::isfinite(p.x) && std::isfinite(p.y);
}

inline double euclidean_distance(const Point2D& a, const Point2D& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Row-major scalar field (height x width). Stored as float32 so the
/// serialized form round-trips bit-exactly.
struct Field {
    int height = 0;
    int width = 0;
    std::vector<float> values;

    float at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
    float& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
};

inline Field make_field(int height, int width, float fill = 0.0f) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("field dimensions must be positive");
    Field f;
    f.height = height;
    f.width = width;
    f.values.assign(static_cast<std::size_t>(height) * width, fill);
    return f;
}

/// Regular anchor lattice over a field. One proposal per cell; the cell
/// (r, c) has its anchor at ((c + 0.5) * stride, (r + 0.5) * stride).
struct AnchorGridMeta {
    int field_height = 0;
    int field_width = 0;
    double stride = 4.0;
    int rows = 0;
    int cols = 0;
};

inline AnchorGridMeta make_grid(int field_height, int field_width, double stride) {
    if (field_height <= 0 || field_width <= 0) throw std::invalid_argument("grid: field dimensions must be positive");
    if (!(stride > 0.0)) throw std::invalid_argument("grid: stride must be positive");
    AnchorGridMeta g;
    g.field_height = field_height;
    g.field_width = field_width;
    g.stride = stride;
    g.rows = static_cast<int>(std::ceil(field_height / stride));
    g.cols = static_cast<int>(std::ceil(field_width / stride));
    return g;
}

inline int anchor_count(const AnchorGridMeta& g) { return g.rows * g.cols; }

inline int anchor_index(const AnchorGridMeta& g, int row, int col) { return row * g.cols + col; }

inline int anchor_row(const AnchorGridMeta& g, int index) { return index / g.cols; }
inline int anchor_col(const AnchorGridMeta& g, int index) { return index % g.cols; }

inline Point2D anchor_center(const AnchorGridMeta& g, int index) {
    const int r = anchor_row(g, index);
    const int c = anchor_col(g, index);
    return Point2D{(c + 0.5) * g.stride, (r + 0.5) * g.stride};
}

/// Index of the cell containing a point, clamped to the lattice. Exact
/// inverse of anchor_center on cell centers.
inline int cell_of(const AnchorGridMeta& g, const Point2D& p) {
    auto clamp = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    const int c = clamp(static_cast<int>(std::floor(p.x / g.stride)), g.cols - 1);
    const int r = clamp(static_cast<int>(std::floor(p.y / g.stride)), g.rows - 1);
    return anchor_index(g, r, c);
}

/// One candidate detection: regressed position plus classification score,
/// tied to the anchor that produced it.
struct ScoredProposal {
    Point2D position;
    double score = 0.5;
    int anchor_index = 0;
};

/// Complete model output for one field: exactly one proposal per anchor,
/// in anchor-index order.
struct ProposalSet {
    std::vector<ScoredProposal> proposals;
    AnchorGridMeta grid_meta;
};

/// Result of one-to-one target/proposal matching. `assignment[i]` is the
/// proposal index matched to target i; positive_set lists matched proposal
/// indices (target order), negative_set the rest in ascending order.
struct MatchResult {
    std::vector<int> assignment;
    double total_cost = 0.0;
    std::vector<int> positive_set;
    std::vector<int> negative_set;
};

}  // namespace crowdloc
