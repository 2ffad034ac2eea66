#include "crowdloc/net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace crowdloc {

bool operator==(const NetHyper& a, const NetHyper& b) {
    return a.patch_size == b.patch_size && a.hidden_width == b.hidden_width && a.stride == b.stride;
}

namespace {

void validate_hyper(const NetHyper& h) {
    if (h.patch_size < 1 || h.patch_size % 2 == 0)
        throw std::invalid_argument("net: patch_size must be odd and positive");
    if (h.hidden_width < 1) throw std::invalid_argument("net: hidden_width must be positive");
    if (!(h.stride > 0.0)) throw std::invalid_argument("net: stride must be positive");
}

struct Layout {
    int p2;
    int hidden;
    std::size_t w1, b1, w2, b2, total;

    explicit Layout(const NetHyper& h)
        : p2(h.patch_size * h.patch_size),
          hidden(h.hidden_width),
          w1(0),
          b1(static_cast<std::size_t>(p2) * hidden),
          w2(b1 + hidden),
          b2(w2 + 3 * static_cast<std::size_t>(hidden)),
          total(b2 + 3) {}
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::size_t param_count(const NetHyper& hyper) {
    validate_hyper(hyper);
    return Layout(hyper).total;
}

ModelParams zero_params(const NetHyper& hyper) {
    ModelParams p;
    p.hyper = hyper;
    p.theta.assign(param_count(hyper), 0.0);
    return p;
}

ModelParams init_params(const NetHyper& hyper, Rng& rng) {
    ModelParams p = zero_params(hyper);
    const Layout lay(hyper);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(lay.p2));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(lay.hidden));
    for (std::size_t i = lay.w1; i < lay.b1; ++i) p.theta[i] = rng.uniform(-s1, s1);
    for (std::size_t i = lay.w2; i < lay.b2; ++i) p.theta[i] = rng.uniform(-s2, s2);
    // start the classifier pessimistic: most anchors are background, and a
    // fresh teacher should not flood the pseudo-point extraction
    p.theta[lay.total - 1] = -2.0;
    return p;
}

ProposalSet forward(const ModelParams& params, const Field& field, ForwardCache* cache) {
    validate_hyper(params.hyper);
    const Layout lay(params.hyper);
    if (params.theta.size() != lay.total)
        throw std::invalid_argument("net: parameter vector has wrong length");
    if (field.height < params.hyper.patch_size || field.width < params.hyper.patch_size)
        throw std::invalid_argument("net: field smaller than patch size");

    std::size_t bad = 0;
    for (float v : field.values)
        if (!std::isfinite(v)) ++bad;
    if (bad > 0)
        throw std::invalid_argument("net: field contains " + std::to_string(bad) + " non-finite values");

    const AnchorGridMeta grid = make_grid(field.height, field.width, params.hyper.stride);
    const int n_anchors = anchor_count(grid);
    const int p = params.hyper.patch_size;
    const int half = p / 2;
    const int hidden = lay.hidden;

    ProposalSet out;
    out.grid_meta = grid;
    out.proposals.resize(n_anchors);

    if (cache) {
        cache->hyper = params.hyper;
        cache->grid = grid;
        cache->theta = params.theta;
        cache->patches.resize(static_cast<std::size_t>(n_anchors) * lay.p2);
        cache->hidden.resize(static_cast<std::size_t>(n_anchors) * hidden);
        cache->raw_out.resize(static_cast<std::size_t>(n_anchors) * 3);
    }

    const double* w1 = params.theta.data() + lay.w1;
    const double* b1 = params.theta.data() + lay.b1;
    const double* w2 = params.theta.data() + lay.w2;
    const double* b2 = params.theta.data() + lay.b2;

    std::vector<double> patch(lay.p2);
    std::vector<double> act(hidden);

    for (int a = 0; a < n_anchors; ++a) {
        const Point2D center = anchor_center(grid, a);
        const int cr = static_cast<int>(std::floor(center.y));
        const int cc = static_cast<int>(std::floor(center.x));

        for (int dr = -half, k = 0; dr <= half; ++dr) {
            const int r = cr + dr;
            const bool row_ok = r >= 0 && r < field.height;
            for (int dc = -half; dc <= half; ++dc, ++k) {
                const int c = cc + dc;
                patch[k] = (row_ok && c >= 0 && c < field.width) ? static_cast<double>(field.at(r, c)) : 0.0;
            }
        }

        for (int h = 0; h < hidden; ++h) {
            const double* row = w1 + static_cast<std::size_t>(h) * lay.p2;
            double z = b1[h];
            for (int k = 0; k < lay.p2; ++k) z += row[k] * patch[k];
            act[h] = std::tanh(z);
        }

        double raw[3];
        for (int o = 0; o < 3; ++o) {
            const double* row = w2 + static_cast<std::size_t>(o) * hidden;
            double z = b2[o];
            for (int h = 0; h < hidden; ++h) z += row[h] * act[h];
            raw[o] = z;
        }

        ScoredProposal& prop = out.proposals[a];
        prop.anchor_index = a;
        prop.position = Point2D{center.x + raw[0], center.y + raw[1]};
        prop.score = sigmoid(raw[2]);

        if (cache) {
            std::memcpy(cache->patches.data() + static_cast<std::size_t>(a) * lay.p2, patch.data(),
                        lay.p2 * sizeof(double));
            std::memcpy(cache->hidden.data() + static_cast<std::size_t>(a) * hidden, act.data(),
                        hidden * sizeof(double));
            std::memcpy(cache->raw_out.data() + static_cast<std::size_t>(a) * 3, raw, 3 * sizeof(double));
        }
    }
    return out;
}

std::vector<double> backward(const ForwardCache& cache, const std::vector<Point2D>& grad_positions,
                             const std::vector<double>& grad_scores) {
    const Layout lay(cache.hyper);
    const int n_anchors = anchor_count(cache.grid);
    if (cache.theta.size() != lay.total || cache.patches.size() != static_cast<std::size_t>(n_anchors) * lay.p2)
        throw std::invalid_argument("net backward: cache is inconsistent");
    if (grad_positions.size() != static_cast<std::size_t>(n_anchors) ||
        grad_scores.size() != static_cast<std::size_t>(n_anchors))
        throw std::invalid_argument("net backward: gradient arrays do not match anchor count (" +
                                    std::to_string(n_anchors) + ")");

    const int hidden = lay.hidden;
    const double* w2 = cache.theta.data() + lay.w2;

    std::vector<double> grad(lay.total, 0.0);
    double* gw1 = grad.data() + lay.w1;
    double* gb1 = grad.data() + lay.b1;
    double* gw2 = grad.data() + lay.w2;
    double* gb2 = grad.data() + lay.b2;

    std::vector<double> ghid(hidden);

    for (int a = 0; a < n_anchors; ++a) {
        const double* patch = cache.patches.data() + static_cast<std::size_t>(a) * lay.p2;
        const double* act = cache.hidden.data() + static_cast<std::size_t>(a) * hidden;
        const double logit = cache.raw_out[static_cast<std::size_t>(a) * 3 + 2];

        // position = center + (dx, dy); score = sigmoid(logit)
        const double score = sigmoid(logit);
        const double gout[3] = {grad_positions[a].x, grad_positions[a].y,
                                grad_scores[a] * score * (1.0 - score)};

        if (gout[0] == 0.0 && gout[1] == 0.0 && gout[2] == 0.0) continue;

        std::fill(ghid.begin(), ghid.end(), 0.0);
        for (int o = 0; o < 3; ++o) {
            if (gout[o] == 0.0) continue;
            const double* row = w2 + static_cast<std::size_t>(o) * hidden;
            double* grow = gw2 + static_cast<std::size_t>(o) * hidden;
            for (int h = 0; h < hidden; ++h) {
                grow[h] += gout[o] * act[h];
                ghid[h] += gout[o] * row[h];
            }
            gb2[o] += gout[o];
        }

        for (int h = 0; h < hidden; ++h) {
            const double gz = ghid[h] * (1.0 - act[h] * act[h]);
            if (gz == 0.0) continue;
            double* grow = gw1 + static_cast<std::size_t>(h) * lay.p2;
            for (int k = 0; k < lay.p2; ++k) grow[k] += gz * patch[k];
            gb1[h] += gz;
        }
    }
    return grad;
}

namespace {
constexpr char kParamsMagic[4] = {'C', 'L', 'P', 'M'};
constexpr std::uint32_t kParamsVersion = 1;
}  // namespace

void save_params(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("params: cannot write '" + path.string() + "'");
    os.write(kParamsMagic, 4);
    auto put = [&os](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    put(kParamsVersion);
    const std::int32_t p = params.hyper.patch_size;
    const std::int32_t h = params.hyper.hidden_width;
    put(p);
    put(h);
    put(params.hyper.stride);
    const std::uint64_t count = params.theta.size();
    put(count);
    os.write(reinterpret_cast<const char*>(params.theta.data()),
             static_cast<std::streamsize>(count * sizeof(double)));
    if (!os) throw std::runtime_error("params: write failed for '" + path.string() + "'");
}

ModelParams load_params(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("params: cannot open '" + path.string() + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kParamsMagic, 4) != 0)
        throw std::runtime_error("params: '" + path.string() + "' is not a parameter checkpoint");
    auto get = [&is, &path](auto& v, const char* what) {
        is.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!is) throw std::runtime_error("params: '" + path.string() + "' truncated at " + what);
    };
    std::uint32_t version;
    get(version, "version");
    if (version != kParamsVersion)
        throw std::runtime_error("params: '" + path.string() + "' has version " + std::to_string(version) +
                                 ", expected " + std::to_string(kParamsVersion));
    ModelParams params;
    std::int32_t p, h;
    get(p, "patch_size");
    get(h, "hidden_width");
    get(params.hyper.stride, "stride");
    params.hyper.patch_size = p;
    params.hyper.hidden_width = h;
    std::uint64_t count;
    get(count, "parameter count");
    if (count != param_count(params.hyper))
        throw std::runtime_error("params: '" + path.string() + "' parameter count does not match header");
    params.theta.resize(count);
    is.read(reinterpret_cast<char*>(params.theta.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw std::runtime_error("params: '" + path.string() + "' truncated in parameter data");
    return params;
}

}  // namespace crowdloc
