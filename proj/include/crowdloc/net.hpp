#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "crowdloc/core.hpp"
#include "crowdloc/rng.hpp"

namespace crowdloc {

struct NetHyper {
    int patch_size = 9;    // odd
    int hidden_width = 32;
    double stride = 4.0;
};

bool operator==(const NetHyper& a, const NetHyper& b);

/// Flat parameter vector of the proposal model. Layout:
///   W1[hidden][patch*patch] | b1[hidden] | W2[3][hidden] | b2[3]
/// The 3-unit head emits (dx, dy, logit) per anchor.
struct ModelParams {
    NetHyper hyper;
    std::vector<double> theta;
};

std::size_t param_count(const NetHyper& hyper);
ModelParams zero_params(const NetHyper& hyper);
/// Uniform init scaled by 1/sqrt(fan_in); biases start at zero.
ModelParams init_params(const NetHyper& hyper, Rng& rng);

/// Everything backward() needs to replay the forward pass: per-anchor input
/// patches, hidden activations, raw outputs, and the parameter snapshot.
struct ForwardCache {
    NetHyper hyper;
    AnchorGridMeta grid;
    std::vector<double> theta;
    std::vector<double> patches;  // anchors x patch^2
    std::vector<double> hidden;   // anchors x hidden_width, post-tanh
    std::vector<double> raw_out;  // anchors x 3 (dx, dy, logit)
};

/// Per-anchor pass: tanh hidden layer over the zero-padded patch around the
/// anchor center, linear 3-unit head; position = center + (dx, dy),
/// score = sigmoid(logit). Pass a cache to enable backward().
ProposalSet forward(const ModelParams& params, const Field& field, ForwardCache* cache = nullptr);

/// Exact reverse-mode gradient of any scalar loss whose per-anchor partials
/// w.r.t. positions and scores are supplied. grad arrays follow anchor order.
std::vector<double> backward(const ForwardCache& cache, const std::vector<Point2D>& grad_positions,
                             const std::vector<double>& grad_scores);

void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace crowdloc
