#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdloc/core.hpp"

namespace crowdloc {

/// A rendered scene. Unlabeled scenes keep their ground truth hidden from
/// training (is_labeled == false) but may retain it for evaluation.
struct Scene {
    Field field;
    std::optional<PointSet> gt_points;
    std::string scene_id;
    bool is_labeled = false;
};

struct IntRange {
    int lo = 0;
    int hi = 0;
};

struct SynthConfig {
    int field_size = 96;
    int n_scenes = 240;
    IntRange heads_per_scene{8, 28};
    IntRange cluster_count{1, 4};
    double cluster_spread = 12.0;
    double blob_sigma = 2.0;
    double amplitude_min = 0.8;
    double amplitude_max = 1.2;
    double ambiguous_fraction = 0.2;
    double ambiguous_amplitude_scale = 0.45;
    double noise_std = 0.03;
    std::uint64_t seed = 42;
    double labeled_ratio = 0.1;
    double holdout_fraction = 0.2;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const SynthConfig& cfg);

struct SynthDataset {
    std::vector<Scene> labeled;
    std::vector<Scene> unlabeled;
    std::vector<Scene> holdout;
};

/// Deterministic scene synthesis: head positions from a mixture of Gaussian
/// clusters, each rendered as an isotropic blob of width blob_sigma, plus
/// per-pixel Gaussian noise. A fraction of heads is rendered at reduced
/// amplitude; those ambiguous heads stay in the ground truth.
SynthDataset generate_dataset(const SynthConfig& cfg);

/// Adds amplitude * exp(-((c-x)^2 + (r-y)^2) / (2 sigma^2)) at every pixel
/// (r, c); contributions beyond 5 sigma are dropped.
void add_blob(Field& field, const Point2D& head, double amplitude, double sigma);

/// Binary dataset file: header record (format version + config echo JSON)
/// followed by one record per scene. Bit-exact round trip.
void save_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& path,
                  const std::string& config_echo_json = "{}");
std::vector<Scene> load_dataset(const std::filesystem::path& path);

/// Config echo stored in a dataset file header; "{}" if the file was written
/// without one.
std::string dataset_config_echo(const std::filesystem::path& path);

bool scenes_equal(const Scene& a, const Scene& b);

}  // namespace crowdloc
