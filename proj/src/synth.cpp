#include "crowdloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "crowdloc/rng.hpp"

namespace crowdloc {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'D', 'S'};
constexpr std::uint32_t kFormatVersion = 1;

double clamp_coord(double v, double limit) {
    // keep strictly inside [0, limit)
    const double hi = limit - 1e-6;
    return v < 0.0 ? 0.0 : (v > hi ? hi : v);
}

}  // namespace

void add_blob(Field& field, const Point2D& head, double amplitude, double sigma) {
    // contributions beyond 5 sigma are below float resolution at these amplitudes
    const double radius = 5.0 * sigma;
    const int c0 = std::max(0, static_cast<int>(std::floor(head.x - radius)));
    const int c1 = std::min(field.width - 1, static_cast<int>(std::ceil(head.x + radius)));
    const int r0 = std::max(0, static_cast<int>(std::floor(head.y - radius)));
    const int r1 = std::min(field.height - 1, static_cast<int>(std::ceil(head.y + radius)));
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            const double dx = c - head.x;
            const double dy = r - head.y;
            field.at(r, c) += static_cast<float>(amplitude * std::exp(-(dx * dx + dy * dy) * inv));
        }
    }
}

namespace {

Scene make_scene(const SynthConfig& cfg, std::uint64_t scene_seed, const std::string& id, bool labeled) {
    Rng rng(scene_seed);
    Scene scene;
    scene.scene_id = id;
    scene.is_labeled = labeled;
    scene.field = make_field(cfg.field_size, cfg.field_size);

    const int n_clusters = rng.uniform_int(cfg.cluster_count.lo, cfg.cluster_count.hi);
    std::vector<Point2D> centers(n_clusters);
    for (auto& c : centers) {
        c.x = rng.uniform(0.0, cfg.field_size);
        c.y = rng.uniform(0.0, cfg.field_size);
    }

    const int n_heads = rng.uniform_int(cfg.heads_per_scene.lo, cfg.heads_per_scene.hi);
    PointSet heads(n_heads);
    std::vector<double> amplitudes(n_heads);
    for (int i = 0; i < n_heads; ++i) {
        const Point2D& center = centers[rng.uniform_int(0, n_clusters - 1)];
        heads[i].x = clamp_coord(center.x + rng.normal(0.0, cfg.cluster_spread), cfg.field_size);
        heads[i].y = clamp_coord(center.y + rng.normal(0.0, cfg.cluster_spread), cfg.field_size);
        double a = rng.uniform(cfg.amplitude_min, cfg.amplitude_max);
        if (rng.bernoulli(cfg.ambiguous_fraction)) a *= cfg.ambiguous_amplitude_scale;
        amplitudes[i] = a;
    }

    for (int i = 0; i < n_heads; ++i) add_blob(scene.field, heads[i], amplitudes[i], cfg.blob_sigma);

    if (cfg.noise_std > 0.0) {
        for (auto& v : scene.field.values) v += static_cast<float>(rng.normal(0.0, cfg.noise_std));
    }

    scene.gt_points = std::move(heads);
    return scene;
}

}  // namespace

void validate(const SynthConfig& cfg) {
    if (cfg.field_size < 8) throw std::invalid_argument("synth config: field_size must be >= 8");
    if (cfg.n_scenes < 1) throw std::invalid_argument("synth config: n_scenes must be >= 1");
    if (cfg.heads_per_scene.lo < 0 || cfg.heads_per_scene.hi < cfg.heads_per_scene.lo)
        throw std::invalid_argument("synth config: heads_per_scene range is empty");
    const double capacity = cfg.field_size * static_cast<double>(cfg.field_size) / 4.0;
    if (cfg.heads_per_scene.hi > capacity)
        throw std::invalid_argument("synth config: heads_per_scene exceeds field capacity (more than one head per 4 px^2)");
    if (cfg.cluster_count.lo < 1 || cfg.cluster_count.hi < cfg.cluster_count.lo)
        throw std::invalid_argument("synth config: cluster_count range is empty");
    if (!(cfg.cluster_spread > 0.0)) throw std::invalid_argument("synth config: cluster_spread must be positive");
    if (!(cfg.blob_sigma > 0.0)) throw std::invalid_argument("synth config: blob_sigma must be positive");
    if (!(cfg.amplitude_min > 0.0)) throw std::invalid_argument("synth config: amplitude_min must be positive");
    if (cfg.amplitude_max < cfg.amplitude_min) throw std::invalid_argument("synth config: amplitude range is empty");
    if (cfg.ambiguous_fraction < 0.0 || cfg.ambiguous_fraction > 1.0)
        throw std::invalid_argument("synth config: ambiguous_fraction must be in [0, 1]");
    if (!(cfg.ambiguous_amplitude_scale > 0.0) || !(cfg.ambiguous_amplitude_scale < 1.0))
        throw std::invalid_argument("synth config: ambiguous_amplitude_scale must be in (0, 1)");
    if (cfg.noise_std < 0.0) throw std::invalid_argument("synth config: noise_std must be >= 0");
    if (!(cfg.labeled_ratio > 0.0) || cfg.labeled_ratio > 1.0)
        throw std::invalid_argument("synth config: labeled_ratio must be in (0, 1]");
    if (cfg.holdout_fraction < 0.0 || cfg.holdout_fraction > 0.5)
        throw std::invalid_argument("synth config: holdout_fraction must be in [0, 0.5]");
}

SynthDataset generate_dataset(const SynthConfig& cfg) {
    validate(cfg);

    const int n_holdout = std::max(1, static_cast<int>(std::llround(cfg.holdout_fraction * cfg.n_scenes)));
    const int n_labeled = std::min(cfg.n_scenes, std::max(1, static_cast<int>(std::llround(cfg.labeled_ratio * cfg.n_scenes))));
    const int total = cfg.n_scenes + n_holdout;

    // one sub-seed per scene, drawn up front so the split layout cannot
    // perturb scene content
    Rng master(cfg.seed);
    std::vector<std::uint64_t> scene_seeds(total);
    for (auto& s : scene_seeds) s = master.next_u64();

    SynthDataset ds;
    for (int i = 0; i < total; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "scene_%05d", i);
        const bool in_train = i < cfg.n_scenes;
        const bool labeled = in_train && i < n_labeled;
        Scene s = make_scene(cfg, scene_seeds[i], id, labeled);
        if (!in_train) {
            ds.holdout.push_back(std::move(s));
        } else if (labeled) {
            ds.labeled.push_back(std::move(s));
        } else {
            ds.unlabeled.push_back(std::move(s));
        }
    }
    return ds;
}

namespace {

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void write_bytes(std::ofstream& os, const void* data, std::size_t n) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
}

class Reader {
public:
    Reader(const std::filesystem::path& path) : path_(path), is_(path, std::ios::binary) {
        if (!is_) throw std::runtime_error("dataset: cannot open '" + path.string() + "'");
    }

    template <typename T>
    T read_pod(const char* what) {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof(T));
        check(what, sizeof(T));
        return v;
    }

    void read_bytes(void* out, std::size_t n, const char* what) {
        is_.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n));
        check(what, n);
    }

    void set_record(long r) { record_ = r; }
    std::streamoff offset() { return is_.tellg(); }

private:
    void check(const char* what, std::size_t n) {
        if (!is_) {
            throw std::runtime_error("dataset parse error in '" + path_.string() + "': record " +
                                     std::to_string(record_) + ", truncated " + what + " near byte " +
                                     std::to_string(static_cast<long long>(last_ok_)) + " (wanted " +
                                     std::to_string(n) + " bytes)");
        }
        last_ok_ = is_.tellg();
    }

    std::filesystem::path path_;
    std::ifstream is_;
    long record_ = -1;  // -1 = header
    std::streamoff last_ok_ = 0;
};

}  // namespace

void save_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& path,
                  const std::string& config_echo_json) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("dataset: cannot write '" + path.string() + "'");

    write_bytes(os, kMagic, 4);
    write_pod(os, kFormatVersion);
    const auto echo_len = static_cast<std::uint32_t>(config_echo_json.size());
    write_pod(os, echo_len);
    write_bytes(os, config_echo_json.data(), config_echo_json.size());
    write_pod(os, static_cast<std::uint64_t>(scenes.size()));

    for (const Scene& s : scenes) {
        const auto id_len = static_cast<std::uint32_t>(s.scene_id.size());
        write_pod(os, id_len);
        write_bytes(os, s.scene_id.data(), s.scene_id.size());
        write_pod(os, static_cast<std::uint8_t>(s.is_labeled ? 1 : 0));
        write_pod(os, static_cast<std::uint8_t>(s.gt_points.has_value() ? 1 : 0));
        write_pod(os, static_cast<std::uint32_t>(s.field.height));
        write_pod(os, static_cast<std::uint32_t>(s.field.width));
        write_bytes(os, s.field.values.data(), s.field.values.size() * sizeof(float));
        if (s.gt_points) {
            write_pod(os, static_cast<std::uint32_t>(s.gt_points->size()));
            for (const Point2D& p : *s.gt_points) {
                write_pod(os, p.x);
                write_pod(os, p.y);
            }
        }
    }
    if (!os) throw std::runtime_error("dataset: write failed for '" + path.string() + "'");
}

std::vector<Scene> load_dataset(const std::filesystem::path& path) {
    Reader in(path);

    char magic[4];
    in.read_bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("dataset: '" + path.string() + "' is not a dataset file (bad magic)");
    const auto version = in.read_pod<std::uint32_t>("format version");
    if (version != kFormatVersion)
        throw std::runtime_error("dataset: '" + path.string() + "' has format version " +
                                 std::to_string(version) + ", expected " + std::to_string(kFormatVersion));
    const auto echo_len = in.read_pod<std::uint32_t>("config echo length");
    std::string echo(echo_len, '\0');
    if (echo_len > 0) in.read_bytes(echo.data(), echo_len, "config echo");
    const auto count = in.read_pod<std::uint64_t>("scene count");

    std::vector<Scene> scenes;
    scenes.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        in.set_record(static_cast<long>(i));
        Scene s;
        const auto id_len = in.read_pod<std::uint32_t>("scene id length");
        s.scene_id.resize(id_len);
        if (id_len > 0) in.read_bytes(s.scene_id.data(), id_len, "scene id");
        s.is_labeled = in.read_pod<std::uint8_t>("is_labeled flag") != 0;
        const bool has_gt = in.read_pod<std::uint8_t>("gt flag") != 0;
        const auto h = in.read_pod<std::uint32_t>("field height");
        const auto w = in.read_pod<std::uint32_t>("field width");
        if (h == 0 || w == 0 || h > 1u << 16 || w > 1u << 16)
            throw std::runtime_error("dataset parse error in '" + path.string() + "': record " +
                                     std::to_string(i) + ": implausible dimensions " + std::to_string(h) +
                                     "x" + std::to_string(w));
        s.field.height = static_cast<int>(h);
        s.field.width = static_cast<int>(w);
        s.field.values.resize(static_cast<std::size_t>(h) * w);
        in.read_bytes(s.field.values.data(), s.field.values.size() * sizeof(float), "field data");
        if (has_gt) {
            const auto n = in.read_pod<std::uint32_t>("gt point count");
            PointSet pts(n);
            for (auto& p : pts) {
                p.x = in.read_pod<double>("gt point x");
                p.y = in.read_pod<double>("gt point y");
            }
            s.gt_points = std::move(pts);
        }
        scenes.push_back(std::move(s));
    }
    return scenes;
}

std::string dataset_config_echo(const std::filesystem::path& path) {
    Reader in(path);
    char magic[4];
    in.read_bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("dataset: '" + path.string() + "' is not a dataset file (bad magic)");
    in.read_pod<std::uint32_t>("format version");
    const auto echo_len = in.read_pod<std::uint32_t>("config echo length");
    std::string echo(echo_len, '\0');
    if (echo_len > 0) in.read_bytes(echo.data(), echo_len, "config echo");
    return echo;
}

bool scenes_equal(const Scene& a, const Scene& b) {
    if (a.scene_id != b.scene_id || a.is_labeled != b.is_labeled) return false;
    if (a.field.height != b.field.height || a.field.width != b.field.width) return false;
    if (std::memcmp(a.field.values.data(), b.field.values.data(), a.field.values.size() * sizeof(float)) != 0)
        return false;
    if (a.gt_points.has_value() != b.gt_points.has_value()) return false;
    if (a.gt_points) {
        if (a.gt_points->size() != b.gt_points->size()) return false;
        for (std::size_t i = 0; i < a.gt_points->size(); ++i) {
            if ((*a.gt_points)[i].x != (*b.gt_points)[i].x) return false;
            if ((*a.gt_points)[i].y != (*b.gt_points)[i].y) return false;
        }
    }
    return true;
}

}  // namespace crowdloc
