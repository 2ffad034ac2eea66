#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace crowdloc {

/// Deterministic random source. All draws are derived directly from the
/// engine's integer output so the stream does not depend on distribution
/// internals, and the full state round-trips through a text string.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Box-Muller (cosine branch). Two engine draws per sample, no carried
    /// state between calls.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        return mean + stddev * r * std::cos(two_pi * u2);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    static Rng deserialize(const std::string& text) {
        Rng r;
        std::istringstream is(text);
        is >> r.engine_;
        if (is.fail()) throw std::runtime_error("rng: malformed serialized state");
        return r;
    }

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace crowdloc
