#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace seqtree {

// Counter-based pseudo-random stream (splitmix64 core).  Every consumer of
// randomness derives its own stream from the master seed plus a stream label
// and integer coordinates (replicate, time step, particle index, ...), so a
// run is reproducible regardless of evaluation order and a restored
// checkpoint continues bit-for-bit.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    result_type operator()() { return next(); }

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Uniform on [0, 1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return std::uint64_t(uniform() * double(n)) % n;
    }

    // Standard normal via Box-Muller (implementation-independent, unlike
    // std::normal_distribution).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Index draw from unnormalized nonnegative weights.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

// Named randomness streams hanging off a single master seed.
enum class Stream : std::uint64_t {
    data_noise = 1,
    lhs = 2,
    resample = 3,
    propagate = 4,
    reorder = 5,
    init_design = 6,
    replicate = 7,
    misc = 8,
};

inline Rng substream(std::uint64_t seed, Stream id,
                     std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = seed;
    h = Rng::mix(h ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(id)));
    h = Rng::mix(h ^ (0xC2B2AE3D27D4EB4Full * (a + 1)));
    h = Rng::mix(h ^ (0x165667B19E3779F9ull * (b + 1)));
    return Rng(h);
}

}  // namespace seqtree
