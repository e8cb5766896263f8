#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

namespace linboost {

// Seed mixing (splitmix64 finalizer). Used to derive independent streams
// from a base seed plus a stream tag, e.g. one per run or per boosting round.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(base) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
}

/**
 * Deterministic random source.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard. The distributions are implemented here rather than taken from
 * <random> because the standard distributions are implementation-defined:
 *   - uniform():  (k + 0.5) * 2^-53 with k the top 53 bits of one draw,
 *                 so the result lies strictly inside (0, 1);
 *   - normal():   Box-Muller on two uniforms, both outputs used in turn;
 *   - below(n):   rejection sampling on the top bits, unbiased.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    double uniform() {
        constexpr double scale = 1.0 / 9007199254740992.0; // 2^-53
        return (static_cast<double>(next() >> 11) + 0.5) * scale;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    std::size_t below(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: empty range");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        // Smallest mask covering bound - 1.
        std::uint64_t mask = bound - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        for (;;) {
            const std::uint64_t v = next() & mask;
            if (v < bound) return static_cast<std::size_t>(v);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace linboost
