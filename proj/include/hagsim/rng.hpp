#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace hagsim {

// One named random stream per stochastic source (per-link loss, per-app
// jitter). Identical (seed, label) always yields the identical draw
// sequence, and adding a new source never perturbs an existing one.
class RngStream {
public:
    RngStream() : RngStream(0, "") {}

    RngStream(std::uint64_t seed, std::string_view label)
        : seed_(seed), label_(label), engine_(mix(seed, fnv1a(label))) {}

    // Uniform double in [0, 1). Built from the raw 64-bit draw so the
    // sequence does not depend on the standard library's distribution
    // implementation.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [lo, hi] via rejection-free modulo of a wide draw;
    // bias is negligible for the ranges used here and the mapping is fixed.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        return lo + engine_() % (hi - lo + 1);
    }

    std::uint64_t seed() const { return seed_; }
    const std::string& label() const { return label_; }

private:
    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

    // splitmix64 finalizer over seed^label-hash.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t label_hash) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + label_hash;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::string label_;
    std::mt19937_64 engine_;
};

} // namespace hagsim
