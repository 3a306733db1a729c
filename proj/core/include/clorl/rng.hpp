#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace clorl {

/// Deterministic random source passed around by value. Streams for
/// independent consumers (init, sampling, noise, eval, ...) are derived
/// with split(), so adding a draw in one place never shifts another
/// stream. Normal variates use Box-Muller on 53-bit uniforms instead of
/// std::normal_distribution, which keeps byte-level reproducibility
/// independent of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Derive an independent stream from this one and a tag.
    Rng split(std::uint64_t tag) {
        std::uint64_t s = mix(engine_()) ^ mix(tag * 0x9e3779b97f4a7c15ULL + 1);
        return Rng(s);
    }
    Rng split(std::string_view tag) { return split(fnv1a(tag)); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = engine_(); } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace clorl
