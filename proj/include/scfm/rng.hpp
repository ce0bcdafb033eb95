#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace scfm {

// Counter-based substream RNG: a 64-bit root seed plus a (purpose tag, index)
// pair is mixed into an independent stream. Draws depend only on the derived
// key, never on call order elsewhere in the program, so results are stable
// regardless of thread scheduling.
//
// std::mt19937_64 is fully specified by the standard; the uniform and normal
// transforms are done by hand because std::*_distribution algorithms are
// implementation-defined and would break cross-platform reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t key) : engine_(key) {}

    static std::uint64_t derive_key(std::uint64_t seed, std::string_view tag,
                                    std::uint64_t index) {
        std::uint64_t h = seed;
        h = splitmix(h ^ 0x9e3779b97f4a7c15ULL);
        for (char c : tag)
            h = splitmix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
        h = splitmix(h ^ index);
        return h;
    }

    static Rng substream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
        return Rng(derive_key(seed, tag, index));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Index in [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Rejection-free modulo bias is negligible for desk-scale n, but the
        // rejection loop keeps draws exactly uniform.
        const std::uint64_t limit = n * ((~0ULL) / n);
        std::uint64_t x = next_u64();
        while (x >= limit)
            x = next_u64();
        return x % n;
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace scfm
