#pragma once

// Deterministic random streams.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distribution helpers below are written out by hand because
// the std:: distributions are implementation-defined and would make results
// differ between standard libraries.

#include <cstdint>
#include <random>
#include <string_view>

namespace netsched {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent sub-stream of a root seed, keyed by name. Adding a new
    /// named stream never shifts the values drawn from existing ones.
    static Rng substream(std::uint64_t root_seed, std::string_view name) {
        return Rng(splitmix64(root_seed ^ splitmix64(fnv1a(name))));
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [lo, hi], unbiased by rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next());
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
        std::uint64_t r = next();
        while (r >= limit) r = next();
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Uniform real in [lo, hi).
    double uniform_real(double lo, double hi) {
        const double unit = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * unit;
    }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
    }

  private:
    std::mt19937_64 engine_;
};

} // namespace netsched
