#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cellgp {

using Index = std::ptrdiff_t;

/// Base error for this library. Subclasses distinguish caller mistakes
/// (ArgumentError), bad complex construction (ConstructionError) and
/// numerical failures (NumericError) so the CLI can map them to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : Error {
    using Error::Error;
};

struct ConstructionError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

/// 64-bit FNV-1a. Used for config/complex/basis fingerprints in artifacts.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hash_hex(std::string_view bytes) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic random stream. mt19937_64 has a standardised output
/// sequence and the transforms below avoid std::*_distribution, whose
/// results are implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

    /// Independent stream derived from the original seed, e.g. one per
    /// dimension or per draw set. Not affected by draws already made.
    Rng fork(std::uint64_t tag) const {
        return Rng(splitmix64(seed_ ^ splitmix64(tag)));
    }

    double uniform() {  // in (0,1)
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {  // Box-Muller, one branch per draw
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit =
            std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

    /// k distinct indices from [0, n), returned ascending.
    std::vector<Index> sample_without_replacement(Index n, Index k) {
        if (k < 0 || k > n) throw ArgumentError("sample_without_replacement: k out of range");
        std::vector<Index> pool(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
        for (Index i = 0; i < k; ++i) {
            Index j = i + static_cast<Index>(below(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
        }
        pool.resize(static_cast<std::size_t>(k));
        std::sort(pool.begin(), pool.end());
        return pool;
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace cellgp
