#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace headbal {

// splitmix64 step; used to derive independent substream seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Hashes a seed plus a path of stream identifiers into a new 64-bit seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

// Deterministic random source. The engine is std::mt19937_64 (its output
// sequence is pinned by the standard); all value transforms are done here
// rather than with std:: distributions so that streams are identical across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller.
    double normal();

    // Inclusive range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace headbal
