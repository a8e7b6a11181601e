#pragma once
// Deterministic random streams.
//
// Every stochastic operation takes an explicit Rng. Experiments derive one
// substream per (master seed, image id, index) so results do not depend on
// the order in which images are processed. Only std::mt19937_64 raw output
// is used (its sequence is fixed by the standard); the conversion to doubles
// and indices is done here so streams are identical across standard
// libraries.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace cleverlabel {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n must be > 0.
    std::size_t uniform_index(std::size_t n);

private:
    std::mt19937_64 engine_;
};

// 64-bit FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view text) noexcept;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view stream_id,
                                 std::uint64_t index) noexcept;

inline Rng substream(std::uint64_t master_seed, std::string_view stream_id, std::uint64_t index = 0) {
    return Rng(derive_stream_seed(master_seed, stream_id, index));
}

}  // namespace cleverlabel
