#pragma once

#include <cstdint>

#include "resdiff/tensor.hpp"

namespace resdiff {

/// Counter-based pseudo-random stream. Output i is a pure function of
/// (seed, counter + i), so a stream can be replayed from its construction
/// arguments, and derive() yields statistically independent substreams for
/// parallel work without coordination.
///
/// Normal variates use the Box-Muller cosine branch only: every gaussian
/// consumes exactly two counter values and no state is cached, which keeps
/// (seed, counter) a complete description of the stream position. This is
/// the fixed variate recipe; golden files depend on it.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    /// Independent substream keyed by `key`; the parent is not advanced.
    RandomStream derive(std::uint64_t key) const;

    std::uint64_t next_u64();
    double next_uniform();        // [0, 1)
    double next_uniform_open();   // (0, 1]
    double next_gaussian();       // standard normal

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

/// i.i.d. standard-normal tensor of the given shape; advances the stream.
Tensor gaussian(RandomStream& stream, const Shape& shape);

/// i.i.d. uniform tensor on [lo, hi); advances the stream.
Tensor uniform(RandomStream& stream, const Shape& shape, double lo, double hi);

}  // namespace resdiff
