#include "resdiff/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace resdiff {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer; full-avalanche 64-bit mix.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

RandomStream RandomStream::derive(std::uint64_t key) const {
    const std::uint64_t child = mix64(seed_ ^ mix64((key + 1) * kGolden));
    return RandomStream(child, 0);
}

std::uint64_t RandomStream::next_u64() {
    const std::uint64_t value = mix64(seed_ + counter_ * kGolden);
    ++counter_;
    return value;
}

double RandomStream::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::next_uniform_open() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RandomStream::next_gaussian() {
    const double u1 = next_uniform_open();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor gaussian(RandomStream& stream, const Shape& shape) {
    if (shape.empty()) throw std::invalid_argument("gaussian: empty shape descriptor");
    Tensor out(shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stream.next_gaussian();
    return out;
}

Tensor uniform(RandomStream& stream, const Shape& shape, double lo, double hi) {
    if (shape.empty()) throw std::invalid_argument("uniform: empty shape descriptor");
    Tensor out(shape);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lo + (hi - lo) * stream.next_uniform();
    return out;
}

}  // namespace resdiff
