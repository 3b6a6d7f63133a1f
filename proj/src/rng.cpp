#include "mcdrop/rng.hpp"

#include <cmath>
#include <numbers>

#include "mcdrop/errors.hpp"

namespace mcdrop {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
}  // namespace

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : key_(mix64(mix64(seed + kGolden) + mix64(stream_id ^ kStreamSalt))) {}

RngStream RngStream::derive(std::uint64_t id) const {
    return RngStream(mix64(key_ ^ mix64((id + 1) * kStreamSalt)), 0, 0);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t c = counter_++;
    return mix64(mix64((c + 1) * kGolden + key_) + key_);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n == 0) {
        throw InvalidArgument("RngStream::below: n must be positive");
    }
    // Rejection keeps the draw unbiased for every n.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

double RngStream::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool RngStream::bernoulli(double p_true) {
    return uniform() < p_true;
}

}  // namespace mcdrop
