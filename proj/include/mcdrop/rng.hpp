#pragma once

#include <cstdint>

namespace mcdrop {

// Counter-based random stream. Draw k of a stream is a pure function of
// (key, k), so a stream can be split into keyed substreams whose contents
// do not depend on how many draws the parent has made or in which order
// substreams are consumed.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    // Independent child stream keyed by id. Does not advance this stream.
    RngStream derive(std::uint64_t id) const;

    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    // Uniform integer on [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);
    // Standard normal (Box-Muller, no cached second variate).
    double normal();
    bool bernoulli(double p_true);

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    RngStream(std::uint64_t key, std::uint64_t counter, int) : key_(key), counter_(counter) {}

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace mcdrop
