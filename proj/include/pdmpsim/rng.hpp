#pragma once

#include <array>
#include <cstdint>

namespace pdmpsim {

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// Philox4x32-10 block function.
PhiloxBlock philox4x32(PhiloxBlock ctr, PhiloxKey key);

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based generator: (seed, stream) selects a key and the high half of
// the counter, so every stream is an independent, reproducible sequence.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    double uniform();      // [0, 1)
    double exponential();  // Exp(1)
    double normal();       // N(0, 1), Box-Muller

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    void refill();

    std::uint64_t seed_, stream_;
    PhiloxKey key_{};
    std::uint64_t block_ = 0;
    PhiloxBlock buf_{};
    int pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stream id for replicate r of ladder level n in a study.
std::uint64_t replicate_stream(std::uint64_t level, std::uint64_t replicate, std::uint64_t salt = 0);

}  // namespace pdmpsim
