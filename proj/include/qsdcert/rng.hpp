#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qsdcert {

/// Derives an independent stream key from a run seed and a tuple of
/// identifiers (path index, checkpoint, batch, ...). SplitMix64 finalizer
/// chained over the tuple.
std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> ids);

/// Per-path random stream. Uniform and exponential variates are produced from
/// raw engine output with fixed formulas so that a given key yields the same
/// numbers on every platform.
class Stream {
public:
    explicit Stream(std::uint64_t key) : engine_(key) {}
    Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids)
        : engine_(stream_key(seed, ids)) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Exponential with the given rate; +inf when rate is 0.
    double exponential(double rate);
    /// Uniform index in [0, n).
    std::uint64_t index(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace qsdcert
