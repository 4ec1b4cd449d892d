#pragma once

#include <cstdint>
#include <string>
#include <utility>

namespace vchat {

/// Caller-owned random state, passed by value. A splitmix64 sequence: the
/// whole generator is one 64-bit word, so it serializes trivially into
/// checkpoints and record provenance.
struct RngState {
    std::uint64_t value = 0;

    friend bool operator==(RngState, RngState) = default;
};

/// Returns (draw, advanced state).
std::pair<std::uint64_t, RngState> next_u64(RngState state) noexcept;

/// Uniform integer in [0, bound) without modulo bias. bound must be > 0.
std::pair<std::uint64_t, RngState> next_below(RngState state, std::uint64_t bound) noexcept;

/// Derives an independent stream (used for per-task states).
RngState split(RngState state, std::uint64_t stream) noexcept;

std::string to_hex(RngState state);
/// Throws Error(Parse).
RngState rng_from_hex(const std::string& text);

}  // namespace vchat
