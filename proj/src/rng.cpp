#include "vchat/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>

#include "vchat/error.hpp"

namespace vchat {

namespace {

std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::pair<std::uint64_t, RngState> next_u64(RngState state) noexcept {
    state.value += 0x9e3779b97f4a7c15ULL;
    return {mix(state.value), state};
}

std::pair<std::uint64_t, RngState> next_below(RngState state, std::uint64_t bound) noexcept {
    // Reject the top partial block so every residue is equally likely.
    const std::uint64_t limit = bound == 0 ? 0 : ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
        auto [draw, advanced] = next_u64(state);
        state = advanced;
        if (bound == 0) return {0, state};
        if (draw < limit) return {draw % bound, state};
    }
}

RngState split(RngState state, std::uint64_t stream) noexcept {
    return RngState{mix(state.value ^ mix(stream + 0x632be59bd9b4e019ULL))};
}

std::string to_hex(RngState state) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state.value));
    return buf;
}

RngState rng_from_hex(const std::string& text) {
    if (text.empty() || text.size() > 16 ||
        !std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isxdigit(c) != 0; }))
        fail(ErrorCode::Parse, "bad rng state '" + text + "'");
    char* end = nullptr;
    auto v = std::strtoull(text.c_str(), &end, 16);
    if (end != text.c_str() + text.size()) fail(ErrorCode::Parse, "bad rng state '" + text + "'");
    return RngState{v};
}

}  // namespace vchat
