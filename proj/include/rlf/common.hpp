#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rlf {

// Error taxonomy: ValidationError for violated preconditions or inconsistent
// in-memory state, ParseError for malformed text input, FormatError for
// malformed binary input.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sentinel feature index for a node that routes every sample to its left child.
inline constexpr std::int32_t kInactive = -1;

// Smallest s with s*s >= v.
inline std::uint32_t ceil_sqrt(std::uint32_t v) {
    if (v == 0) return 0;
    std::uint64_t s = 1;
    while (s * s < v) ++s;
    return static_cast<std::uint32_t>(s);
}

}  // namespace rlf
