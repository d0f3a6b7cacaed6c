#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pairkit {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a over raw bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::string hex64(std::uint64_t value);

/// FNV-1a of a file's full contents, as 16 hex digits.
std::string file_digest(const std::string& path);

}  // namespace pairkit
