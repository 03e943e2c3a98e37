#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace woc {

// Build a message from heterogeneous parts: str("got ", 3, " items").
template <typename... Args>
std::string str(Args&&... args) {
    std::ostringstream out;
    (out << ... << args);
    return out.str();
}

// FNV-1a, 64-bit. Used for content digests and for deriving RNG streams
// from strings; must stay stable across platforms.
inline uint64_t fnv1a64(const void* bytes, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

} // namespace woc
