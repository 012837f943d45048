#pragma once

#include <cstdint>
#include <cstring>
#include <span>

namespace ism {

// FNV-1a over raw bytes; used for bit-exact parameter checksums.
inline uint64_t fnv1a(std::span<const unsigned char> bytes, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a_doubles(std::span<const double> values, uint64_t h = 0xcbf29ce484222325ULL) {
    for (double v : values) {
        unsigned char raw[sizeof(double)];
        std::memcpy(raw, &v, sizeof(double));
        h = fnv1a(std::span<const unsigned char>(raw, sizeof(double)), h);
    }
    return h;
}

}  // namespace ism
