#pragma once

#include <cstdint>
#include <string>

namespace gspkit {

// splitmix64 finalizer
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    return mix64(seed ^ mix64(stream));
}

// FNV-1a over bytes; stable across builds
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

// sub-seed for a pipeline stage: stable in (stage, index), independent per stage
inline uint64_t stage_seed(uint64_t master, const std::string& stage, uint64_t index = 0) {
    return mix_seed(master, fnv1a(stage) ^ mix64(index));
}

}  // namespace gspkit
