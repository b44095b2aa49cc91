#pragma once

#include <cstdint>

namespace ifaq {

// splitmix64 (Steele, Lea, Flood); fixed constants keep generated data and
// tests byte-identical across platforms.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    long long below(long long n) { return (long long)(next() % (std::uint64_t)n); }

    double unit() { return double(next() >> 11) * 0x1.0p-53; }
};

}  // namespace ifaq
