#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace flexgrid {

// Stable 64-bit FNV-1a; used to key random streams on identifiers so results
// do not depend on input ordering or on std::hash.
constexpr std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

// Named sub-seed derived from a root seed ("clustering", "synth", ...).
constexpr std::uint64_t sub_seed(std::uint64_t root, std::string_view name) {
    return mix_keys(root, fnv1a64(name));
}

// Counter-based stream: value i is a pure function of (key, i). Streams can be
// split by deriving new keys, so draws never depend on evaluation order.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

    constexpr CounterRng split(std::uint64_t tag) const { return CounterRng(mix_keys(key_, tag)); }
    constexpr CounterRng split(std::string_view tag) const { return split(fnv1a64(tag)); }

    constexpr std::uint64_t next_u64() { return mix_keys(key_, counter_++); }

    // Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal(double mean, double sd) {
        const double u1 = uniform();
        const double u2 = uniform();
        return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace flexgrid
