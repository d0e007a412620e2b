#pragma once

// Counter-based, splittable random streams.
//
// A stream is identified by a 64-bit key. Draw i of the stream is
// splitmix64(key + i * golden), so a stream can be reproduced from its key
// and position alone. Child streams are derived by hashing (parent key,
// index, purpose tag); the result never depends on the order in which
// sibling streams are consumed.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace vmionet {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// FNV-1a, used only to turn purpose tags into integers.
constexpr std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace detail

/// Derive a child key from (parent seed, index, purpose tag).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index,
                                    std::string_view tag) {
    std::uint64_t k = detail::mix64(seed + detail::kGolden);
    k = detail::mix64(k ^ (index * detail::kGolden + 0x632BE59BD9B4E019ull));
    k = detail::mix64(k ^ detail::hash_tag(tag));
    return k;
}

class RandomStream {
public:
    explicit constexpr RandomStream(std::uint64_t key) : key_(key) {}

    RandomStream(std::uint64_t seed, std::uint64_t index, std::string_view tag)
        : key_(derive_seed(seed, index, tag)) {}

    [[nodiscard]] constexpr std::uint64_t key() const { return key_; }
    [[nodiscard]] constexpr std::uint64_t position() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::kGolden);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift; bias is < n / 2^64 and irrelevant here.
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    [[nodiscard]] RandomStream split(std::uint64_t index, std::string_view tag) const {
        return RandomStream(derive_seed(key_, index, tag));
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vmionet
