#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace quanvseg {

// Unbiased integer in [0, n) by rejection. Unlike the standard
// distributions, the sequence is the same for every standard library.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = n ? ~std::uint64_t{0} - (~std::uint64_t{0} % n) : 0;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
void shuffle_in_place(std::span<T> items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace quanvseg
