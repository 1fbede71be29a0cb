#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace radfuse {

/// Fisher-Yates driven by raw mt19937_64 output, so a seed yields the same permutation
/// with every standard library (std::shuffle's use of the engine is unspecified).
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[static_cast<std::size_t>(rng() % i)]);
  }
}

}  // namespace radfuse
