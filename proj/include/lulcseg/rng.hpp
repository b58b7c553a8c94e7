#pragma once

#include <random>
#include <vector>

namespace lulcseg {

// Fisher-Yates with explicit draws, so shuffles reproduce across standard
// libraries and platforms for a given seed.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace lulcseg
