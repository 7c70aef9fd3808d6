#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cocoa/losses.hpp"
#include "cocoa/rng.hpp"
#include "cocoa/tensor.hpp"

namespace testutil {

inline cocoa::Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                                   double mean = 0.0, double stddev = 1.0) {
  cocoa::Tensor t = cocoa::Tensor::zeros(std::move(shape));
  for (double& x : t.data()) x = cocoa::gaussian(rng, mean, stddev);
  return t;
}

inline cocoa::EmbeddingSet random_embeddings(std::size_t v, std::size_t n, std::size_t d,
                                             std::mt19937_64& rng) {
  cocoa::EmbeddingSet z;
  for (std::size_t m = 0; m < v; ++m) z.push_back(random_tensor({n, d}, rng));
  return z;
}

/// Relative once values are O(1) or larger, absolute below that.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testutil
