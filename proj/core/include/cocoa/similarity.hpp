#pragma once

#include <cstdint>
#include <span>

#include "cocoa/tensor.hpp"

namespace cocoa {

/// Counts unique vector-pair similarity evaluations, the atomic cost unit of
/// the contrastive objectives.
struct OpCounter {
  std::uint64_t similarity_evaluations = 0;
};

enum class SimKind { cosine, dot };

/// Plain cosine similarity of two vectors. Throws numeric_error on a
/// zero-norm input.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Instrumented similarity kernels over embedding matrices [N x d]. Each kernel
// bumps the counter once per vector pair it actually evaluates.

/// Row-aligned similarities: out[t] = sim(a_t, b_t). Counts N.
Tensor aligned_similarities(const Tensor& a, const Tensor& b, SimKind kind,
                            OpCounter* counter = nullptr);

/// All-pairs similarities: out[i][j] = sim(a_i, b_j). Counts N*M.
Tensor pair_similarities(const Tensor& a, const Tensor& b, SimKind kind,
                         OpCounter* counter = nullptr);

/// Distinct intra-set pairs i<j of one matrix, flattened. Counts N(N-1)/2.
Tensor intra_similarities(const Tensor& a, SimKind kind, OpCounter* counter = nullptr);

}  // namespace cocoa
