#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cocoa/tensor.hpp"

namespace cocoa {

// Elementwise (shapes must match exactly; no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_cols(const Tensor& a);  // [N x M] -> [N], sum over axis 1

// Linear algebra on 2-D tensors.
Tensor matmul(const Tensor& a, const Tensor& b);     // [N x K] . [K x M]
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T . b : [N x d],[N x e] -> [d x e]
Tensor transpose(const Tensor& a);
Tensor diag_part(const Tensor& a);  // [N x N] -> [N]
Tensor concat_cols(std::span<const Tensor> parts);

// Row-vector geometry (rows are d-dimensional embeddings).
Tensor row_normalize(const Tensor& a);                   // unit L2 rows; numeric_error on zero row
Tensor rowwise_dot(const Tensor& a, const Tensor& b);    // [N x d] x2 -> [N]
Tensor gram(const Tensor& a, const Tensor& b);           // [N x d],[M x d] -> [N x M] = a.b^T
Tensor upper_pairs_dot(const Tensor& a);                 // [N x d] -> [N(N-1)/2], pairs i<j
Tensor standardize_cols(const Tensor& a, double eps,
                        std::vector<std::size_t>* zero_variance_dims = nullptr);

// Network layers.
Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias);
Tensor layer_norm(const Tensor& input, const Tensor& gain, const Tensor& shift, double eps);
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor global_avg_pool(const Tensor& input);
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::uint32_t> labels);

}  // namespace cocoa
