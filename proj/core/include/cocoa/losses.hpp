#pragma once

#include <cstdint>
#include <vector>

#include "cocoa/similarity.hpp"
#include "cocoa/tensor.hpp"

namespace cocoa {

struct CocoaHyper {
  double tau = 0.1;     // temperature
  double lambda = 1.0;  // discriminator weight
};

struct BarlowDiagnostics {
  std::vector<std::size_t> zero_variance_dims_a;
  std::vector<std::size_t> zero_variance_dims_b;
};

/// An EmbeddingSet is one [N x d] matrix per modality.
using EmbeddingSet = std::vector<Tensor>;

/// Cross-modality correlation term: sum over samples and ordered modality
/// pairs (v,w), v != w, of exp((1 - S_vw^tt)/tau). Symmetry is exploited so
/// only V(V-1)/2 * N unique similarities are evaluated.
Tensor cocoa_positive_term(const EmbeddingSet& z, const CocoaHyper& hyper,
                           OpCounter* counter = nullptr);

/// Intra-modality discriminator: per modality, the mean over the N(N-1)
/// ordered off-diagonal pairs of exp(S_vv^tt'/tau), summed over modalities.
/// Only N(N-1)/2 unique similarities per modality are evaluated.
Tensor cocoa_negative_term(const EmbeddingSet& z, const CocoaHyper& hyper,
                           OpCounter* counter = nullptr);

/// cocoa_positive_term + lambda * cocoa_negative_term.
Tensor cocoa_loss(const EmbeddingSet& z, const CocoaHyper& hyper,
                  OpCounter* counter = nullptr);

Tensor infonce_loss(const Tensor& anchor, const Tensor& other, double tau,
                    SimKind kind = SimKind::cosine, OpCounter* counter = nullptr);

Tensor dcl_loss(const Tensor& anchor, const Tensor& other, double tau, double eps,
                SimKind kind = SimKind::cosine, OpCounter* counter = nullptr);

Tensor hard_dcl_loss(const Tensor& anchor, const Tensor& other, double tau, double eps,
                     double beta, SimKind kind = SimKind::cosine,
                     OpCounter* counter = nullptr);

Tensor barlow_twins_loss(const Tensor& view_a, const Tensor& view_b, double lambda_bt,
                         double eps = 1e-9, BarlowDiagnostics* diag = nullptr);

/// Sum of InfoNCE over all ordered modality pairs; the N^2 similarities of an
/// unordered pair are computed once and reused for both directions.
Tensor cmc_loss(const EmbeddingSet& z, double tau, OpCounter* counter = nullptr);

enum class CountMethod { cocoa, cmc };

/// Closed-form unique-similarity count per loss evaluation.
std::uint64_t count_formula(CountMethod method, std::uint64_t num_modalities,
                            std::uint64_t batch_size);

}  // namespace cocoa
