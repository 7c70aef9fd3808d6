#include "cocoa/losses.hpp"

#include <string>

#include "cocoa/errors.hpp"
#include "cocoa/ops.hpp"

namespace cocoa {
namespace {

void check_embedding_set(const EmbeddingSet& z, std::size_t min_v, std::size_t min_n,
                         const char* op) {
  if (z.size() < min_v)
    throw config_error(std::string(op) + ": needs at least " + std::to_string(min_v) +
                       " modalities, got " + std::to_string(z.size()));
  std::size_t n = z[0].dim(0), d = z[0].dim(1);
  if (n < min_n)
    throw config_error(std::string(op) + ": needs batch size >= " + std::to_string(min_n) +
                       ", got " + std::to_string(n));
  for (const Tensor& zv : z)
    if (zv.dim(0) != n || zv.dim(1) != d)
      throw config_error(std::string(op) + ": inconsistent embedding shapes");
}

void check_two_views(const Tensor& anchor, const Tensor& other, const char* op) {
  if (anchor.shape() != other.shape())
    throw config_error(std::string(op) + ": view shapes disagree");
  if (anchor.dim(0) < 2)
    throw config_error(std::string(op) + ": needs batch size >= 2");
}

// -log( e^{s+} / (e^{s+} + n_neg * g) ) averaged over anchors.
Tensor dcl_from_parts(const Tensor& pos_e, const Tensor& g, double n_neg) {
  return mean(sub(log(add(pos_e, scale(g, n_neg))), log(pos_e)));
}

Tensor infonce_from_sims(const Tensor& sims, double tau) {
  Tensor e = exp(scale(sims, 1.0 / tau));
  Tensor pos = diag_part(e);
  Tensor denom = sum_cols(e);
  return mean(sub(log(denom), log(pos)));
}

}  // namespace

Tensor cocoa_positive_term(const EmbeddingSet& z, const CocoaHyper& hyper,
                           OpCounter* counter) {
  check_embedding_set(z, 2, 1, "cocoa_positive_term");
  if (hyper.tau <= 0.0) throw config_error("cocoa_positive_term: tau must be > 0");
  std::size_t v = z.size();
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t a = 0; a < v; ++a)
    for (std::size_t b = a + 1; b < v; ++b) {
      Tensor s = aligned_similarities(z[a], z[b], SimKind::cosine, counter);
      Tensor term = sum(exp(scale(add_scalar(neg(s), 1.0), 1.0 / hyper.tau)));
      // S is symmetric, so the unordered pair stands for both ordered ones
      acc = add(acc, scale(term, 2.0));
    }
  return acc;
}

Tensor cocoa_negative_term(const EmbeddingSet& z, const CocoaHyper& hyper,
                           OpCounter* counter) {
  check_embedding_set(z, 1, 2, "cocoa_negative_term");
  if (hyper.tau <= 0.0) throw config_error("cocoa_negative_term: tau must be > 0");
  Tensor acc = Tensor::scalar(0.0);
  for (const Tensor& zv : z) {
    Tensor s = intra_similarities(zv, SimKind::cosine, counter);
    // mean over the N(N-1) ordered pairs equals the mean over distinct pairs
    acc = add(acc, mean(exp(scale(s, 1.0 / hyper.tau))));
  }
  return acc;
}

Tensor cocoa_loss(const EmbeddingSet& z, const CocoaHyper& hyper, OpCounter* counter) {
  check_embedding_set(z, 2, 2, "cocoa_loss");
  Tensor pos = cocoa_positive_term(z, hyper, counter);
  Tensor neg_term = cocoa_negative_term(z, hyper, counter);
  return add(pos, scale(neg_term, hyper.lambda));
}

Tensor infonce_loss(const Tensor& anchor, const Tensor& other, double tau, SimKind kind,
                    OpCounter* counter) {
  check_two_views(anchor, other, "infonce_loss");
  if (tau <= 0.0) throw config_error("infonce_loss: tau must be > 0");
  Tensor sims = pair_similarities(anchor, other, kind, counter);
  return infonce_from_sims(sims, tau);
}

Tensor dcl_loss(const Tensor& anchor, const Tensor& other, double tau, double eps,
                SimKind kind, OpCounter* counter) {
  check_two_views(anchor, other, "dcl_loss");
  if (tau <= 0.0) throw config_error("dcl_loss: tau must be > 0");
  if (eps <= 0.0) throw config_error("dcl_loss: eps must be > 0");
  std::size_t n = anchor.dim(0);
  double n_neg = static_cast<double>(n - 1);
  Tensor e = exp(pair_similarities(anchor, other, kind, counter));
  Tensor pos = diag_part(e);
  Tensor neg_sum = sub(sum_cols(e), pos);
  Tensor g = clamp_min(scale(add(scale(neg_sum, 1.0 / n_neg), pos), 1.0 / tau), eps);
  return dcl_from_parts(pos, g, n_neg);
}

Tensor hard_dcl_loss(const Tensor& anchor, const Tensor& other, double tau, double eps,
                     double beta, SimKind kind, OpCounter* counter) {
  check_two_views(anchor, other, "hard_dcl_loss");
  if (tau <= 0.0) throw config_error("hard_dcl_loss: tau must be > 0");
  if (eps <= 0.0) throw config_error("hard_dcl_loss: eps must be > 0");
  if (beta < 0.0) throw config_error("hard_dcl_loss: beta must be >= 0");
  std::size_t n = anchor.dim(0);
  double n_neg = static_cast<double>(n - 1);
  Tensor e = exp(pair_similarities(anchor, other, kind, counter));
  Tensor e2 = mul(e, e);
  Tensor pos = diag_part(e);
  Tensor neg_e = sub(sum_cols(e), pos);
  Tensor neg_e2 = sub(sum_cols(e2), diag_part(e2));
  // sum_i w_i e^{s_i} with w_i = beta e^{s_i} / sum_j e^{s_j} over negatives
  Tensor weighted = scale(divide(neg_e2, neg_e), beta);
  Tensor g = clamp_min(scale(add(scale(weighted, 1.0 / n_neg), pos), 1.0 / tau), eps);
  return dcl_from_parts(pos, g, n_neg);
}

Tensor barlow_twins_loss(const Tensor& view_a, const Tensor& view_b, double lambda_bt,
                         double eps, BarlowDiagnostics* diag) {
  check_two_views(view_a, view_b, "barlow_twins_loss");
  std::size_t n = view_a.dim(0), d = view_a.dim(1);
  Tensor a = standardize_cols(view_a, eps, diag ? &diag->zero_variance_dims_a : nullptr);
  Tensor b = standardize_cols(view_b, eps, diag ? &diag->zero_variance_dims_b : nullptr);
  Tensor c = scale(matmul_tn(a, b), 1.0 / static_cast<double>(n));
  Tensor cd = diag_part(c);
  Tensor ones = Tensor::full({d}, 1.0);
  Tensor miss = sub(ones, cd);
  Tensor invariance = sum(mul(miss, miss));
  Tensor redundancy = sub(sum(mul(c, c)), sum(mul(cd, cd)));
  return add(invariance, scale(redundancy, lambda_bt));
}

Tensor cmc_loss(const EmbeddingSet& z, double tau, OpCounter* counter) {
  check_embedding_set(z, 2, 2, "cmc_loss");
  if (tau <= 0.0) throw config_error("cmc_loss: tau must be > 0");
  std::size_t v = z.size();
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t a = 0; a < v; ++a)
    for (std::size_t b = a + 1; b < v; ++b) {
      Tensor sims = pair_similarities(z[a], z[b], SimKind::cosine, counter);
      acc = add(acc, infonce_from_sims(sims, tau));
      acc = add(acc, infonce_from_sims(transpose(sims), tau));
    }
  return acc;
}

std::uint64_t count_formula(CountMethod method, std::uint64_t v, std::uint64_t n) {
  switch (method) {
    case CountMethod::cocoa:
      return n * v * (v - 1) / 2 + v * n * (n - 1) / 2;
    case CountMethod::cmc:
      return v * (v - 1) / 2 * n * n;
  }
  throw usage_error("count_formula: unknown method");
}

}  // namespace cocoa
