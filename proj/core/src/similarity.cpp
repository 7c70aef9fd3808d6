#include "cocoa/similarity.hpp"

#include <cmath>

#include "cocoa/errors.hpp"
#include "cocoa/ops.hpp"

namespace cocoa {
namespace {

Tensor prepared(const Tensor& a, SimKind kind) {
  return kind == SimKind::cosine ? row_normalize(a) : a;
}

void count(OpCounter* counter, std::uint64_t n) {
  if (counter) counter->similarity_evaluations += n;
}

}  // namespace

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw config_error("cosine_sim: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw numeric_error("cosine_sim: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Tensor aligned_similarities(const Tensor& a, const Tensor& b, SimKind kind,
                            OpCounter* counter) {
  Tensor out = rowwise_dot(prepared(a, kind), prepared(b, kind));
  count(counter, a.dim(0));
  return out;
}

Tensor pair_similarities(const Tensor& a, const Tensor& b, SimKind kind,
                         OpCounter* counter) {
  Tensor out = gram(prepared(a, kind), prepared(b, kind));
  count(counter, static_cast<std::uint64_t>(a.dim(0)) * b.dim(0));
  return out;
}

Tensor intra_similarities(const Tensor& a, SimKind kind, OpCounter* counter) {
  Tensor out = upper_pairs_dot(prepared(a, kind));
  std::uint64_t n = a.dim(0);
  count(counter, n * (n - 1) / 2);
  return out;
}

}  // namespace cocoa
