#pragma once

// Central finite-difference gradient verification. The loss builder is invoked
// once under a tape for analytic gradients and then twice per coordinate with
// perturbed leaf data, so it must be a pure function of the leaf tensors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cocoa/tensor.hpp"

namespace testutil {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t coordinates = 0;
};

inline GradCheckResult gradcheck(const std::function<cocoa::Tensor()>& loss_fn,
                                 std::vector<cocoa::Tensor> leaves, double h = 1e-5) {
  std::vector<std::vector<double>> analytic;
  {
    cocoa::Tape tape;
    for (cocoa::Tensor& leaf : leaves) leaf.mark_trainable(tape);
    cocoa::Tensor loss = loss_fn();
    tape.backward(loss);
    for (cocoa::Tensor& leaf : leaves) {
      auto g = leaf.grad();
      analytic.emplace_back(g.begin(), g.end());
      leaf.impl()->tape = nullptr;
      leaf.impl()->grad.clear();
    }
  }

  GradCheckResult result;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto data = leaves[l].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      double saved = data[i];
      data[i] = saved + h;
      double up = loss_fn().value();
      data[i] = saved - h;
      double down = loss_fn().value();
      data[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double a = analytic[l][i];
      double err = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
      result.max_rel_err = std::max(result.max_rel_err, err);
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace testutil
