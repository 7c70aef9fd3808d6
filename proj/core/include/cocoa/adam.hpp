#pragma once

#include <cstdint>
#include <vector>

#include "cocoa/tensor.hpp"

namespace cocoa {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction, bound to a fixed parameter list. Moment buffers
/// are zero-initialized; step_count increments by exactly one per step().
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config = {});

  /// Applies one update using each parameter's current gradient buffer.
  void step();

  std::uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig config_;
  std::uint64_t step_count_ = 0;
};

}  // namespace cocoa
