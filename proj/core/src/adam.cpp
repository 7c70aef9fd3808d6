#include "cocoa/adam.hpp"

#include <cmath>
#include <string>

#include "cocoa/errors.hpp"

namespace cocoa {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  double t = static_cast<double>(step_count_);
  double bc1 = 1.0 - std::pow(config_.beta1, t);
  double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad())
      throw usage_error("Adam::step: parameter " + std::to_string(i) + " has no gradient");
    auto g = p.grad();
    auto x = p.data();
    auto& m = m_[i];
    auto& v = v_[i];
    if (g.size() != m.size())
      throw usage_error("Adam::step: parameter " + std::to_string(i) + " changed size");
    for (std::size_t j = 0; j < m.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      x[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace cocoa
