#include "cocoa/tensor.hpp"

#include <utility>

#include "cocoa/errors.hpp"

namespace cocoa {

std::size_t shape_size(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor Tensor::wrap(std::shared_ptr<detail::TensorImpl> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  return full(std::move(shape), 0.0);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  auto impl = std::make_shared<detail::TensorImpl>();
  std::size_t n = shape_size(shape);
  impl->shape = std::move(shape);
  impl->data.assign(n, value);
  return wrap(std::move(impl));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> values) {
  if (shape_size(shape) != values.size())
    throw usage_error("from_data: shape product " + std::to_string(shape_size(shape)) +
                       " != value count " + std::to_string(values.size()));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return wrap(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

const std::vector<std::size_t>& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::size() const { return impl_->data.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size())
    throw usage_error("dim: axis " + std::to_string(axis) + " out of range");
  return impl_->shape[axis];
}

std::span<double> Tensor::data() { return impl_->data; }
std::span<const double> Tensor::data() const { return impl_->data; }

bool Tensor::has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw usage_error("grad: tensor has no gradient buffer");
  return impl_->grad;
}

std::span<double> Tensor::grad() {
  if (!has_grad()) throw usage_error("grad: tensor has no gradient buffer");
  return impl_->grad;
}

double Tensor::value() const {
  if (size() != 1) throw usage_error("value: tensor is not a scalar");
  return impl_->data[0];
}

void Tensor::mark_trainable(Tape& tape) {
  impl_->tape = &tape;
  impl_->grad.assign(impl_->data.size(), 0.0);
}

Tensor Tensor::detached_copy() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return wrap(std::move(impl));
}

Tape* Tensor::tape() const { return impl_ ? impl_->tape : nullptr; }

void Tape::record(std::function<void()> backward_step) {
  nodes_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw usage_error("backward: tape already consumed");
  if (loss.size() != 1) throw usage_error("backward: loss must be a scalar");
  if (loss.tape() != nullptr && loss.tape() != this)
    throw usage_error("backward: loss was not produced on this tape");
  // A constant loss (no tape) is legal: every trainable leaf keeps its zero
  // gradient and the tape is still consumed.
  if (loss.tape() == this) {
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }
  consumed_ = true;
}

}  // namespace cocoa
