#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace cocoa {

class Tape;

namespace detail {
struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, zero-filled
  Tape* tape = nullptr;
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};
}  // namespace detail

std::size_t shape_size(std::span<const std::size_t> shape);

/// Dense row-major f64 array, optionally attached to a gradient tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<double> data();
  std::span<const double> data() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad();

  /// Value of a scalar tensor; throws usage_error otherwise.
  double value() const;

  /// Marks this tensor as a trainable leaf of `tape` and zeroes its gradient.
  void mark_trainable(Tape& tape);

  /// Deep copy with no tape attachment.
  Tensor detached_copy() const;

  Tape* tape() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Records operations in creation order; replaying them in reverse computes
/// adjoints for every trainable leaf. Single use.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_step);

  /// Seeds `loss` (a live scalar on this tape) with adjoint 1 and replays the
  /// tape in reverse. Throws usage_error on a non-scalar loss or a second call.
  void backward(const Tensor& loss);

  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
  bool consumed_ = false;
};

}  // namespace cocoa
