#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydra {

// Thrown on incompatible operand shapes; the message carries both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t numel() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major 2-D tensor of doubles with optional gradient storage.
///
/// A Tensor is a cheap handle; copies alias the same storage. Operations in
/// ops.h record their backward rule on the thread's active Tape whenever one
/// of their operands requires a gradient.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols,
                      bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value,
                     bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols,
                     std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rows() const { return impl_->shape.rows; }
  std::size_t cols() const { return impl_->shape.cols; }
  std::size_t numel() const { return impl_->shape.numel(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double at(std::size_t r, std::size_t c) const {
    return impl_->data[r * impl_->shape.cols + c];
  }
  // Value of a 1x1 tensor.
  double item() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->grad; }
  void zero_grad();

  // Deep copy with no gradient and no tape history.
  Tensor detach() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& shared_impl() const {
    return impl_;
  }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorImpl> impl_;

  friend class Tape;
};

/// Ordered record of differentiable operations for one step.
///
/// Nodes are appended in execution order, so every node's parents precede it
/// and a reverse sweep applies the chain rule exactly. Gradients accumulate.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Creates a result tensor. When `needs_grad` is set (some parent requires a
  // gradient) the result carries a gradient buffer and `backward` is kept.
  Tensor record(Shape shape, std::vector<double> values, bool needs_grad,
                std::function<void(detail::TensorImpl& out)> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule in reverse.
  void backward(const Tensor& loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::shared_ptr<detail::TensorImpl> out;
    std::function<void(detail::TensorImpl&)> backward;
  };
  std::vector<Node> nodes_;
};

// The tape operations record onto for the current thread, or nullptr.
Tape* active_tape();

/// Makes `tape` the thread's active tape for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Disables recording for the scope's lifetime (inference).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace hydra
