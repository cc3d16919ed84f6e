#include "hydra/tensor.h"

#include <algorithm>
#include <sstream>

namespace hydra {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value,
                    bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, value),
              requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols,
                    std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols) {
    throw DimensionError("tensor data of length " +
                         std::to_string(values.size()) +
                         " does not fill shape " + Shape{rows, cols}.str());
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = {rows, cols};
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(rows * cols, 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(1, 1, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on non-scalar tensor " + shape().str());
  }
  return impl_->data[0];
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return from(rows(), cols(), impl_->data, false);
}

Tensor Tape::record(Shape shape, std::vector<double> values, bool needs_grad,
                    std::function<void(detail::TensorImpl& out)> backward) {
  Tensor out = Tensor::from(shape.rows, shape.cols, std::move(values),
                            needs_grad);
  if (needs_grad) nodes_.push_back({out.impl_, std::move(backward)});
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " +
                         loss.shape().str());
  }
  if (!loss.requires_grad()) return;
  loss.impl_->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->backward(*it->out);
  }
}

void Tape::clear() { nodes_.clear(); }

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) {
  g_active_tape = nullptr;
}
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

}  // namespace hydra
