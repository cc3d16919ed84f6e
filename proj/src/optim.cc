#include "hydra/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hydra {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const Tensor& p : params_) {
    if (!p.requires_grad()) {
      throw std::invalid_argument("Adam parameter does not require grad");
    }
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto w = params_[k].mutable_data();
    auto g = params_[k].grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params) {
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Tensor& p : params) {
      for (double& g : p.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check step must be > 0");
  if (!x.requires_grad()) {
    throw std::invalid_argument("grad_check input must require grad");
  }
  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    x.zero_grad();
    Tensor y = f(x);
    if (!std::isfinite(y.item())) {
      throw EvaluationError("grad_check: f(x) is not finite");
    }
    tape.backward(y);
    analytic.assign(x.grad().begin(), x.grad().end());
    x.zero_grad();
  }
  NoGradScope no_grad;
  auto data = x.mutable_data();
  double worst = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double saved = data[i];
    data[i] = saved + step;
    const double fp = f(x).item();
    data[i] = saved - step;
    const double fm = f(x).item();
    data[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw EvaluationError("grad_check: f is not finite near x");
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace hydra
