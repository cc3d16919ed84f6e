#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hydra/tensor.h"

namespace hydra {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Plain Adam with bias correction over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  void step();
  void zero_grad();

  std::int64_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamOptions options_;
  std::int64_t t_ = 0;
};

// Rescales gradients so their global L2 norm is at most `max_norm`. Returns
// the norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

// Thrown when the checked function is not finite at the probe point.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Compares the tape gradient of scalar `f` at `x` with central differences.
///
/// Returns max_i |analytic_i - numeric_i| / max(1, |analytic_i|). `x` must
/// require a gradient; its data is restored on return.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  double step = 1e-6);

}  // namespace hydra
