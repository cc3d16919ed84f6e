#include "hydra/ops.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace hydra {

namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<RowMajor> as_matrix(double* p, std::size_t r, std::size_t c) {
  return {p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}
Eigen::Map<const RowMajor> as_matrix(const double* p, std::size_t r,
                                     std::size_t c) {
  return {p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

using Impl = detail::TensorImpl;
using ImplPtr = std::shared_ptr<Impl>;

Tensor emit(Shape shape, std::vector<double> values, bool needs_grad,
            std::function<void(Impl&)> backward) {
  if (Tape* tape = active_tape()) {
    return tape->record(shape, std::move(values), needs_grad,
                        std::move(backward));
  }
  return Tensor::from(shape.rows, shape.cols, std::move(values));
}

Tensor emit(Shape shape, std::vector<double> values,
            std::initializer_list<const Tensor*> parents,
            std::function<void(Impl&)> backward) {
  bool needs_grad = false;
  for (const Tensor* p : parents) needs_grad = needs_grad || p->requires_grad();
  return emit(shape, std::move(values), needs_grad, std::move(backward));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a,
                              const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       a.shape().str() + " and " + b.shape().str());
}

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// Elementwise binary op with scalar broadcast on either side. `dx`/`dy` give
// the local partials given (x, y, out).
template <typename F, typename DX, typename DY>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, DX dx,
              DY dy) {
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    shape_error(name, a, b);
  }
  const Shape shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(ad[a_scalar ? 0 : i], bd[b_scalar ? 0 : i]);
  }
  ImplPtr ai = a.shared_impl();
  ImplPtr bi = b.shared_impl();
  return emit(shape, std::move(out), {&a, &b},
              [ai, bi, a_scalar, b_scalar, n, dx, dy](Impl& o) {
                for (std::size_t i = 0; i < n; ++i) {
                  const std::size_t ia = a_scalar ? 0 : i;
                  const std::size_t ib = b_scalar ? 0 : i;
                  const double x = ai->data[ia];
                  const double y = bi->data[ib];
                  const double g = o.grad[i];
                  if (ai->requires_grad) ai->grad[ia] += g * dx(x, y, o.data[i]);
                  if (bi->requires_grad) bi->grad[ib] += g * dy(x, y, o.data[i]);
                }
              });
}

// Elementwise unary op; `d` gives the local derivative given (x, out).
template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D d) {
  const std::size_t n = x.numel();
  auto xd = x.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(xd[i]);
  ImplPtr xi = x.shared_impl();
  return emit(x.shape(), std::move(out), {&x}, [xi, n, d](Impl& o) {
    for (std::size_t i = 0; i < n; ++i) {
      xi->grad[i] += o.grad[i] * d(xi->data[i], o.data[i]);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  as_matrix(out.data(), m, n).noalias() =
      as_matrix(a.data().data(), m, k) * as_matrix(b.data().data(), k, n);
  ImplPtr ai = a.shared_impl();
  ImplPtr bi = b.shared_impl();
  return emit({m, n}, std::move(out), {&a, &b}, [ai, bi, m, k, n](Impl& o) {
    const auto g = as_matrix(o.grad.data(), m, n);
    if (ai->requires_grad) {
      as_matrix(ai->grad.data(), m, k).noalias() +=
          g * as_matrix(bi->data.data(), k, n).transpose();
    }
    if (bi->requires_grad) {
      as_matrix(bi->grad.data(), k, n).noalias() +=
          as_matrix(ai->data.data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto xd = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xd[i * n + j];
  }
  ImplPtr xi = x.shared_impl();
  return emit({n, m}, std::move(out), {&x}, [xi, m, n](Impl& o) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        xi->grad[i * n + j] += o.grad[j * m + i];
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

// Ties route the gradient to the first operand.
Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      "minimum", a, b, [](double x, double y) { return std::min(x, y); },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      "maximum", a, b, [](double x, double y) { return std::max(x, y); },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; },
      [](double, double) { return 1.0; });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    shape_error("add_row", x, bias);
  }
  const std::size_t m = x.rows(), n = x.cols();
  auto xd = x.data();
  auto bd = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xd[i * n + j] + bd[j];
  }
  ImplPtr xi = x.shared_impl();
  ImplPtr bi = bias.shared_impl();
  return emit({m, n}, std::move(out), {&x, &bias}, [xi, bi, m, n](Impl& o) {
    if (xi->requires_grad) {
      for (std::size_t i = 0; i < m * n; ++i) xi->grad[i] += o.grad[i];
    }
    if (bi->requires_grad) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) bi->grad[j] += o.grad[i * n + j];
      }
    }
  });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) {
      throw DomainError("log of non-positive value " + std::to_string(v));
    }
  }
  return unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  ImplPtr xi = x.shared_impl();
  const std::size_t n = x.numel();
  return emit({1, 1}, {total}, {&x}, [xi, n](Impl& o) {
    for (std::size_t i = 0; i < n; ++i) xi->grad[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto xd = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xd.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  ImplPtr xi = x.shared_impl();
  return emit({m, n}, std::move(out), {&x}, [xi, m, n](Impl& o) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = o.data.data() + i * n;
      const double* g = o.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) {
        xi->grad[i * n + j] += y[j] * (g[j] - dot);
      }
    }
  });
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                 double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (n < 2) {
    throw DimensionError("layernorm needs at least 2 columns, got " +
                         x.shape().str());
  }
  if (gain.rows() != 1 || gain.cols() != n) shape_error("layernorm", x, gain);
  if (bias.rows() != 1 || bias.cols() != n) shape_error("layernorm", x, bias);
  auto xd = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  std::vector<double> out(m * n);
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xd.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[i * n + j] = h;
      out[i * n + j] = gd[j] * h + bd[j];
    }
  }
  ImplPtr xi = x.shared_impl();
  ImplPtr gi = gain.shared_impl();
  ImplPtr bi = bias.shared_impl();
  return emit({m, n}, std::move(out), {&x, &gain, &bias},
              [xi, gi, bi, xhat, inv_std, m, n](Impl& o) {
                const double inv_n = 1.0 / static_cast<double>(n);
                for (std::size_t i = 0; i < m; ++i) {
                  const double* g = o.grad.data() + i * n;
                  const double* h = xhat->data() + i * n;
                  if (gi->requires_grad) {
                    for (std::size_t j = 0; j < n; ++j) gi->grad[j] += g[j] * h[j];
                  }
                  if (bi->requires_grad) {
                    for (std::size_t j = 0; j < n; ++j) bi->grad[j] += g[j];
                  }
                  if (!xi->requires_grad) continue;
                  double mean_dh = 0.0, mean_dh_h = 0.0;
                  for (std::size_t j = 0; j < n; ++j) {
                    const double dh = g[j] * gi->data[j];
                    mean_dh += dh;
                    mean_dh_h += dh * h[j];
                  }
                  mean_dh *= inv_n;
                  mean_dh_h *= inv_n;
                  const double is = (*inv_std)[i];
                  for (std::size_t j = 0; j < n; ++j) {
                    const double dh = g[j] * gi->data[j];
                    xi->grad[i * n + j] +=
                        is * (dh - mean_dh - h[j] * mean_dh_h);
                  }
                }
              });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of zero tensors");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != n) shape_error("concat_rows", parts[0], p);
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  std::vector<ImplPtr> impls;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    impls.push_back(p.shared_impl());
    any_grad = any_grad || p.requires_grad();
  }
  return emit({m, n}, std::move(out), any_grad, [impls](Impl& o) {
    std::size_t offset = 0;
    for (const ImplPtr& p : impls) {
      const std::size_t len = p->data.size();
      if (p->requires_grad) {
        for (std::size_t i = 0; i < len; ++i) p->grad[i] += o.grad[offset + i];
      }
      offset += len;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of zero tensors");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != m) shape_error("concat_cols", parts[0], p);
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::size_t col = 0;
  for (const Tensor& p : parts) {
    auto pd = p.data();
    const std::size_t pc = p.cols();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(pd.data() + i * pc, pc, out.data() + i * n + col);
    }
    col += pc;
  }
  std::vector<ImplPtr> impls;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    impls.push_back(p.shared_impl());
    any_grad = any_grad || p.requires_grad();
  }
  return emit({m, n}, std::move(out), any_grad, [impls, m, n](Impl& o) {
    std::size_t c0 = 0;
    for (const ImplPtr& p : impls) {
      const std::size_t pc = p->shape.cols;
      if (p->requires_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < pc; ++j) {
            p->grad[i * pc + j] += o.grad[i * n + c0 + j];
          }
        }
      }
      c0 += pc;
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") out of range for " +
                         x.shape().str());
  }
  const std::size_t n = x.cols();
  auto xd = x.data();
  std::vector<double> out(xd.begin() + begin * n, xd.begin() + end * n);
  ImplPtr xi = x.shared_impl();
  return emit({end - begin, n}, std::move(out), {&x}, [xi, begin, n](Impl& o) {
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      xi->grad[begin * n + i] += o.grad[i];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") out of range for " +
                         x.shape().str());
  }
  const std::size_t m = x.rows(), n = x.cols(), w = end - begin;
  auto xd = x.data();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(xd.data() + i * n + begin, w, out.data() + i * w);
  }
  ImplPtr xi = x.shared_impl();
  return emit({m, w}, std::move(out), {&x}, [xi, begin, m, n, w](Impl& o) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        xi->grad[i * n + begin + j] += o.grad[i * w + j];
      }
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t n = x.cols();
  auto xd = x.data();
  std::vector<double> out(rows.size() * n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) {
      throw DimensionError("gather_rows index " + std::to_string(rows[r]) +
                           " out of range for " + x.shape().str());
    }
    std::copy_n(xd.data() + rows[r] * n, n, out.data() + r * n);
  }
  ImplPtr xi = x.shared_impl();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return emit({idx.size(), n}, std::move(out), {&x}, [xi, idx, n](Impl& o) {
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        xi->grad[idx[r] * n + j] += o.grad[r * n + j];
      }
    }
  });
}

Tensor sigmoid_focal_loss(const Tensor& logits, std::span<const double> targets,
                          double alpha, double gamma) {
  const std::size_t n = logits.numel();
  if (targets.size() != n) {
    throw DimensionError("sigmoid_focal_loss: " + std::to_string(targets.size()) +
                         " targets for logits " + logits.shape().str());
  }
  constexpr double kEps = 1e-12;
  const double log_eps = std::log(kEps);
  auto xd = logits.data();
  auto grads = std::make_shared<std::vector<double>>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xd[i];
    const bool positive = targets[i] > 0.5;
    // p_t and q = 1 - p_t, each computed on its own stable side.
    const double z = positive ? x : -x;
    const double pt = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                               : std::exp(z) / (1.0 + std::exp(z));
    const double q = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z))
                              : 1.0 / (1.0 + std::exp(z));
    const double log_pt = -softplus(-z);
    const double alpha_t = positive ? alpha : 1.0 - alpha;
    const double sign = positive ? 1.0 : -1.0;
    const double qg = std::pow(q, gamma);
    if (log_pt >= log_eps) {
      total += -alpha_t * qg * log_pt;
      (*grads)[i] = sign * alpha_t * qg * (gamma * pt * log_pt - q);
    } else {
      total += -alpha_t * qg * log_eps;
      (*grads)[i] = sign * alpha_t * qg * gamma * pt * log_eps;
    }
  }
  ImplPtr xi = logits.shared_impl();
  return emit({1, 1}, {total}, {&logits}, [xi, grads, n](Impl& o) {
    for (std::size_t i = 0; i < n; ++i) xi->grad[i] += o.grad[0] * (*grads)[i];
  });
}

}  // namespace hydra
