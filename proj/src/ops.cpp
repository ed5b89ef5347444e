#include "vrec/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vrec::ops {
namespace {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

std::string shapes(const Tensor& a) { return shape_str(a.shape()); }
std::string shapes(const Tensor& a, const Tensor& b) {
  return shape_str(a.shape()) + " and " + shape_str(b.shape());
}

// Builds the output node; the backward closure is attached only when some
// input participates in differentiation.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<ImplPtr> inputs,
                   std::function<void(TensorImpl&)> backward) {
  auto out = Tensor::from(std::move(shape), std::move(values));
  if (!grad_enabled()) return out;
  bool tracked = false;
  for (const auto& in : inputs) tracked = tracked || in->requires_grad;
  if (!tracked) return out;
  auto& impl = *out.impl();
  impl.requires_grad = true;
  impl.parents = std::move(inputs);
  impl.backward_fn = std::move(backward);
  return out;
}

template <typename Forward, typename Deriv>
Tensor unary(const Tensor& a, Forward fwd, Deriv deriv) {
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {a.impl()}, [deriv](TensorImpl& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
  });
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, "shape mismatch " + shapes(a, b));
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.dim() != 2) shape_error(op, "expected a matrix, got " + shapes(a));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() == 0 || a.dim() > 2 || b.dim() == 0 || b.dim() > 2) {
    shape_error("matmul", "unsupported ranks " + shapes(a, b));
  }
  const std::size_t m = a.dim() == 2 ? a.shape()[0] : 1;
  const std::size_t k = a.dim() == 2 ? a.shape()[1] : a.shape()[0];
  const std::size_t kb = b.shape()[0];
  const std::size_t n = b.dim() == 2 ? b.shape()[1] : 1;
  if (k != kb) shape_error("matmul", "inner dimensions differ " + shapes(a, b));
  Shape out_shape;
  if (a.dim() == 2) out_shape.push_back(m);
  if (b.dim() == 2) out_shape.push_back(n);

  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_result(std::move(out_shape), std::move(out), {a.impl(), b.impl()},
                     [m, k, n](TensorImpl& self) {
                       auto& pa = *self.parents[0];
                       auto& pb = *self.parents[1];
                       const double* G = self.grad.data();
                       if (pa.requires_grad) {
                         auto& ga = pa.ensure_grad();
                         // dA = G B^T
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             const double* brow = pb.data.data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * brow[j];
                             ga[i * k + p] += acc;
                           }
                       }
                       if (pb.requires_grad) {
                         auto& gb = pb.ensure_grad();
                         // dB = A^T G
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = pa.data[i * k + p];
                             double* gbrow = gb.data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * G[i * n + j];
                           }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(r * c);
  const auto in = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  return make_result({c, r}, std::move(out), {a.impl()}, [r, c](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a.impl(), b.impl()}, [](TensorImpl& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), {a.impl(), b.impl()}, [](TensorImpl& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a.impl(), b.impl()}, [](TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.numel() != 1) shape_error("mul_scalar", "second operand must be scalar, got " + shapes(a, s));
  const double sv = s.data()[0];
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * sv;
  return make_result(a.shape(), std::move(out), {a.impl(), s.impl()}, [](TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& ps = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * ps.data[0];
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa.data[i];
      ps.ensure_grad()[0] += acc;
    }
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (bias.dim() != 1 || a.dim() == 0 || a.dim() > 2 || a.shape().back() != bias.shape()[0]) {
    shape_error("add_bias", "incompatible shapes " + shapes(a, bias));
  }
  const std::size_t n = bias.shape()[0];
  const std::size_t m = a.numel() / n;
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.data()[i * n + j] + bias.data()[j];
  return make_result(a.shape(), std::move(out), {a.impl(), bias.impl()}, [m, n](TensorImpl& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor log(const Tensor& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor reciprocal(const Tensor& a) {
  return unary(
      a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Tensor gelu(const Tensor& a) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [inv_sqrt2pi](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        return cdf + x * inv_sqrt2pi * std::exp(-0.5 * x * x);
      });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp_min(const Tensor& a, double lo) {
  return unary(
      a, [lo](double x) { return x < lo ? lo : x; },
      [lo](double x, double) { return x < lo ? 0.0 : 1.0; });
}

Tensor clamp_max(const Tensor& a, double hi) {
  return unary(
      a, [hi](double x) { return x > hi ? hi : x; },
      [hi](double x, double) { return x > hi ? 0.0 : 1.0; });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result({}, {acc}, {a.impl()}, [](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) shape_error("mean", "empty tensor");
  const double inv = 1.0 / static_cast<double>(a.numel());
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result({}, {acc * inv}, {a.impl()}, [inv](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0] * inv;
  });
}

namespace {

// Row-wise softmax over the first `limit(row)` entries of each row; the rest
// of the row is exactly zero.
template <typename Limit>
Tensor masked_softmax(const char* op, const Tensor& a, Limit limit) {
  if (a.dim() == 0) shape_error(op, "expected at least a vector, got " + shapes(a));
  const std::size_t n = a.shape().back();
  const std::size_t m = a.numel() / n;
  std::vector<double> out(a.numel(), 0.0);
  const auto in = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t len = limit(i);
    const double* x = in.data() + i * n;
    double* y = out.data() + i * n;
    double mx = x[0];
    for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < len; ++j) y[j] /= z;
  }
  return make_result(a.shape(), std::move(out), {a.impl()}, [m, n, limit](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t len = limit(i);
      const double* y = self.data.data() + i * n;
      const double* gy = self.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < len; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

}  // namespace

Tensor softmax(const Tensor& a) {
  const std::size_t n = a.dim() == 0 ? 0 : a.shape().back();
  return masked_softmax("softmax", a, [n](std::size_t) { return n; });
}

Tensor causal_softmax(const Tensor& a) {
  if (a.dim() != 2 || a.shape()[0] != a.shape()[1]) {
    shape_error("causal_softmax", "expected square matrix, got " + shapes(a));
  }
  return masked_softmax("causal_softmax", a, [](std::size_t i) { return i + 1; });
}

Tensor log_softmax(const Tensor& a) {
  if (a.dim() == 0) shape_error("log_softmax", "expected at least a vector, got " + shapes(a));
  const std::size_t n = a.shape().back();
  const std::size_t m = a.numel() / n;
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = in.data() + i * n;
    double mx = x[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[j] - lse;
  }
  return make_result(a.shape(), std::move(out), {a.impl()}, [m, n](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) gsum += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        g[i * n + j] += self.grad[i * n + j] - std::exp(self.data[i * n + j]) * gsum;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.dim() == 0 || gain.dim() != 1 || bias.dim() != 1 || gain.shape()[0] != x.shape().back() ||
      bias.shape()[0] != x.shape().back()) {
    shape_error("layer_norm", "incompatible shapes " + shapes(x) + ", gain " + shapes(gain) +
                                  ", bias " + shapes(bias));
  }
  const std::size_t n = x.shape().back();
  const std::size_t m = x.numel() / n;
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(m);
  const auto in = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* xr = in.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xr[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xr[j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gain.data()[j] + bias.data()[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x.impl(), gain.impl(), bias.impl()},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorImpl& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const double* G = self.grad.data();
        if (pg.requires_grad) {
          auto& gg = pg.ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += G[i * n + j] * xhat[i * n + j];
        }
        if (pb.requires_grad) {
          auto& gb = pb.ensure_grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += G[i * n + j];
        }
        if (px.requires_grad) {
          auto& gx = px.ensure_grad();
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = G[i * n + j] * pg.data[j];
              s1 += d;
              s2 += d * xhat[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double d = G[i * n + j] * pg.data[j];
              gx[i * n + j] += inv_std[i] * (d - inv_n * s1 - xhat[i * n + j] * inv_n * s2);
            }
          }
        }
      });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_matrix("embedding", table);
  const std::size_t V = table.shape()[0], d = table.shape()[1];
  std::vector<double> out(ids.size() * d);
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= V) {
      shape_error("embedding", "id " + std::to_string(ids[i]) + " out of range for table " +
                                   shapes(table));
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
    std::copy_n(table.data().begin() + rows[i] * d, d, out.begin() + i * d);
  }
  return make_result({ids.size(), d}, std::move(out), {table.impl()},
                     [d, rows = std::move(rows)](TensorImpl& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < rows.size(); ++i)
                         for (std::size_t j = 0; j < d; ++j) g[rows[i] * d + j] += self.grad[i * d + j];
                     });
}

Tensor row(const Tensor& a, std::size_t r) {
  require_matrix("row", a);
  if (r >= a.shape()[0]) shape_error("row", "index " + std::to_string(r) + " out of range for " + shapes(a));
  const std::size_t d = a.shape()[1];
  std::vector<double> out(a.data().begin() + r * d, a.data().begin() + (r + 1) * d);
  return make_result({d}, std::move(out), {a.impl()}, [r, d](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t j = 0; j < d; ++j) g[r * d + j] += self.grad[j];
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_matrix("slice_rows", a);
  if (begin > end || end > a.shape()[0]) {
    shape_error("slice_rows", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                                  ") out of bounds for " + shapes(a));
  }
  const std::size_t d = a.shape()[1];
  std::vector<double> out(a.data().begin() + begin * d, a.data().begin() + end * d);
  return make_result({end - begin, d}, std::move(out), {a.impl()}, [begin, d](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * d + i] += self.grad[i];
  });
}

Tensor column(const Tensor& a, std::size_t c) {
  require_matrix("column", a);
  const std::size_t r = a.shape()[0], n = a.shape()[1];
  if (c >= n) shape_error("column", "index " + std::to_string(c) + " out of range for " + shapes(a));
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = a.data()[i * n + c];
  return make_result({r}, std::move(out), {a.impl()}, [c, r, n](TensorImpl& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) g[i * n + c] += self.grad[i];
  });
}

Tensor element(const Tensor& a, std::size_t i) {
  if (i >= a.numel()) shape_error("element", "index " + std::to_string(i) + " out of range for " + shapes(a));
  return make_result({}, {a.data()[i]}, {a.impl()}, [i](TensorImpl& self) {
    self.parents[0]->ensure_grad()[i] += self.grad[0];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_rows", "no inputs");
  const std::size_t d = parts[0].shape().back();
  std::size_t total = 0;
  std::vector<ImplPtr> inputs;
  for (const auto& p : parts) {
    if (p.dim() == 0 || p.dim() > 2 || p.shape().back() != d) {
      shape_error("concat_rows", "incompatible shapes " + shapes(parts[0]) + " and " + shapes(p));
    }
    total += p.numel() / d;
    inputs.push_back(p.impl());
  }
  std::vector<double> out;
  out.reserve(total * d);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result({total, d}, std::move(out), std::move(inputs), [](TensorImpl& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) {
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
      }
      offset += p->data.size();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error("concat_cols", "no inputs");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::vector<ImplPtr> inputs;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.dim() != 2 || p.shape()[0] != m) {
      shape_error("concat_cols", "incompatible shapes " + shapes(parts[0]) + " and " + shapes(p));
    }
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
    inputs.push_back(p.impl());
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out[i * total + offset + j] = parts[k].data()[i * widths[k] + j];
    offset += widths[k];
  }
  return make_result({m, total}, std::move(out), std::move(inputs),
                     [m, total, widths = std::move(widths)](TensorImpl& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         auto& p = *self.parents[k];
                         if (p.requires_grad) {
                           auto& g = p.ensure_grad();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               g[i * widths[k] + j] += self.grad[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  std::vector<double> out;
  std::vector<ImplPtr> inputs;
  for (const auto& s : scalars) {
    if (s.numel() != 1) shape_error("stack_scalars", "non-scalar input " + shapes(s));
    out.push_back(s.data()[0]);
    inputs.push_back(s.impl());
  }
  const std::size_t n = out.size();
  return make_result({n}, std::move(out), std::move(inputs), [](TensorImpl& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (self.parents[i]->requires_grad) self.parents[i]->ensure_grad()[0] += self.grad[i];
    }
  });
}

Tensor entropy_from_logits(const Tensor& logits) {
  return scale(sum(mul(softmax(logits), log_softmax(logits))), -1.0);
}

}  // namespace vrec::ops
