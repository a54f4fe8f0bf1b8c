#include "slidelm/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "slidelm/error.hpp"

namespace slidelm::ops {
namespace {

// C[m×n] += A[m×k]·B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C[m×n] += A[m×k]·B[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// C[k×n] += A[m×k]ᵀ·B[m×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

void require_matrix(const Var& v, const char* op) {
  if (v.value().rank() != 2)
    throw UsageError(std::string(op) + ": expected a matrix, got " + shape_string(v.shape()));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw UsageError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <typename F>
Var unary_map(const Var& x, F&& f) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  Tensor deriv(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    auto [y, dy] = f(xv[i]);
    out[i] = y;
    deriv[i] = dy;
  }
  return make_result(std::move(out), {x}, [deriv = std::move(deriv)](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor g(deriv.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * deriv[i];
    p.accumulate(g);
  });
}

}  // namespace

Var constant(Tensor t) { return Var(std::move(t), false); }

Var matmul(const Var& a, const Var& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.value().rows(), k = a.value().cols(), n = b.value().cols();
  if (b.value().rows() != k)
    throw UsageError("matmul: inner dimensions differ " + shape_string(a.shape()) + "·" + shape_string(b.shape()));
  Tensor out = Tensor::matrix(m, n);
  gemm_nn(a.value().values().data(), b.value().values().data(), out.values().data(), m, k, n);
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      Tensor ga = Tensor::matrix(m, k);
      gemm_nt(self.grad.values().data(), pb.value.values().data(), ga.values().data(), m, n, k);
      pa.accumulate(ga);
    }
    if (pb.requires_grad) {
      Tensor gb = Tensor::matrix(k, n);
      gemm_tn(pa.value.values().data(), self.grad.values().data(), gb.values().data(), m, k, n);
      pb.accumulate(gb);
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.value().rows(), k = a.value().cols(), n = b.value().rows();
  if (b.value().cols() != k)
    throw UsageError("matmul_nt: inner dimensions differ " + shape_string(a.shape()) + "·" +
                     shape_string(b.shape()) + "ᵀ");
  Tensor out = Tensor::matrix(m, n);
  gemm_nt(a.value().values().data(), b.value().values().data(), out.values().data(), m, k, n);
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      Tensor ga = Tensor::matrix(m, k);
      gemm_nn(self.grad.values().data(), pb.value.values().data(), ga.values().data(), m, n, k);
      pa.accumulate(ga);
    }
    if (pb.requires_grad) {
      Tensor gb = Tensor::matrix(n, k);
      gemm_tn(self.grad.values().data(), pa.value.values().data(), gb.values().data(), m, n, k);
      pb.accumulate(gb);
    }
  });
}

Var transpose(const Var& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.value().rows(), n = a.value().cols();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = a.value()(i, j);
  return make_result(std::move(out), {a}, [m, n](Node& self) {
    Tensor g = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g(i, j) = self.grad(j, i);
    parent(self, 0).accumulate(g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (int i = 0; i < 2; ++i)
      if (parent(self, i).requires_grad) parent(self, i).accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    if (parent(self, 1).requires_grad) {
      Tensor g = self.grad;
      for (auto& v : g.values()) v = -v;
      parent(self, 1).accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= pb.value[i];
      pa.accumulate(g);
    }
    if (pb.requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= pa.value[i];
      pb.accumulate(g);
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    Tensor g = self.grad;
    for (auto& v : g.values()) v *= s;
    parent(self, 0).accumulate(g);
  });
}

Var add_bias(const Var& x, const Var& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (bias.value().numel() != n)
    throw UsageError("add_bias: bias has " + std::to_string(bias.value().numel()) + " elements, expected " +
                     std::to_string(n));
  Tensor out = x.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += bias.value()[j];
  return make_result(std::move(out), {x, bias}, [m, n](Node& self) {
    if (parent(self, 0).requires_grad) parent(self, 0).accumulate(self.grad);
    Node& pb = parent(self, 1);
    if (pb.requires_grad) {
      Tensor g(pb.value.shape());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad(i, j);
      pb.accumulate(g);
    }
  });
}

Var mul_col(const Var& x, const Var& col) {
  require_matrix(x, "mul_col");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (col.value().numel() != m) throw UsageError("mul_col: column length must equal row count");
  Tensor out = x.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) *= col.value()[i];
  return make_result(std::move(out), {x, col}, [m, n](Node& self) {
    Node& px = parent(self, 0);
    Node& pc = parent(self, 1);
    if (px.requires_grad) {
      Tensor g = self.grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) *= pc.value[i];
      px.accumulate(g);
    }
    if (pc.requires_grad) {
      Tensor g(pc.value.shape());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += self.grad(i, j) * px.value(i, j);
      pc.accumulate(g);
    }
  });
}

Var gelu(const Var& x) {
  return unary_map(x, [](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
    return std::pair{v * cdf, cdf + v * pdf};
  });
}

Var tanh(const Var& x) {
  return unary_map(x, [](double v) {
    const double t = std::tanh(v);
    return std::pair{t, 1.0 - t * t};
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (gain.value().numel() != n || bias.value().numel() != n)
    throw UsageError("layer_norm: gain/bias width must equal " + std::to_string(n));
  Tensor xhat = Tensor::matrix(m, n);
  std::vector<double> inv_std(m);
  Tensor out = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = x.value().row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat(i, j) = (r[j] - mean) * inv_std[i];
      out(i, j) = xhat(i, j) * gain.value()[j] + bias.value()[j];
    }
  }
  return make_result(std::move(out), {x, gain, bias},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), m, n](Node& self) {
                       Node& px = parent(self, 0);
                       Node& pg = parent(self, 1);
                       Node& pb = parent(self, 2);
                       if (px.requires_grad) {
                         Tensor g = Tensor::matrix(m, n);
                         for (std::size_t i = 0; i < m; ++i) {
                           double mean_d = 0.0, mean_dx = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double d = self.grad(i, j) * pg.value[j];
                             mean_d += d;
                             mean_dx += d * xhat(i, j);
                           }
                           mean_d /= static_cast<double>(n);
                           mean_dx /= static_cast<double>(n);
                           for (std::size_t j = 0; j < n; ++j) {
                             const double d = self.grad(i, j) * pg.value[j];
                             g(i, j) = inv_std[i] * (d - mean_d - xhat(i, j) * mean_dx);
                           }
                         }
                         px.accumulate(g);
                       }
                       if (pg.requires_grad) {
                         Tensor g(pg.value.shape());
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) g[j] += self.grad(i, j) * xhat(i, j);
                         pg.accumulate(g);
                       }
                       if (pb.requires_grad) {
                         Tensor g(pb.value.shape());
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) g[j] += self.grad(i, j);
                         pb.accumulate(g);
                       }
                     });
}

Var softmax_rows(const Var& x, const Mask& mask) {
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (!mask.empty() && mask.size() != m * n) throw UsageError("softmax_rows: mask size mismatch");
  Tensor out = Tensor::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (mask.empty() || mask[i * n + j]) mx = std::max(mx, x.value()(i, j));
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask.empty() && !mask[i * n + j]) continue;
      out(i, j) = std::exp(x.value()(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) /= z;
  }
  return make_result(std::move(out), {x}, [m, n](Node& self) {
    const Tensor& y = self.value;
    Tensor g = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < n; ++j) g(i, j) = y(i, j) * (self.grad(i, j) - dot);
    }
    parent(self, 0).accumulate(g);
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  const std::size_t m = x.value().rows(), n = x.value().cols();
  if (rows.empty()) throw UsageError("gather_rows: empty index list");
  Tensor out = Tensor::matrix(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m) throw UsageError("gather_rows: row index out of range");
    std::copy_n(x.value().row(rows[i]).begin(), n, out.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result(std::move(out), {x}, [idx = std::move(idx), n](Node& self) {
    Node& p = parent(self, 0);
    Tensor g(p.value.shape());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) g(idx[i], j) += self.grad(i, j);
    p.accumulate(g);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t n = parts.front().value().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.value().cols() != n) throw UsageError("concat_rows: column counts differ");
    m += p.value().rows();
  }
  Tensor out = Tensor::matrix(m, n);
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    std::copy(p.value().values().begin(), p.value().values().end(), out.values().begin() + at * n);
    at += p.value().rows();
  }
  return make_result(std::move(out), parts, [offsets = std::move(offsets), n](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      Tensor g(p.value.shape());
      std::copy_n(self.grad.values().begin() + offsets[k] * n, g.numel(), g.values().begin());
      p.accumulate(g);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const std::size_t m = parts.front().value().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.value().rows() != m) throw UsageError("concat_cols: row counts differ");
    n += p.value().cols();
  }
  Tensor out = Tensor::matrix(m, n);
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    const std::size_t w = p.value().cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out(i, at + j) = p.value()(i, j);
    at += w;
  }
  return make_result(std::move(out), parts, [offsets = std::move(offsets), m](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      const std::size_t w = p.value.cols();
      Tensor g(p.value.shape());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g(i, j) = self.grad(i, offsets[k] + j);
      p.accumulate(g);
    }
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  const std::size_t n = x.value().cols();
  if (begin >= end || end > x.value().rows()) throw UsageError("slice_rows: invalid range");
  Tensor out = Tensor::matrix(end - begin, n);
  std::copy_n(x.value().values().begin() + begin * n, out.numel(), out.values().begin());
  return make_result(std::move(out), {x}, [begin, n](Node& self) {
    Node& p = parent(self, 0);
    Tensor g(p.value.shape());
    std::copy(self.grad.values().begin(), self.grad.values().end(), g.values().begin() + begin * n);
    p.accumulate(g);
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.value().rows();
  if (begin >= end || end > x.value().cols()) throw UsageError("slice_cols: invalid range");
  const std::size_t w = end - begin;
  Tensor out = Tensor::matrix(m, w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = x.value()(i, begin + j);
  return make_result(std::move(out), {x}, [begin, m, w](Node& self) {
    Node& p = parent(self, 0);
    Tensor g(p.value.shape());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g(i, begin + j) = self.grad(i, j);
    p.accumulate(g);
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return make_result(Tensor::scalar(s), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    p.accumulate(Tensor(p.value.shape(), self.grad[0]));
  });
}

Var sum_squares(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  return make_result(Tensor::scalar(s), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    Tensor g = p.value;
    for (auto& v : g.values()) v *= 2.0 * self.grad[0];
    p.accumulate(g);
  });
}

Var cross_entropy(const Var& logits, std::span<const std::size_t> targets, const Mask& mask) {
  require_matrix(logits, "cross_entropy");
  const std::size_t t_len = logits.value().rows(), v_len = logits.value().cols();
  if (targets.size() != t_len || mask.size() != t_len)
    throw UsageError("cross_entropy: targets/mask length must equal logits rows");
  std::size_t count = 0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    if (targets[t] >= v_len) throw UsageError("cross_entropy: target id out of range");
    ++count;
  }
  if (count == 0) throw UsageError("cross_entropy: every position is masked out");

  Tensor probs = Tensor::matrix(t_len, v_len);
  double loss = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    if (!mask[t]) continue;
    auto row = logits.value().row(t);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < v_len; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    loss += lse - row[targets[t]];
    for (std::size_t j = 0; j < v_len; ++j) probs(t, j) = std::exp(row[j] - lse);
  }
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  Mask msk = mask;
  return make_result(Tensor::scalar(loss * inv), {logits},
                     [probs = std::move(probs), tgt = std::move(tgt), msk = std::move(msk), inv](Node& self) {
                       Tensor g(probs.shape());
                       const double scale = self.grad[0] * inv;
                       for (std::size_t t = 0; t < tgt.size(); ++t) {
                         if (!msk[t]) continue;
                         for (std::size_t j = 0; j < probs.cols(); ++j) g(t, j) = probs(t, j) * scale;
                         g(t, tgt[t]) -= scale;
                       }
                       parent(self, 0).accumulate(g);
                     });
}

}  // namespace slidelm::ops
