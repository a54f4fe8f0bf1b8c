#include "slidelm/encoder/dilated_attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slidelm/error.hpp"
#include "slidelm/numerics/ops.hpp"

namespace slidelm {
namespace {

struct SegmentResult {
  std::vector<std::size_t> pos;
  Tensor probs;  // m×m over real positions
};

struct Forward {
  Tensor out;  // N×(d+1)
  std::vector<SegmentResult> segments;
};

Forward run_forward(const Tensor& q, const Tensor& k, const Tensor& v, const DilatedLayout& layout) {
  const std::size_t n = layout.n, d = q.cols();
  const double sc = 1.0 / std::sqrt(static_cast<double>(d));
  Forward fw{Tensor::matrix(n, d + 1), {}};
  for (const auto& pos : layout.segments) {
    const std::size_t m = pos.size();
    if (m == 0) continue;
    Tensor p = Tensor::matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += q(pos[i], c) * k(pos[j], c);
        p(i, j) = s * sc;
        mx = std::max(mx, p(i, j));
      }
      double z = 0.0;
      for (std::size_t j = 0; j < m; ++j) z += (p(i, j) = std::exp(p(i, j) - mx));
      for (std::size_t j = 0; j < m; ++j) p(i, j) /= z;
      auto orow = fw.out.row(pos[i]);
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t c = 0; c < d; ++c) orow[c] += p(i, j) * v(pos[j], c);
      orow[d] = mx + std::log(z);
    }
    fw.segments.push_back({pos, std::move(p)});
  }
  return fw;
}

void check_inputs(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape())
    throw UsageError("dilated attention: q, k, v must be matrices of equal shape");
}

}  // namespace

void validate_branch(const DilationBranch& b, const std::string& key_path) {
  if (b.dilation == 0) throw ConfigError(key_path + ".dilation", "must be >= 1");
  if (b.segment < b.dilation) throw ConfigError(key_path + ".segment", "must be >= dilation");
  if (b.segment % b.dilation != 0)
    throw ConfigError(key_path + ".segment",
                      "segment " + std::to_string(b.segment) + " is not a multiple of dilation " +
                          std::to_string(b.dilation));
}

DilatedLayout dilated_layout(std::size_t n, const DilationBranch& b, std::size_t head) {
  validate_branch(b);
  if (n == 0) throw UsageError("dilated attention over an empty sequence");
  DilatedLayout l;
  l.n = n;
  l.dilation = b.dilation;
  const std::size_t padded_n = (n + b.dilation - 1) / b.dilation * b.dilation;
  l.segment = std::min(b.segment, padded_n);
  l.offset = head % b.dilation;
  l.slots = l.segment / b.dilation;
  l.selected.assign(n, 0);
  for (std::size_t start = 0; start < n; start += l.segment) {
    std::vector<std::size_t> pos;
    for (std::size_t s = 0; s < l.slots; ++s) {
      const std::size_t p = start + l.offset + s * b.dilation;
      if (p < n) {
        pos.push_back(p);
        l.selected[p] = 1;
      }
    }
    l.segments.push_back(std::move(pos));
  }
  return l;
}

Var dilated_attention_with_lse(const Var& q, const Var& k, const Var& v, const DilationBranch& b, std::size_t head) {
  check_inputs(q.value(), k.value(), v.value());
  const DilatedLayout layout = dilated_layout(q.value().rows(), b, head);
  Forward fw = run_forward(q.value(), k.value(), v.value(), layout);
  const std::size_t d = q.value().cols();
  const double sc = 1.0 / std::sqrt(static_cast<double>(d));
  return make_result(std::move(fw.out), {q, k, v}, [segs = std::move(fw.segments), d, sc](Node& self) {
    Node& qn = *self.parents[0];
    Node& kn = *self.parents[1];
    Node& vn = *self.parents[2];
    const Tensor& qv = qn.value;
    const Tensor& kv = kn.value;
    const Tensor& vv = vn.value;
    const std::size_t n = qv.rows();
    Tensor dq = Tensor::matrix(n, d), dk = Tensor::matrix(n, d), dv = Tensor::matrix(n, d);
    const Tensor& g = self.grad;
    for (const auto& seg : segs) {
      const auto& pos = seg.pos;
      const Tensor& p = seg.probs;
      const std::size_t m = pos.size();
      std::vector<double> dp(m);
      for (std::size_t i = 0; i < m; ++i) {
        const auto gi = g.row(pos[i]);
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < d; ++c) s += gi[c] * vv(pos[j], c);
          dp[j] = s;
          dot += p(i, j) * s;
          for (std::size_t c = 0; c < d; ++c) dv(pos[j], c) += p(i, j) * gi[c];
        }
        for (std::size_t j = 0; j < m; ++j) {
          const double ds = p(i, j) * (dp[j] - dot + gi[d]) * sc;
          if (ds == 0.0) continue;
          for (std::size_t c = 0; c < d; ++c) {
            dq(pos[i], c) += ds * kv(pos[j], c);
            dk(pos[j], c) += ds * qv(pos[i], c);
          }
        }
      }
    }
    if (qn.requires_grad) qn.accumulate(dq);
    if (kn.requires_grad) kn.accumulate(dk);
    if (vn.requires_grad) vn.accumulate(dv);
  });
}

Var dilated_attention(const Var& q, const Var& k, const Var& v, const DilationBranch& b, std::size_t head) {
  return ops::slice_cols(dilated_attention_with_lse(q, k, v, b, head), 0, q.value().cols());
}

DilatedAttentionProbe probe_dilated_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                              const DilationBranch& b, std::size_t head) {
  check_inputs(q, k, v);
  DilatedAttentionProbe pr;
  pr.layout = dilated_layout(q.rows(), b, head);
  Forward fw = run_forward(q, k, v, pr.layout);
  const std::size_t d = q.cols();
  pr.output = Tensor::matrix(q.rows(), d);
  pr.lse.assign(q.rows(), 0.0);
  for (std::size_t r = 0; r < q.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) pr.output(r, c) = fw.out(r, c);
    pr.lse[r] = fw.out(r, d);
  }
  std::size_t si = 0;
  for (const auto& pos : pr.layout.segments) {
    Tensor w = Tensor::matrix(pr.layout.slots, pr.layout.slots);
    if (!pos.empty()) {
      const auto& seg = fw.segments[si++];
      // Real positions occupy the leading slots; padding trails.
      for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t j = 0; j < pos.size(); ++j) w(i, j) = seg.probs(i, j);
    }
    pr.segment_weights.push_back(std::move(w));
  }
  return pr;
}

}  // namespace slidelm
