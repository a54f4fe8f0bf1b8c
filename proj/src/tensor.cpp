#include "slidelm/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slidelm/error.hpp"

namespace slidelm {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw UsageError("Tensor: zero-sized dimension in " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_)
    if (d == 0) throw UsageError("Tensor: zero-sized dimension in " + shape_string(shape_));
  if (shape_numel(shape_) != data_.size())
    throw UsageError("Tensor: shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw UsageError("Tensor::rows: expected a matrix, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw UsageError("Tensor::cols: expected a matrix, got " + shape_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("Tensor::item: tensor has " + std::to_string(numel()) + " elements");
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) throw UsageError("Tensor::reshaped: element count mismatch");
  return Tensor(std::move(shape), data_);
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank())
    throw UsageError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_string(x.shape()));
  const auto& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];

  Tensor out(shape);
  auto in = x.values();
  auto o = out.values();
  for (std::size_t a = 0; a < outer; ++a) {
    for (std::size_t b = 0; b < inner; ++b) {
      const std::size_t base = a * len * inner + b;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < len; ++i) m = std::max(m, in[base + i * inner]);
      double z = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        double e = std::exp(in[base + i * inner] - m);
        o[base + i * inner] = e;
        z += e;
      }
      for (std::size_t i = 0; i < len; ++i) o[base + i * inner] /= z;
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw UsageError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace slidelm
