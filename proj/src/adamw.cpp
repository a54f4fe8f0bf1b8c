#include "slidelm/numerics/adamw.hpp"

#include <cmath>

#include "slidelm/error.hpp"

namespace slidelm {

void AdamW::step(std::span<Parameter> params) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& p : params) {
    if (!p.trainable()) continue;
    Tensor& value = p.value();
    const Tensor& grad = p.grad();
    auto [it, inserted] = moments_.try_emplace(p.name());
    Moments& mom = it->second;
    if (inserted) {
      mom.first = Tensor(value.shape(), 0.0);
      mom.second = Tensor(value.shape(), 0.0);
    } else if (mom.first.shape() != value.shape() || mom.second.shape() != value.shape()) {
      throw UsageError("AdamW: moment shape for '" + p.name() + "' does not match parameter " +
                       shape_string(value.shape()));
    }
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double g = grad[i];
      mom.first[i] = cfg_.beta1 * mom.first[i] + (1.0 - cfg_.beta1) * g;
      mom.second[i] = cfg_.beta2 * mom.second[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = mom.first[i] / bc1;
      const double v_hat = mom.second[i] / bc2;
      value[i] *= 1.0 - cfg_.lr * cfg_.weight_decay;
      value[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace slidelm
