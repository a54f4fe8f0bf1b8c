#pragma once

// Central finite-difference oracle. Lives in test code so that it stays
// independent of the analytic backward passes it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "slidelm/numerics/autograd.hpp"
#include "slidelm/rng.hpp"

namespace slidelm::testing {

struct GradCheckReport {
  double worst_rel_error = 0.0;
  std::string worst_param;
  std::size_t coords_checked = 0;
};

/// Compares analytic grads of `loss_fn` w.r.t. each trainable parameter
/// against central differences. Relative error per parameter tensor is
/// ||analytic - numeric|| / (||analytic|| + 1e-8) over the checked coordinates.
/// At most `max_coords` coordinates per tensor are probed (sampled by `rng`).
inline GradCheckReport grad_check(std::vector<Parameter> params, const std::function<Var()>& loss_fn,
                                  Rng& rng, double step = 1e-5, std::size_t max_coords = 48) {
  for (auto& p : params) p.zero_grad();
  backward(loss_fn());

  GradCheckReport report;
  for (auto& p : params) {
    if (!p.trainable()) continue;
    const Tensor analytic = p.grad();
    std::vector<std::size_t> coords(p.value().numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > max_coords) {
      rng.shuffle(coords);
      coords.resize(max_coords);
    }
    double diff2 = 0.0, norm2 = 0.0;
    for (std::size_t c : coords) {
      const double saved = p.value()[c];
      p.value()[c] = saved + step;
      const double up = loss_fn().value().item();
      p.value()[c] = saved - step;
      const double down = loss_fn().value().item();
      p.value()[c] = saved;
      const double numeric = (up - down) / (2.0 * step);
      diff2 += (analytic[c] - numeric) * (analytic[c] - numeric);
      norm2 += analytic[c] * analytic[c];
    }
    const double rel = std::sqrt(diff2) / (std::sqrt(norm2) + 1e-8);
    report.coords_checked += coords.size();
    if (rel >= report.worst_rel_error) {
      report.worst_rel_error = rel;
      report.worst_param = p.name();
    }
  }
  return report;
}

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

}  // namespace slidelm::testing
