#include "slidelm/numerics/parameters.hpp"

#include <cmath>
#include <cstring>

#include "slidelm/error.hpp"
#include "slidelm/util/hash.hpp"

namespace slidelm {

Parameter ParameterStore::add(std::string name, Tensor value, bool trainable) {
  if (find(name)) throw UsageError("ParameterStore: duplicate parameter '" + name + "'");
  if (group_of(name).empty()) throw UsageError("ParameterStore: name '" + name + "' lacks a group prefix");
  params_.emplace_back(std::move(name), std::move(value), trainable);
  return params_.back();
}

std::vector<Parameter> ParameterStore::group(std::string_view g) const {
  std::vector<Parameter> out;
  for (const auto& p : params_)
    if (group_of(p.name()) == g) out.push_back(p);
  return out;
}

std::vector<std::string> ParameterStore::groups() const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    std::string g(group_of(p.name()));
    if (out.empty() || out.back() != g) {
      bool seen = false;
      for (const auto& o : out) seen = seen || o == g;
      if (!seen) out.push_back(g);
    }
  }
  return out;
}

Parameter* ParameterStore::find(std::string_view name) {
  for (auto& p : params_)
    if (p.name() == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name() == name) return &p;
  return nullptr;
}

void ParameterStore::set_group_trainable(std::string_view g, bool trainable) {
  for (auto& p : params_)
    if (group_of(p.name()) == g) p.set_trainable(trainable);
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::string ParameterStore::checksum(std::string_view g) const {
  Sha256 h;
  for (const auto& p : params_) {
    if (group_of(p.name()) != g) continue;
    h.update(p.name());
    h.update(shape_string(p.value().shape()));
    auto v = p.value().values();
    h.update(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)));
  }
  return h.hex_digest();
}

std::string_view group_of(std::string_view name) {
  auto dot = name.find('.');
  return dot == std::string_view::npos ? std::string_view{} : name.substr(0, dot);
}

Tensor init_uniform_fan_in(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  Tensor t = Tensor::matrix(fan_in, fan_out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace slidelm
