#include "slidelm/rng.hpp"

#include <cmath>
#include <numbers>

#include "slidelm/error.hpp"

namespace slidelm {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw UsageError("Rng::below: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  for (;;) {
    std::uint64_t x = next_u64();
    if (x < limit) return x % n;
  }
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::string_view tag) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return split(h);
}

Rng Rng::split(std::uint64_t tag) const { return Rng(mix(key_ ^ mix(tag + 0x632be59bd9b4e019ULL)), Raw{}); }

}  // namespace slidelm
