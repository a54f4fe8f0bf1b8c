#include "slidelm/encoder/embeddings.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "slidelm/error.hpp"

namespace slidelm {
namespace {

constexpr std::array<char, 4> kMagic{'S', 'E', 'M', 'B'};

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_embeddings(const std::string& path, const EmbeddingMatrix& e) {
  if (e.values.empty() || e.values.rank() != 2) throw UsageError("save_embeddings: expected a non-empty N×D matrix");
  const std::size_t n = e.n_patches(), d = e.dim();
  std::vector<char> out(kMagic.begin(), kMagic.end());
  put_u32(out, static_cast<std::uint32_t>(n));
  put_u32(out, static_cast<std::uint32_t>(d));
  out.reserve(out.size() + n * d * 4);
  for (double v : e.values.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw LoadError("write failed: " + path);
}

EmbeddingMatrix load_embeddings(const std::string& path, std::optional<std::size_t> expected_dim,
                                std::optional<std::size_t> expected_rows) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open embeddings file " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0)
    throw LoadError(path + ": not an embeddings file");
  const std::size_t n = get_u32(bytes.data() + 4);
  const std::size_t d = get_u32(bytes.data() + 8);
  if (n == 0 || d == 0) throw LoadError(path + ": empty embedding matrix");
  if (bytes.size() != 12 + n * d * 4)
    throw LoadError(path + ": size does not match header " + std::to_string(n) + "x" + std::to_string(d));
  if (expected_dim && *expected_dim != d)
    throw LoadError(path + ": embedding dim " + std::to_string(d) + " != expected " + std::to_string(*expected_dim));
  if (expected_rows && *expected_rows != n)
    throw LoadError(path + ": " + std::to_string(n) + " rows but grid has " + std::to_string(*expected_rows) +
                    " tissue tiles");
  Tensor t = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < n * d; ++i) {
    const float v = std::bit_cast<float>(get_u32(bytes.data() + 12 + 4 * i));
    if (!std::isfinite(v)) throw LoadError(path + ": non-finite value at index " + std::to_string(i));
    t[i] = v;
  }
  return {std::move(t)};
}

}  // namespace slidelm
