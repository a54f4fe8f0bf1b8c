#include "slidelm/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "slidelm/error.hpp"

namespace slidelm {
namespace {

constexpr char kMagic[8] = {'S', 'L', 'M', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_str(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw LoadError("checkpoint '" + path + "' is truncated");
  return v;
}

std::string get_str(std::istream& in, const std::string& path) {
  auto n = get<std::uint32_t>(in, path);
  if (n > (1u << 28)) throw LoadError("checkpoint '" + path + "': implausible string length");
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw LoadError("checkpoint '" + path + "' is truncated");
  return s;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

Checkpoint make_checkpoint(const ParameterStore& params, std::map<std::string, std::string> metadata) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(metadata);
  ckpt.metadata["format"] = Checkpoint::kFormatId;
  for (const auto& p : params.all()) ckpt.tensors.emplace_back(p.name(), p.value());
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, Checkpoint::kVersion);
  auto meta = ckpt.metadata;
  meta["format"] = Checkpoint::kFormatId;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_str(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw LoadError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw LoadError("'" + path + "' is not a checkpoint (bad magic)");
  auto version = get<std::uint32_t>(in, path);
  if (version != Checkpoint::kVersion)
    throw LoadError("checkpoint '" + path + "' has unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  auto n_meta = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_str(in, path);
    ckpt.metadata[k] = get_str(in, path);
  }
  auto n_tensors = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = get_str(in, path);
    auto rank = get<std::uint32_t>(in, path);
    if (rank == 0 || rank > 8) throw LoadError("checkpoint '" + path + "': bad rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, path);
    std::vector<double> data(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double))))
      throw LoadError("checkpoint '" + path + "' is truncated");
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ckpt;
}

void restore_parameters(ParameterStore& params, const Checkpoint& ckpt) {
  for (auto& p : params.all()) {
    const Tensor* t = ckpt.find(p.name());
    if (!t) throw LoadError("checkpoint lacks parameter '" + p.name() + "'");
    if (t->shape() != p.value().shape())
      throw LoadError("checkpoint shape " + shape_string(t->shape()) + " for '" + p.name() +
                      "' does not match model " + shape_string(p.value().shape()));
    p.value() = *t;
  }
}

}  // namespace slidelm
