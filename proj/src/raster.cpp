#include "slidelm/slide_io/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "slidelm/error.hpp"

namespace slidelm {

Raster::Raster(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill)
    : width(w), height(h), channels(c), pixels(w * h * c, fill) {
  if (c != 1 && c != 3) throw UsageError("Raster: channels must be 1 or 3");
}

Raster Raster::crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const {
  if (x + w > width || y + h > height) throw UsageError("Raster::crop: window exceeds raster bounds");
  Raster out(w, h, channels);
  for (std::size_t row = 0; row < h; ++row) {
    auto src = pixels.begin() + static_cast<std::ptrdiff_t>(((y + row) * width + x) * channels);
    std::copy_n(src, w * channels, out.pixels.begin() + static_cast<std::ptrdiff_t>(row * w * channels));
  }
  return out;
}

std::string encode_pnm(const Raster& r) {
  if (r.channels != 1 && r.channels != 3) throw UsageError("encode_pnm: channels must be 1 or 3");
  std::string out = (r.channels == 3 ? "P6\n" : "P5\n") + std::to_string(r.width) + " " +
                    std::to_string(r.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(r.pixels.data()), r.pixels.size());
  return out;
}

Raster decode_pnm(std::string_view bytes, const std::string& origin) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_space();
    std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])))
      v = v * 10 + static_cast<std::size_t>(bytes[pos++] - '0');
    if (pos == start) throw LoadError(origin + ": malformed PNM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw LoadError(origin + ": not a binary PPM/PGM (expected P5 or P6)");
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  const std::size_t w = read_uint();
  const std::size_t h = read_uint();
  const std::size_t maxval = read_uint();
  if (maxval != 255) throw LoadError(origin + ": only max value 255 is supported");
  if (w == 0 || h == 0) throw LoadError(origin + ": empty raster");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw LoadError(origin + ": malformed PNM header");
  ++pos;
  const std::size_t n = w * h * channels;
  if (bytes.size() - pos < n) throw LoadError(origin + ": pixel data truncated");
  Raster r(w, h, channels);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), n, r.pixels.begin());
  return r;
}

Raster read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open raster '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_pnm(ss.str(), path);
}

void write_pnm(const std::string& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write raster '" + path + "'");
  const std::string bytes = encode_pnm(r);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

namespace {

// For each output index, the source pixels it covers and their overlap weights.
struct AxisTaps {
  std::vector<std::size_t> begin;
  std::vector<std::vector<double>> weights;
};

AxisTaps area_taps(std::size_t src, std::size_t dst) {
  AxisTaps taps;
  const double ratio = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t o = 0; o < dst; ++o) {
    const double lo = static_cast<double>(o) * ratio;
    const double hi = static_cast<double>(o + 1) * ratio;
    auto first = static_cast<std::size_t>(std::floor(lo));
    auto last = std::min(src, static_cast<std::size_t>(std::ceil(hi)));
    std::vector<double> w;
    double total = 0.0;
    for (std::size_t s = first; s < last; ++s) {
      const double overlap = std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
      w.push_back(std::max(0.0, overlap));
      total += w.back();
    }
    for (auto& v : w) v /= total;
    taps.begin.push_back(first);
    taps.weights.push_back(std::move(w));
  }
  return taps;
}

}  // namespace

Raster resize_area(const Raster& r, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw UsageError("resize_area: target size must be positive");
  if (r.empty()) throw UsageError("resize_area: empty raster");
  const std::size_t c = r.channels;
  const AxisTaps tx = area_taps(r.width, width);
  const AxisTaps ty = area_taps(r.height, height);
  std::vector<double> horiz(r.height * width * c, 0.0);
  for (std::size_t y = 0; y < r.height; ++y)
    for (std::size_t ox = 0; ox < width; ++ox)
      for (std::size_t k = 0; k < tx.weights[ox].size(); ++k)
        for (std::size_t ch = 0; ch < c; ++ch)
          horiz[(y * width + ox) * c + ch] += tx.weights[ox][k] * r.at(tx.begin[ox] + k, y, ch);
  Raster out(width, height, c);
  for (std::size_t oy = 0; oy < height; ++oy)
    for (std::size_t ox = 0; ox < width; ++ox)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double v = 0.0;
        for (std::size_t k = 0; k < ty.weights[oy].size(); ++k)
          v += ty.weights[oy][k] * horiz[((ty.begin[oy] + k) * width + ox) * c + ch];
        out.at(ox, oy, ch) = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
      }
  return out;
}

ThumbnailPlacement thumbnail_placement(std::size_t src_width, std::size_t src_height, std::size_t target) {
  if (target == 0) throw UsageError("thumbnail: target must be >= 1");
  if (src_width == 0 || src_height == 0) throw UsageError("thumbnail: empty source");
  ThumbnailPlacement p;
  p.target = target;
  const std::size_t longest = std::max(src_width, src_height);
  p.scale = static_cast<double>(target) / static_cast<double>(longest);
  auto scaled = [&](std::size_t v) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(static_cast<double>(v) * p.scale)), 1, target);
  };
  p.width = src_width == longest ? target : scaled(src_width);
  p.height = src_height == longest ? target : scaled(src_height);
  p.offset_x = (target - p.width) / 2;
  p.offset_y = (target - p.height) / 2;
  return p;
}

Raster thumbnail(const Raster& r, std::size_t target) {
  if (r.empty()) throw UsageError("thumbnail: empty raster");
  const ThumbnailPlacement p = thumbnail_placement(r.width, r.height, target);
  const Raster scaled = resize_area(r, p.width, p.height);
  Raster canvas(target, target, r.channels, 255);
  for (std::size_t y = 0; y < p.height; ++y)
    std::copy_n(scaled.pixels.begin() + static_cast<std::ptrdiff_t>(y * p.width * r.channels), p.width * r.channels,
                canvas.pixels.begin() + static_cast<std::ptrdiff_t>(((y + p.offset_y) * target + p.offset_x) * r.channels));
  return canvas;
}

}  // namespace slidelm
