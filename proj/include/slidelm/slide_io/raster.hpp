#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slidelm {

/// 8-bit raster, row-major, interleaved channels (1 = gray, 3 = RGB).
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0);

  bool empty() const noexcept { return pixels.empty(); }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

  /// Copy of the w×h window at (x, y); the window must lie inside the raster.
  Raster crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const;

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Binary PPM (P6) for 3 channels, PGM (P5) for 1; max value 255 only.
Raster read_pnm(const std::string& path);
void write_pnm(const std::string& path, const Raster& r);
std::string encode_pnm(const Raster& r);
Raster decode_pnm(std::string_view bytes, const std::string& origin = "<memory>");

/// Placement of a letterboxed thumbnail inside its square canvas.
struct ThumbnailPlacement {
  std::size_t target = 0;
  std::size_t width = 0;   // scaled image width inside the canvas
  std::size_t height = 0;  // scaled image height inside the canvas
  std::size_t offset_x = 0;
  std::size_t offset_y = 0;
  double scale = 1.0;  // canvas pixels per source pixel
};

ThumbnailPlacement thumbnail_placement(std::size_t src_width, std::size_t src_height, std::size_t target);

/// Square target×target thumbnail. The longest side is scaled to `target` by
/// area averaging and the result is centered on a white canvas.
Raster thumbnail(const Raster& r, std::size_t target);

/// Area-averaging resample to an exact size.
Raster resize_area(const Raster& r, std::size_t width, std::size_t height);

}  // namespace slidelm
