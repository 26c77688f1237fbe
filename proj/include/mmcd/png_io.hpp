#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmcd/raster.hpp"

namespace mmcd {

// Minimal PNG writer (8-bit grayscale or RGB), zlib-compressed. Export is
// for visualization only; quantitative data stays in raster files.
void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels);

// Per-image min-max stretch to 8 bits. Single-band rasters become grayscale;
// multiband rasters use the first three channels as an RGB composite (a
// two-band raster repeats its last channel).
void write_raster_png(const RasterImage& img, const std::string& path);

}  // namespace mmcd
