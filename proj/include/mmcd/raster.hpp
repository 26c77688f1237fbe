#pragma once

#include <string>
#include <vector>

namespace mmcd {

// Multiband raster, 32-bit floats, row-major HWC.
struct RasterImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> values;
  std::vector<std::string> band_names;

  RasterImage() = default;
  RasterImage(int h, int w, int c, float fill = 0.0f);

  size_t numel() const { return static_cast<size_t>(height) * width * channels; }
  float& at(int r, int c_, int ch) {
    return values[(static_cast<size_t>(r) * width + c_) * channels + ch];
  }
  float at(int r, int c_, int ch) const {
    return values[(static_cast<size_t>(r) * width + c_) * channels + ch];
  }
};

struct BandStats {
  struct Channel {
    float min = 0, max = 0, mean = 0, stddev = 0, p1 = 0, p99 = 0;
  };
  std::vector<Channel> channels;
};

// File format: "MMCD1\n", one JSON header line, '\n', then H*W*C
// little-endian 32-bit floats.
RasterImage load_raster(const std::string& path);
void save_raster(const RasterImage& img, const std::string& path);

// v -> ln(v + epsilon); rejects negative inputs.
RasterImage log_transform(const RasterImage& img, float epsilon = 1e-6f);

// Percentiles use nearest-rank on the sorted channel values.
BandStats compute_stats(const RasterImage& img);

// Per channel: clamp(2*(v - p1)/(p99 - p1) - 1, -1, 1); a constant channel
// (p99 == p1) maps to all zeros.
RasterImage normalize(const RasterImage& img, const BandStats& stats);

}  // namespace mmcd
