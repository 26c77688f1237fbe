#include "mmcd/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mmcd {

namespace {
constexpr char kMagic[] = "MMCD1";
}

RasterImage::RasterImage(int h, int w, int c, float fill)
    : height(h), width(w), channels(c), values(static_cast<size_t>(h) * w * c, fill) {
  if (h < 1 || w < 1 || c < 1) throw std::invalid_argument("RasterImage: dimensions must be >= 1");
}

RasterImage load_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_raster: cannot open " + path);

  std::string magic;
  if (!std::getline(in, magic) || magic != kMagic)
    throw std::runtime_error("load_raster: bad magic in " + path);

  std::string header_line;
  if (!std::getline(in, header_line)) throw std::runtime_error("load_raster: missing header in " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_raster: malformed header in " + path + ": " + e.what());
  }
  if (!header.contains("height") || !header.contains("width") || !header.contains("channels"))
    throw std::runtime_error("load_raster: header missing dimensions in " + path);
  if (header.value("dtype", "f32") != "f32" || header.value("layout", "hwc-row-major") != "hwc-row-major")
    throw std::runtime_error("load_raster: unsupported dtype/layout in " + path);

  RasterImage img;
  img.height = header["height"].get<int>();
  img.width = header["width"].get<int>();
  img.channels = header["channels"].get<int>();
  if (img.height < 1 || img.width < 1 || img.channels < 1)
    throw std::runtime_error("load_raster: non-positive dimensions in " + path);
  if (header.contains("band_names")) img.band_names = header["band_names"].get<std::vector<std::string>>();

  const size_t count = img.numel();
  img.values.resize(count);
  in.read(reinterpret_cast<char*>(img.values.data()), static_cast<std::streamsize>(count * 4));
  const size_t got_bytes = static_cast<size_t>(in.gcount());
  if (got_bytes != count * 4)
    throw std::runtime_error("load_raster: payload length mismatch in " + path + ": header declares " +
                             std::to_string(count) + " floats, payload holds " +
                             std::to_string(got_bytes / 4));
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("load_raster: payload length mismatch in " + path +
                             ": trailing bytes beyond the declared " + std::to_string(count) + " floats");

  for (size_t i = 0; i < count; ++i)
    if (!std::isfinite(img.values[i]))
      throw std::runtime_error("load_raster: non-finite value at index " + std::to_string(i) + " in " + path);
  return img;
}

void save_raster(const RasterImage& img, const std::string& path) {
  if (img.values.size() != img.numel())
    throw std::invalid_argument("save_raster: value count does not match dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_raster: cannot open " + path + " for writing");

  nlohmann::json header = {{"height", img.height},
                           {"width", img.width},
                           {"channels", img.channels},
                           {"dtype", "f32"},
                           {"layout", "hwc-row-major"}};
  if (!img.band_names.empty()) header["band_names"] = img.band_names;

  out << kMagic << '\n' << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(img.values.data()),
            static_cast<std::streamsize>(img.values.size() * 4));
  if (!out) throw std::runtime_error("save_raster: write failed for " + path);
}

RasterImage log_transform(const RasterImage& img, float epsilon) {
  if (!(epsilon > 0.0f)) throw std::invalid_argument("log_transform: epsilon must be positive");
  RasterImage out = img;
  for (size_t i = 0; i < out.values.size(); ++i) {
    if (out.values[i] < 0.0f)
      throw std::invalid_argument("log_transform: negative value " + std::to_string(out.values[i]) +
                                  " at index " + std::to_string(i));
    out.values[i] = std::log(out.values[i] + epsilon);
  }
  return out;
}

BandStats compute_stats(const RasterImage& img) {
  BandStats stats;
  stats.channels.resize(img.channels);
  const size_t npix = static_cast<size_t>(img.height) * img.width;
  std::vector<float> sorted(npix);
  for (int ch = 0; ch < img.channels; ++ch) {
    for (size_t p = 0; p < npix; ++p) sorted[p] = img.values[p * img.channels + ch];
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (float v : sorted) sum += v;
    const double mean = sum / npix;
    double var = 0.0;
    for (float v : sorted) var += (v - mean) * (v - mean);
    auto rank = [&](double p) {
      size_t idx = static_cast<size_t>(std::ceil(p * npix / 100.0));
      return sorted[std::min(idx, npix - 1)];
    };
    auto& c = stats.channels[ch];
    c.min = sorted.front();
    c.max = sorted.back();
    c.mean = static_cast<float>(mean);
    c.stddev = static_cast<float>(std::sqrt(var / npix));
    c.p1 = rank(1.0);
    c.p99 = rank(99.0);
  }
  return stats;
}

RasterImage normalize(const RasterImage& img, const BandStats& stats) {
  if (static_cast<int>(stats.channels.size()) != img.channels)
    throw std::invalid_argument("normalize: stats cover " + std::to_string(stats.channels.size()) +
                                " channels, image has " + std::to_string(img.channels));
  RasterImage out = img;
  const size_t npix = static_cast<size_t>(img.height) * img.width;
  for (int ch = 0; ch < img.channels; ++ch) {
    const auto& c = stats.channels[ch];
    if (c.p99 == c.p1) {
      for (size_t p = 0; p < npix; ++p) out.values[p * img.channels + ch] = 0.0f;
      continue;
    }
    const float scale = 2.0f / (c.p99 - c.p1);
    for (size_t p = 0; p < npix; ++p) {
      const float v = scale * (img.values[p * img.channels + ch] - c.p1) - 1.0f;
      out.values[p * img.channels + ch] = std::clamp(v, -1.0f, 1.0f);
    }
  }
  return out;
}

}  // namespace mmcd
