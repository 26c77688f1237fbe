#include "mmcd/png_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace mmcd {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> buf;
  put_u32(buf, static_cast<std::uint32_t>(data.size()));
  buf.insert(buf.end(), type, type + 4);
  buf.insert(buf.end(), data.begin(), data.end());
  const std::uint32_t crc = crc32(crc32(0L, reinterpret_cast<const Bytef*>(type), 4),
                                  data.empty() ? Z_NULL : data.data(),
                                  static_cast<uInt>(data.size()));
  put_u32(buf, crc);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_png(const std::string& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels) {
  if (channels != 1 && channels != 3) throw std::invalid_argument("write_png: channels must be 1 or 3");
  if (pixels.size() != static_cast<size_t>(width) * height * channels)
    throw std::invalid_argument("write_png: pixel buffer size mismatch");

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_png: cannot open " + path);

  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);                                  // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);              // gray / truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(f, "IHDR", ihdr);

  // Raw scanlines, each prefixed with filter byte 0.
  const size_t stride = static_cast<size_t>(width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw[y * (stride + 1)] = 0;
    std::memcpy(&raw[y * (stride + 1) + 1], &pixels[y * stride], stride);
  }

  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("write_png: deflate failed");
  comp.resize(comp_size);
  write_chunk(f, "IDAT", comp);
  write_chunk(f, "IEND", {});
  if (!f) throw std::runtime_error("write_png: write failed for " + path);
}

void write_raster_png(const RasterImage& img, const std::string& path) {
  const size_t npix = static_cast<size_t>(img.height) * img.width;
  const int out_ch = img.channels == 1 ? 1 : 3;
  std::vector<std::uint8_t> pixels(npix * out_ch);
  for (int oc = 0; oc < out_ch; ++oc) {
    const int src = std::min(oc, img.channels - 1);
    float lo = img.values[src], hi = img.values[src];
    for (size_t p = 0; p < npix; ++p) {
      const float v = img.values[p * img.channels + src];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const float scale = hi > lo ? 255.0f / (hi - lo) : 0.0f;
    for (size_t p = 0; p < npix; ++p) {
      const float v = (img.values[p * img.channels + src] - lo) * scale;
      pixels[p * out_ch + oc] = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
    }
  }
  write_png(path, img.width, img.height, out_ch, pixels);
}

}  // namespace mmcd
