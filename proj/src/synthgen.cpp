#include "mmcd/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmcd/kernels.hpp"
#include "mmcd/rng.hpp"

namespace mmcd {

namespace {

// Smooth noise thresholded at equal-probability quantiles.
std::vector<int> latent_class_field(int h, int w, int num_classes, double smoothness, Rng& rng) {
  const size_t npix = static_cast<size_t>(h) * w;
  std::vector<float> noise(npix);
  for (auto& v : noise) v = static_cast<float>(rng.normal());
  std::vector<float> smooth(npix);
  kern::gaussian_blur(noise.data(), h, w, static_cast<float>(std::max(smoothness, 0.5)), smooth.data());

  std::vector<float> sorted = smooth;
  std::sort(sorted.begin(), sorted.end());
  std::vector<float> cuts(num_classes - 1);
  for (int k = 1; k < num_classes; ++k)
    cuts[k - 1] = sorted[std::min(npix - 1, static_cast<size_t>(npix * k / num_classes))];

  std::vector<int> field(npix);
  for (size_t p = 0; p < npix; ++p) {
    int cls = 0;
    while (cls < num_classes - 1 && smooth[p] >= cuts[cls]) ++cls;
    field[p] = cls;
  }
  return field;
}

// Connected blob grown by randomly dilating from a seed pixel.
std::vector<std::uint8_t> grow_blob(int h, int w, size_t target, Rng& rng) {
  const size_t npix = static_cast<size_t>(h) * w;
  std::vector<std::uint8_t> member(npix, 0);
  std::vector<int> region;
  region.reserve(target);
  const int start = rng.uniform_int(0, static_cast<int>(npix) - 1);
  member[start] = 1;
  region.push_back(start);
  size_t attempts = 0;
  const size_t max_attempts = 1000 * target + 10000;
  static const int dy[4] = {-1, 1, 0, 0};
  static const int dx[4] = {0, 0, -1, 1};
  while (region.size() < target) {
    if (++attempts > max_attempts) return {};
    const int at = region[rng.uniform_int(0, static_cast<int>(region.size()) - 1)];
    const int dir = rng.uniform_int(0, 3);
    const int y = at / w + dy[dir];
    const int x = at % w + dx[dir];
    if (y < 0 || y >= h || x < 0 || x >= w) continue;
    const int q = y * w + x;
    if (!member[q]) {
      member[q] = 1;
      region.push_back(q);
    }
  }
  return member;
}

// Distinct per-class signature vectors in [-0.8, 0.8]^c.
std::vector<std::vector<double>> class_means(int num_classes, int c, Rng& rng) {
  std::vector<std::vector<double>> means;
  const double min_sep = 0.45;
  for (int k = 0; k < num_classes; ++k) {
    std::vector<double> m(c);
    for (int tries = 0; tries < 200; ++tries) {
      for (auto& v : m) v = rng.uniform(-0.8, 0.8);
      double closest = 1e9;
      for (const auto& other : means) {
        double d2 = 0.0;
        for (int i = 0; i < c; ++i) d2 += (m[i] - other[i]) * (m[i] - other[i]);
        closest = std::min(closest, std::sqrt(d2));
      }
      if (closest >= min_sep) break;
    }
    means.push_back(m);
  }
  return means;
}

RasterImage normalize_self(const RasterImage& img);

RasterImage render_x(const std::vector<int>& field, int h, int w,
                     const std::vector<std::vector<double>>& means, double noise_std, Rng& rng) {
  const int c = static_cast<int>(means[0].size());
  RasterImage img(h, w, c);
  for (size_t p = 0; p < field.size(); ++p)
    for (int ch = 0; ch < c; ++ch)
      img.values[p * c + ch] = static_cast<float>(means[field[p]][ch] + noise_std * rng.normal());
  return normalize_self(img);
}

// Sensor Y: class means pushed through a mixing matrix and a saturating
// response, so its class signatures have no linear relation to sensor X's.
RasterImage render_y(const std::vector<int>& field, int h, int w,
                     const std::vector<std::vector<double>>& means, double noise_std,
                     bool speckle, Rng& rng) {
  const int c = static_cast<int>(means[0].size());
  std::vector<double> mix(static_cast<size_t>(c) * c);
  for (auto& v : mix) v = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < c; ++i) mix[static_cast<size_t>(i) * c + i] += 1.5;

  std::vector<std::vector<double>> sig(means.size(), std::vector<double>(c));
  for (size_t k = 0; k < means.size(); ++k)
    for (int i = 0; i < c; ++i) {
      double acc = 0.0;
      for (int j = 0; j < c; ++j) acc += mix[static_cast<size_t>(i) * c + j] * means[k][j];
      sig[k][i] = std::tanh(1.5 * acc);
    }

  RasterImage img(h, w, c);
  for (size_t p = 0; p < field.size(); ++p)
    for (int ch = 0; ch < c; ++ch) {
      const double base = sig[field[p]][ch];
      const double v = speckle ? base * (1.0 + noise_std * rng.normal())
                               : base + noise_std * rng.normal();
      img.values[p * c + ch] = static_cast<float>(v);
    }
  return normalize_self(img);
}

RasterImage normalize_self(const RasterImage& img) { return normalize(img, compute_stats(img)); }

}  // namespace

SynthPair generate_pair(const SynthConfig& cfg) {
  if (cfg.change_fraction < 0.0 || cfg.change_fraction >= 1.0)
    throw std::invalid_argument("generate_pair: change_fraction must lie in [0, 1)");
  if (cfg.num_classes < 2) throw std::invalid_argument("generate_pair: need at least 2 classes");
  if (cfg.channels_x < 1 || cfg.channels_y < 1)
    throw std::invalid_argument("generate_pair: channel counts must be >= 1");

  const size_t npix = static_cast<size_t>(cfg.height) * cfg.width;
  const size_t target = static_cast<size_t>(std::llround(cfg.change_fraction * npix));

  for (int retry = 0; retry < 10; ++retry) {
    Rng rng(cfg.seed + static_cast<std::uint64_t>(retry) * 0x9e3779b97f4a7c15ull);

    const std::vector<int> field1 = latent_class_field(cfg.height, cfg.width, cfg.num_classes,
                                                       cfg.smoothness, rng);
    std::vector<int> field2 = field1;
    std::vector<std::uint8_t> blob(npix, 0);
    if (target > 0) {
      blob = grow_blob(cfg.height, cfg.width, target, rng);
      if (blob.empty()) continue;  // stuck walk, retry with a derived seed
      const int shift = rng.uniform_int(1, cfg.num_classes - 1);
      for (size_t p = 0; p < npix; ++p)
        if (blob[p]) field2[p] = (field1[p] + shift) % cfg.num_classes;
    }

    const auto means_x = class_means(cfg.num_classes, cfg.channels_x, rng);
    const auto means_y = class_means(cfg.num_classes, cfg.channels_y, rng);

    SynthPair pair;
    pair.x = render_x(field1, cfg.height, cfg.width, means_x, cfg.noise_std_x, rng);
    pair.y = render_y(field2, cfg.height, cfg.width, means_y, cfg.noise_std_y, cfg.speckle_y, rng);
    pair.gt = RasterImage(cfg.height, cfg.width, 1);
    for (size_t p = 0; p < npix; ++p) pair.gt.values[p] = field1[p] != field2[p] ? 1.0f : 0.0f;
    return pair;
  }
  throw std::runtime_error("generate_pair: change blob could not reach the target fraction");
}

}  // namespace mmcd
