#include "mmcd/changemap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmcd/kernels.hpp"

namespace mmcd {

namespace {

void require_same_shape(const RasterImage& a, const RasterImage& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels)
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

void require_binary(const RasterImage& img, const char* what) {
  for (float v : img.values)
    if (v != 0.0f && v != 1.0f)
      throw std::invalid_argument(std::string(what) + ": raster is not binary");
}

}  // namespace

RasterImage difference_image(const RasterImage& x, const RasterImage& x_hat,
                             const RasterImage& y, const RasterImage& y_hat, double w_x,
                             double w_y, bool use_root) {
  require_same_shape(x, x_hat, "difference_image(x)");
  require_same_shape(y, y_hat, "difference_image(y)");
  if (x.height != y.height || x.width != y.width)
    throw std::invalid_argument("difference_image: x and y spatial dims differ");
  if (w_x <= 0.0) w_x = 1.0 / x.channels;
  if (w_y <= 0.0) w_y = 1.0 / y.channels;

  RasterImage delta(x.height, x.width, 1);
  const size_t npix = static_cast<size_t>(x.height) * x.width;
  const long long np = static_cast<long long>(npix);
#pragma omp parallel for schedule(static) if (np > 4096)
  for (long long p = 0; p < np; ++p) {
    double dx = 0.0, dy = 0.0;
    for (int c = 0; c < x.channels; ++c) {
      const double d = static_cast<double>(x.values[p * x.channels + c]) - x_hat.values[p * x.channels + c];
      dx += d * d;
    }
    for (int c = 0; c < y.channels; ++c) {
      const double d = static_cast<double>(y.values[p * y.channels + c]) - y_hat.values[p * y.channels + c];
      dy += d * d;
    }
    if (use_root) {
      dx = std::sqrt(dx);
      dy = std::sqrt(dy);
    }
    delta.values[p] = static_cast<float>(w_x * dx + w_y * dy);
  }

  const auto [lo_it, hi_it] = std::minmax_element(delta.values.begin(), delta.values.end());
  const float lo = *lo_it, hi = *hi_it;
  if (hi > lo) {
    const float inv = 1.0f / (hi - lo);
    for (float& v : delta.values) v = (v - lo) * inv;
  } else {
    std::fill(delta.values.begin(), delta.values.end(), 0.0f);
  }
  return delta;
}

RasterImage gaussian_filter(const RasterImage& delta, double sigma_s) {
  if (sigma_s < 0.0) throw std::invalid_argument("gaussian_filter: sigma must be >= 0");
  if (delta.channels != 1) throw std::invalid_argument("gaussian_filter: expects a single-channel raster");
  RasterImage out(delta.height, delta.width, 1);
  kern::gaussian_blur(delta.values.data(), delta.height, delta.width, static_cast<float>(sigma_s),
                      out.values.data());
  if (sigma_s > 0.0)
    for (float& v : out.values) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

double otsu_threshold(const RasterImage& delta, int bins) {
  if (bins < 2) throw std::invalid_argument("otsu_threshold: need at least 2 bins");
  std::vector<long long> hist(bins, 0);
  for (float v : delta.values) {
    if (v < 0.0f || v > 1.0f) throw std::invalid_argument("otsu_threshold: values must lie in [0,1]");
    const int b = std::min(bins - 1, static_cast<int>(v * bins));
    hist[b] += 1;
  }
  int occupied = 0;
  for (long long h : hist) occupied += h > 0 ? 1 : 0;
  if (occupied < 2)
    throw std::runtime_error("otsu_threshold: degenerate histogram, no threshold separates anything");

  const long long total = static_cast<long long>(delta.values.size());
  double total_weighted = 0.0;
  for (int b = 0; b < bins; ++b) total_weighted += hist[b] * ((b + 0.5) / bins);

  double best_var = -1.0;
  int best_split = 1;
  double w0 = 0.0, sum0 = 0.0;
  // Split k puts bins [0,k) below the threshold edge k/bins.
  for (int k = 1; k < bins; ++k) {
    w0 += hist[k - 1];
    sum0 += hist[k - 1] * ((k - 0.5) / bins);
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_weighted - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best_var) {
      best_var = between;
      best_split = k;
    }
  }
  return static_cast<double>(best_split) / bins;
}

RasterImage binarize(const RasterImage& delta, double threshold) {
  RasterImage out = delta;
  for (float& v : out.values) v = v >= threshold ? 1.0f : 0.0f;
  return out;
}

ScoreResult score(const RasterImage& map, const RasterImage& gt, KappaVariant variant) {
  require_same_shape(map, gt, "score");
  require_binary(map, "score(map)");
  require_binary(gt, "score(gt)");

  ScoreResult r;
  r.variant = variant;
  r.confusion_map = RasterImage(map.height, map.width, 3);
  for (size_t p = 0; p < map.values.size(); ++p) {
    const bool pred = map.values[p] == 1.0f;
    const bool truth = gt.values[p] == 1.0f;
    float red = 0, green = 0, blue = 0;
    if (pred && truth) {
      r.confusion.tp += 1;
      red = green = blue = 1.0f;  // TP white
    } else if (!pred && !truth) {
      r.confusion.tn += 1;        // TN black
    } else if (pred && !truth) {
      r.confusion.fp += 1;
      green = 1.0f;               // FP green
    } else {
      r.confusion.fn += 1;
      red = 1.0f;                 // FN red
    }
    r.confusion_map.values[p * 3 + 0] = red;
    r.confusion_map.values[p * 3 + 1] = green;
    r.confusion_map.values[p * 3 + 2] = blue;
  }

  const double n = static_cast<double>(r.confusion.total());
  const double tp = static_cast<double>(r.confusion.tp);
  const double tn = static_cast<double>(r.confusion.tn);
  const double fp = static_cast<double>(r.confusion.fp);
  const double fn = static_cast<double>(r.confusion.fn);
  r.oa = (tp + tn) / n;
  if (variant == KappaVariant::AsReported) {
    r.p_e = ((tp + fp) / n) * ((fn + tn) / n) + ((tp + fn) / n) * ((fp + tn) / n);
  } else {
    r.p_e = ((tp + fp) / n) * ((tp + fn) / n) + ((fn + tn) / n) * ((fp + tn) / n);
  }
  if (r.p_e == 1.0) {
    r.kappa = 0.0;
    r.degenerate_kappa = true;
  } else {
    r.kappa = (r.oa - r.p_e) / (1.0 - r.p_e);
  }
  return r;
}

}  // namespace mmcd
