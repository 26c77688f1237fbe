#pragma once

#include <string>

#include "mmcd/raster.hpp"

namespace mmcd {

enum class KappaVariant { AsReported, Standard };

struct Confusion {
  long long tp = 0, tn = 0, fp = 0, fn = 0;
  long long total() const { return tp + tn + fp + fn; }
};

struct ScoreResult {
  Confusion confusion;
  double oa = 0.0;
  double p_e = 0.0;
  double kappa = 0.0;
  bool degenerate_kappa = false;  // p_e == 1, kappa reported as 0
  KappaVariant variant = KappaVariant::AsReported;
  RasterImage confusion_map;  // 3 channels: TP white, TN black, FP green, FN red
};

struct ChangeResult {
  RasterImage delta;           // single channel, min-max scaled to [0,1]
  RasterImage delta_filtered;  // after optional Gaussian smoothing
  double threshold = 0.0;
  RasterImage map;             // binary, 1 = changed
};

// Per pixel w_x*||x - x_hat||^2 + w_y*||y - y_hat||^2 (or unsquared norms
// with use_root), then global min-max scaling to [0,1]. A constant result
// scales to all zeros. Weights <= 0 select the defaults 1/|X| and 1/|Y|.
RasterImage difference_image(const RasterImage& x, const RasterImage& x_hat,
                             const RasterImage& y, const RasterImage& y_hat,
                             double w_x = -1.0, double w_y = -1.0, bool use_root = false);

// Separable Gaussian smoothing, radius ceil(3*sigma), reflected borders,
// output clamped back to [0,1]. sigma_s == 0 is the identity.
RasterImage gaussian_filter(const RasterImage& delta, double sigma_s);

// Histogram threshold over [0,1] maximizing between-class variance; ties
// break toward the lower threshold. Throws on a constant image.
double otsu_threshold(const RasterImage& delta, int bins = 256);

// 1 where value >= threshold, else 0.
RasterImage binarize(const RasterImage& delta, double threshold);

ScoreResult score(const RasterImage& map, const RasterImage& gt,
                  KappaVariant variant = KappaVariant::AsReported);

}  // namespace mmcd
