#pragma once

#include <cstdint>
#include <vector>

#include "mmcd/raster.hpp"

namespace mmcd {

// Configuration for the synthetic heterogeneous pair generator. A smooth
// latent class field is rendered through two unrelated sensor maps; a
// connected blob of pixels swaps class between the two renderings and
// becomes the ground truth.
struct SynthConfig {
  std::uint64_t seed = 0;
  int height = 128;
  int width = 128;
  int num_classes = 5;
  int channels_x = 3;
  int channels_y = 5;
  double change_fraction = 0.1;
  double noise_std_x = 0.05;
  double noise_std_y = 0.15;
  double smoothness = 8.0;   // correlation length of the latent field, pixels
  bool speckle_y = false;    // multiplicative instead of additive noise on Y
};

struct SynthPair {
  RasterImage x;
  RasterImage y;
  RasterImage gt;  // single channel, 1 = changed
};

SynthPair generate_pair(const SynthConfig& cfg);

}  // namespace mmcd
