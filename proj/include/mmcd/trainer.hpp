#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmcd/model.hpp"
#include "mmcd/raster.hpp"

namespace mmcd {

struct TrainConfig {
  int epochs = 100;
  int batches_per_epoch = 10;
  int batch_size = 10;
  int patch_size = 100;
  int affinity_crop = 20;
  double lr_base = 1e-4;
  double lr_decay_main = 0.96;
  double lr_decay_code = 0.9;
  int lr_decay_every = 1;
  std::vector<int> prior_update_epochs = {25, 50, 75};
  LossWeights weights;
  std::uint64_t seed = 0;
  bool amsgrad = false;
  int infer_tile = 128;
  int infer_overlap = 16;

  void validate() const;
};

// Per-pixel probability of being unchanged; all zeros until the first
// self-supervised update.
struct PriorMap {
  RasterImage values;
  PriorMap() = default;
  PriorMap(int h, int w) : values(h, w, 1, 0.0f) {}
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double l_r = 0, l_c = 0, l_t = 0, l_z = 0, total = 0;
  double lr_main = 0, lr_code = 0;
};

struct PatchBatch {
  grad::TensorPtr<float> x;
  grad::TensorPtr<float> y;
  std::vector<float> pi;  // batch_size * patch_size^2
};

struct DihedralElement {
  int quarter_turns = 0;  // 0..3 clockwise
  bool flip = false;      // upside-down flip after rotation
};

// Apply one dihedral-group element to a square h*w*c grid.
void dihedral_apply(const float* src, int n, int c, DihedralElement e, float* dst);

DihedralElement random_dihedral(Rng& rng);

// Apply the same randomly drawn element to a co-located (x, y, pi) triple.
void augment(std::vector<float>& x, int cx, std::vector<float>& y, int cy,
             std::vector<float>& pi, int n, Rng& rng);

// Co-located patches at uniformly random corners, each triple identically
// augmented; pi is the flattened prior crop.
PatchBatch sample_batch(Rng& rng, const RasterImage& x, const RasterImage& y,
                        const PriorMap& prior, const TrainConfig& cfg);

enum class Direction { ReconstructX, ReconstructY, TranslateXY, TranslateYX, EncodeX, EncodeY };

// Full-image inference with overlap-averaged tiles; dropout off. Output
// spatial dims equal the input's.
RasterImage infer_full(const CoupledModel<float>& model, const RasterImage& img, Direction dir,
                       int tile, int overlap);

// Pi = 1 - Delta with Delta the min-max scaled difference image from tiled
// full-image translations; a constant Delta yields all ones.
PriorMap update_prior(const CoupledModel<float>& model, const RasterImage& x,
                      const RasterImage& y, const TrainConfig& cfg);

// Owns the model, both Adam groups (main over all parameters, code over
// encoder parameters) and the training RNG.
class Trainer {
 public:
  Trainer(int channels_x, int channels_y, const TrainConfig& cfg);

  // Runs the batches of one epoch (0-based index drives both schedules) and
  // returns the epoch-mean losses.
  LossReport train_epoch(const RasterImage& x, const RasterImage& y, const PriorMap& prior,
                         int epoch);

  CoupledModel<float>& model() { return model_; }
  const CoupledModel<float>& model() const { return model_; }
  grad::AdamState<float>& adam_main() { return adam_main_; }
  grad::AdamState<float>& adam_code() { return adam_code_; }
  Rng& rng() { return rng_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  TrainConfig cfg_;
  Rng rng_;
  CoupledModel<float> model_;
  grad::AdamState<float> adam_main_;
  grad::AdamState<float> adam_code_;
};

struct FitResult {
  Trainer trainer;
  PriorMap prior;
  std::vector<EpochStats> history;
};

// Full protocol: cfg.epochs epochs, prior refreshed after each epoch listed
// in cfg.prior_update_epochs (1-based). When checkpoint_dir is non-empty a
// checkpoint and prior snapshot are written at every update.
FitResult fit(const RasterImage& x, const RasterImage& y, const TrainConfig& cfg,
              const std::string& checkpoint_dir = "");

}  // namespace mmcd
