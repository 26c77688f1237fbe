#include "mmcd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "mmcd/affinity.hpp"
#include "mmcd/changemap.hpp"
#include "mmcd/checkpoint.hpp"

namespace mmcd {

using grad::Tape;
using grad::TensorPtr;

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (batches_per_epoch < 1 || batch_size < 1)
    throw std::invalid_argument("config: batch counts must be >= 1");
  if (patch_size < 1) throw std::invalid_argument("config: patch size must be >= 1");
  if (affinity_crop < 2)
    throw std::invalid_argument("config: affinity crop must be >= 2 (pairwise distances need at least 2 pixels)");
  if (affinity_crop > patch_size)
    throw std::invalid_argument("config: affinity crop cannot exceed the patch size");
  if (!(lr_base > 0.0)) throw std::invalid_argument("config: learning rate must be positive");
  if (lr_decay_main <= 0.0 || lr_decay_main > 1.0 || lr_decay_code <= 0.0 || lr_decay_code > 1.0)
    throw std::invalid_argument("config: decay rates must lie in (0, 1]");
  if (lr_decay_every < 1) throw std::invalid_argument("config: decay step must be >= 1");
  if (infer_tile < 3) throw std::invalid_argument("config: inference tile must be >= 3");
  if (infer_overlap < 0 || infer_overlap >= (infer_tile + 1) / 2)
    throw std::invalid_argument("config: inference overlap must be < tile/2");
  if (weights.lambda_r < 0 || weights.lambda_c < 0 || weights.lambda_t < 0 || weights.lambda_z < 0)
    throw std::invalid_argument("config: loss weights must be >= 0");
}

void dihedral_apply(const float* src, int n, int c, DihedralElement e, float* dst) {
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col) {
      int sr = r, sc = col;
      if (e.flip) sr = n - 1 - sr;
      // Inverse of k clockwise quarter-turns.
      for (int q = 0; q < e.quarter_turns; ++q) {
        const int tr = sr;
        sr = n - 1 - sc;
        sc = tr;
      }
      std::copy_n(src + (static_cast<size_t>(sr) * n + sc) * c, c,
                  dst + (static_cast<size_t>(r) * n + col) * c);
    }
}

DihedralElement random_dihedral(Rng& rng) {
  DihedralElement e;
  e.quarter_turns = rng.uniform_int(0, 3);
  e.flip = rng.uniform_int(0, 1) == 1;
  return e;
}

void augment(std::vector<float>& x, int cx, std::vector<float>& y, int cy, std::vector<float>& pi,
             int n, Rng& rng) {
  if (x.size() != static_cast<size_t>(n) * n * cx || y.size() != static_cast<size_t>(n) * n * cy ||
      pi.size() != static_cast<size_t>(n) * n)
    throw std::invalid_argument("augment: patches must be square and co-sized");
  const DihedralElement e = random_dihedral(rng);
  std::vector<float> tmp(std::max(x.size(), y.size()));
  dihedral_apply(x.data(), n, cx, e, tmp.data());
  std::copy_n(tmp.data(), x.size(), x.data());
  dihedral_apply(y.data(), n, cy, e, tmp.data());
  std::copy_n(tmp.data(), y.size(), y.data());
  dihedral_apply(pi.data(), n, 1, e, tmp.data());
  std::copy_n(tmp.data(), pi.size(), pi.data());
}

PatchBatch sample_batch(Rng& rng, const RasterImage& x, const RasterImage& y,
                        const PriorMap& prior, const TrainConfig& cfg) {
  const int p = cfg.patch_size;
  if (p > x.height || p > x.width)
    throw std::invalid_argument("sample_batch: image smaller than the patch size");
  if (x.height != y.height || x.width != y.width)
    throw std::invalid_argument("sample_batch: images must share spatial dims");

  PatchBatch batch;
  batch.x = grad::make_tensor<float>(cfg.batch_size, p, p, x.channels, true);
  batch.y = grad::make_tensor<float>(cfg.batch_size, p, p, y.channels, true);
  batch.pi.resize(static_cast<size_t>(cfg.batch_size) * p * p);

  std::vector<float> px(static_cast<size_t>(p) * p * x.channels);
  std::vector<float> py(static_cast<size_t>(p) * p * y.channels);
  std::vector<float> ppi(static_cast<size_t>(p) * p);
  for (int bi = 0; bi < cfg.batch_size; ++bi) {
    const int r0 = rng.uniform_int(0, x.height - p);
    const int c0 = rng.uniform_int(0, x.width - p);
    for (int r = 0; r < p; ++r)
      for (int col = 0; col < p; ++col) {
        for (int ch = 0; ch < x.channels; ++ch)
          px[(static_cast<size_t>(r) * p + col) * x.channels + ch] = x.at(r0 + r, c0 + col, ch);
        for (int ch = 0; ch < y.channels; ++ch)
          py[(static_cast<size_t>(r) * p + col) * y.channels + ch] = y.at(r0 + r, c0 + col, ch);
        ppi[static_cast<size_t>(r) * p + col] = prior.values.at(r0 + r, c0 + col, 0);
      }
    augment(px, x.channels, py, y.channels, ppi, p, rng);
    std::copy(px.begin(), px.end(), batch.x->v.begin() + static_cast<size_t>(bi) * px.size());
    std::copy(py.begin(), py.end(), batch.y->v.begin() + static_cast<size_t>(bi) * py.size());
    std::copy(ppi.begin(), ppi.end(), batch.pi.begin() + static_cast<size_t>(bi) * ppi.size());
  }
  return batch;
}

RasterImage infer_full(const CoupledModel<float>& model, const RasterImage& img, Direction dir,
                       int tile, int overlap) {
  if (tile < 3) throw std::invalid_argument("infer_full: tile must be >= 3");
  if (overlap < 0 || overlap >= (tile + 1) / 2)
    throw std::invalid_argument("infer_full: overlap must be < tile/2");

  int in_ch = 0, out_ch = 0;
  switch (dir) {
    case Direction::ReconstructX: in_ch = model.channels_x; out_ch = model.channels_x; break;
    case Direction::ReconstructY: in_ch = model.channels_y; out_ch = model.channels_y; break;
    case Direction::TranslateXY: in_ch = model.channels_x; out_ch = model.channels_y; break;
    case Direction::TranslateYX: in_ch = model.channels_y; out_ch = model.channels_x; break;
    case Direction::EncodeX: in_ch = model.channels_x; out_ch = model.code_channels; break;
    case Direction::EncodeY: in_ch = model.channels_y; out_ch = model.code_channels; break;
  }
  if (img.channels != in_ch)
    throw std::invalid_argument("infer_full: image channels do not match the direction");

  auto run = [&](const grad::Tensor4<float>& in) {
    switch (dir) {
      case Direction::ReconstructX: return eval_apply(model.decoder_x, eval_apply(model.encoder_x, in));
      case Direction::ReconstructY: return eval_apply(model.decoder_y, eval_apply(model.encoder_y, in));
      case Direction::TranslateXY: return eval_apply(model.decoder_y, eval_apply(model.encoder_x, in));
      case Direction::TranslateYX: return eval_apply(model.decoder_x, eval_apply(model.encoder_y, in));
      case Direction::EncodeX: return eval_apply(model.encoder_x, in);
      default: return eval_apply(model.encoder_y, in);
    }
  };

  const int th = std::min(tile, img.height);
  const int tw = std::min(tile, img.width);
  // Pixels closer than trim to an interior tile edge see the tile's zero
  // padding instead of real context; their contributions are dropped. With
  // overlap >= 12 the kept regions still cover the image and every kept
  // value matches whole-image inference exactly (receptive radius is 6).
  const int trim = overlap / 2;
  auto positions = [&](int extent, int t) {
    std::vector<int> pos;
    const int step = std::max(1, t - overlap);
    for (int p = 0;; p += step) {
      if (p + t >= extent) {
        pos.push_back(extent - t);
        break;
      }
      pos.push_back(p);
    }
    return pos;
  };
  const std::vector<int> ys = positions(img.height, th);
  const std::vector<int> xs = positions(img.width, tw);

  std::vector<double> acc(static_cast<size_t>(img.height) * img.width * out_ch, 0.0);
  std::vector<int> cnt(static_cast<size_t>(img.height) * img.width, 0);
  grad::Tensor4<float> in(1, th, tw, in_ch);
  for (int y0 : ys)
    for (int x0 : xs) {
      for (int r = 0; r < th; ++r)
        for (int col = 0; col < tw; ++col)
          for (int ch = 0; ch < in_ch; ++ch) in.at(0, r, col, ch) = img.at(y0 + r, x0 + col, ch);
      const grad::Tensor4<float> out = run(in);
      const int r0 = y0 == 0 ? 0 : trim;
      const int r1 = y0 + th == img.height ? th : th - trim;
      const int c0 = x0 == 0 ? 0 : trim;
      const int c1 = x0 + tw == img.width ? tw : tw - trim;
      for (int r = r0; r < r1; ++r)
        for (int col = c0; col < c1; ++col) {
          const size_t p = static_cast<size_t>(y0 + r) * img.width + (x0 + col);
          cnt[p] += 1;
          for (int ch = 0; ch < out_ch; ++ch) acc[p * out_ch + ch] += out.at(0, r, col, ch);
        }
    }

  RasterImage result(img.height, img.width, out_ch);
  for (size_t p = 0; p < cnt.size(); ++p) {
    if (cnt[p] == 0) throw std::logic_error("infer_full: tile trimming left a pixel uncovered");
    for (int ch = 0; ch < out_ch; ++ch)
      result.values[p * out_ch + ch] = static_cast<float>(acc[p * out_ch + ch] / cnt[p]);
  }
  return result;
}

PriorMap update_prior(const CoupledModel<float>& model, const RasterImage& x,
                      const RasterImage& y, const TrainConfig& cfg) {
  const RasterImage y_hat = infer_full(model, x, Direction::TranslateXY, cfg.infer_tile, cfg.infer_overlap);
  const RasterImage x_hat = infer_full(model, y, Direction::TranslateYX, cfg.infer_tile, cfg.infer_overlap);
  const RasterImage delta = difference_image(x, x_hat, y, y_hat);
  PriorMap prior(x.height, x.width);
  for (size_t p = 0; p < delta.values.size(); ++p) prior.values.values[p] = 1.0f - delta.values[p];
  return prior;
}

Trainer::Trainer(int channels_x, int channels_y, const TrainConfig& cfg)
    : cfg_(cfg), rng_(cfg.seed), model_(CoupledModel<float>::create(channels_x, channels_y, rng_)) {
  cfg_.validate();
  adam_main_.amsgrad = cfg.amsgrad;
  adam_code_.amsgrad = cfg.amsgrad;
  adam_main_.init(model_.parameters());
  adam_code_.init(model_.encoder_parameters());
}

LossReport Trainer::train_epoch(const RasterImage& x, const RasterImage& y, const PriorMap& prior,
                                int epoch) {
  const double lr_main = grad::schedule_rate({cfg_.lr_base, cfg_.lr_decay_main, cfg_.lr_decay_every}, epoch);
  const double lr_code = grad::schedule_rate({cfg_.lr_base, cfg_.lr_decay_code, cfg_.lr_decay_every}, epoch);
  const int crop = cfg_.affinity_crop;
  const int n = crop * crop;

  const auto all_params = model_.parameters();
  const auto enc_params = model_.encoder_parameters();

  LossReport epoch_mean;
  for (int b = 0; b < cfg_.batches_per_epoch; ++b) {
    PatchBatch batch = sample_batch(rng_, x, y, prior, cfg_);

    // Affinity-driven similarity target on the inner crop of every pair,
    // contrast-stretched against the batch extremes of D.
    std::vector<std::vector<double>> dmats(cfg_.batch_size);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    const int off = (cfg_.patch_size - crop) / 2;
    std::vector<double> cropx(static_cast<size_t>(n) * x.channels);
    std::vector<double> cropy(static_cast<size_t>(n) * y.channels);
    for (int bi = 0; bi < cfg_.batch_size; ++bi) {
      for (int r = 0; r < crop; ++r)
        for (int col = 0; col < crop; ++col) {
          for (int ch = 0; ch < x.channels; ++ch)
            cropx[(static_cast<size_t>(r) * crop + col) * x.channels + ch] =
                batch.x->at(bi, off + r, off + col, ch);
          for (int ch = 0; ch < y.channels; ++ch)
            cropy[(static_cast<size_t>(r) * crop + col) * y.channels + ch] =
                batch.y->at(bi, off + r, off + col, ch);
        }
      const auto dx = pairwise_distances(cropx, n, x.channels);
      const auto dy = pairwise_distances(cropy, n, y.channels);
      const int k = default_neighbor_rank(n);
      const auto ax = affinity_matrix(dx, n, kernel_width(dx, n, k));
      const auto ay = affinity_matrix(dy, n, kernel_width(dy, n, k));
      dmats[bi] = crossmodal_distance(ax, ay);
      for (double v : dmats[bi]) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    auto s_target = grad::make_tensor<float>(cfg_.batch_size, n, n, 1, true);
    for (int bi = 0; bi < cfg_.batch_size; ++bi) {
      const auto sim = similarity_with_range(dmats[bi], n, lo, hi);
      for (size_t i = 0; i < sim.similarities.size(); ++i)
        s_target->v[static_cast<size_t>(bi) * n * n + i] = static_cast<float>(sim.similarities[i]);
    }

    Tape<float> tape;
    const auto tr = transform(tape, model_, batch.x, batch.y, /*training=*/true, rng_);
    const auto l_r = loss_reconstruction(tape, batch.x, tr.x_tilde, batch.y, tr.y_tilde);
    const auto l_c = loss_cycle(tape, batch.x, tr.x_dot, batch.y, tr.y_dot);
    const auto l_t = loss_translation(tape, batch.x, tr.x_hat, batch.y, tr.y_hat, batch.pi);
    const auto zx_crop = grad::crop_center(tape, tr.z_x, crop, crop);
    const auto zy_crop = grad::crop_center(tape, tr.z_y, crop, crop);
    const auto r_mat = grad::code_correlation(tape, zx_crop, zy_crop);
    const auto l_z = loss_code(tape, r_mat, s_target);

    TensorPtr<float> total;
    try {
      total = total_loss(tape, l_r, l_c, l_t, l_z, cfg_.weights);
    } catch (const std::exception& e) {
      throw std::runtime_error("train_epoch: epoch " + std::to_string(epoch + 1) + ", batch " +
                               std::to_string(b + 1) + ": " + e.what());
    }

    const auto l_main = grad::weighted_sum<float>(
        tape, {{l_r, cfg_.weights.lambda_r}, {l_c, cfg_.weights.lambda_c}, {l_t, cfg_.weights.lambda_t}});

    // Both gradient sets come from the same forward pass; the two Adam
    // groups are applied afterwards so neither step skews the other's
    // gradients.
    tape.backward_scalar(l_main);
    std::vector<std::vector<float>> g_main(all_params.size());
    for (size_t k = 0; k < all_params.size(); ++k)
      g_main[k] = all_params[k]->g.size() == all_params[k]->numel()
                      ? all_params[k]->g
                      : std::vector<float>(all_params[k]->numel(), 0.0f);
    model_.zero_grad();

    l_z->ensure_grad();
    l_z->g[0] = cfg_.weights.lambda_z;
    tape.backward(l_z);
    std::vector<std::vector<float>> g_code(enc_params.size());
    for (size_t k = 0; k < enc_params.size(); ++k)
      g_code[k] = enc_params[k]->g.size() == enc_params[k]->numel()
                      ? enc_params[k]->g
                      : std::vector<float>(enc_params[k]->numel(), 0.0f);
    model_.zero_grad();

    grad::adam_step(all_params, g_main, adam_main_, static_cast<float>(lr_main));
    grad::adam_step(enc_params, g_code, adam_code_, static_cast<float>(lr_code));

    epoch_mean.l_r += l_r->v[0];
    epoch_mean.l_c += l_c->v[0];
    epoch_mean.l_t += l_t->v[0];
    epoch_mean.l_z += l_z->v[0];
    epoch_mean.total += total->v[0];
  }

  const double nb = cfg_.batches_per_epoch;
  epoch_mean.l_r /= nb;
  epoch_mean.l_c /= nb;
  epoch_mean.l_t /= nb;
  epoch_mean.l_z /= nb;
  epoch_mean.total /= nb;
  return epoch_mean;
}

FitResult fit(const RasterImage& x, const RasterImage& y, const TrainConfig& cfg,
              const std::string& checkpoint_dir) {
  cfg.validate();
  if (cfg.epochs > 0 && (cfg.patch_size > x.height || cfg.patch_size > x.width))
    throw std::invalid_argument("fit: image smaller than the patch size");

  FitResult result{Trainer(x.channels, y.channels, cfg), PriorMap(x.height, x.width), {}};
  for (int e = 0; e < cfg.epochs; ++e) {
    const LossReport stats = result.trainer.train_epoch(x, y, result.prior, e);
    EpochStats es;
    es.epoch = e + 1;
    es.l_r = stats.l_r;
    es.l_c = stats.l_c;
    es.l_t = stats.l_t;
    es.l_z = stats.l_z;
    es.total = stats.total;
    es.lr_main = grad::schedule_rate({cfg.lr_base, cfg.lr_decay_main, cfg.lr_decay_every}, e);
    es.lr_code = grad::schedule_rate({cfg.lr_base, cfg.lr_decay_code, cfg.lr_decay_every}, e);
    result.history.push_back(es);

    if (std::find(cfg.prior_update_epochs.begin(), cfg.prior_update_epochs.end(), e + 1) !=
        cfg.prior_update_epochs.end()) {
      result.prior = update_prior(result.trainer.model(), x, y, cfg);
      if (!checkpoint_dir.empty()) {
        std::filesystem::create_directories(checkpoint_dir);
        const std::string tag = std::to_string(e + 1);
        save_checkpoint(checkpoint_dir + "/checkpoint_epoch" + tag + ".mmcdckpt",
                        result.trainer.model(), result.trainer.adam_main(),
                        result.trainer.adam_code(), e + 1, result.trainer.rng().state());
        save_raster(result.prior.values, checkpoint_dir + "/prior_epoch" + tag + ".mmcd");
      }
    }
  }
  return result;
}

}  // namespace mmcd
