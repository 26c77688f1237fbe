#pragma once

#include <array>
#include <vector>

#include "mmcd/adam.hpp"
#include "mmcd/tape.hpp"

namespace mmcd {

struct LossWeights {
  float lambda_r = 1.0f;
  float lambda_c = 1.0f;
  float lambda_t = 1.0f;
  float lambda_z = 1.0f;
};

struct LossReport {
  double l_r = 0.0;
  double l_c = 0.0;
  double l_t = 0.0;
  double l_z = 0.0;
  double total = 0.0;
};

// Two code-aligned autoencoders. Encoders map inputs to a shared 3-channel
// tanh-bounded code space; either decoder accepts either code, which yields
// reconstruction (same-domain) and translation (cross-domain) mappings.
// Every layer is a non-strided, same-padded 3x3 convolution, so spatial
// dimensions are preserved end to end.
template <typename T>
struct CoupledModel {
  std::array<grad::ConvLayer<T>, 3> encoder_x;
  std::array<grad::ConvLayer<T>, 3> encoder_y;
  std::array<grad::ConvLayer<T>, 3> decoder_x;
  std::array<grad::ConvLayer<T>, 3> decoder_y;
  int channels_x = 0;
  int channels_y = 0;
  int hidden_channels = 100;
  int code_channels = 3;
  T dropout_rate = T(0.2);

  static CoupledModel create(int channels_x, int channels_y, Rng& rng, int hidden = 100,
                             int code = 3);

  // Fixed order: encoder_x, encoder_y, decoder_x, decoder_y; kernel then bias
  // per layer. Checkpoints and optimizer groups rely on this order.
  std::vector<grad::TensorPtr<T>> parameters() const;
  std::vector<grad::TensorPtr<T>> encoder_parameters() const;
  void zero_grad() const;
};

template <typename T>
struct TransformResult {
  grad::TensorPtr<T> x_tilde;  // D_x(E_x(x))
  grad::TensorPtr<T> y_tilde;  // D_y(E_y(y))
  grad::TensorPtr<T> x_hat;    // D_x(E_y(y))
  grad::TensorPtr<T> y_hat;    // D_y(E_x(x))
  grad::TensorPtr<T> x_dot;    // D_x(E_y(y_hat)), full cycle of x
  grad::TensorPtr<T> y_dot;    // D_y(E_x(x_hat)), full cycle of y
  grad::TensorPtr<T> z_x;      // E_x(x)
  grad::TensorPtr<T> z_y;      // E_y(y)
};

// Run all six mappings on a co-located patch pair. With training enabled,
// dropout masks are drawn from `rng` in a fixed order.
template <typename T>
TransformResult<T> transform(grad::Tape<T>& tape, const CoupledModel<T>& model,
                             const grad::TensorPtr<T>& x, const grad::TensorPtr<T>& y,
                             bool training, Rng& rng);

// Apply one encoder/decoder stack without recording gradients (inference).
template <typename T>
grad::Tensor4<T> eval_apply(const std::array<grad::ConvLayer<T>, 3>& net,
                            const grad::Tensor4<T>& x);

template <typename T>
grad::TensorPtr<T> loss_reconstruction(grad::Tape<T>& tape, const grad::TensorPtr<T>& x,
                                       const grad::TensorPtr<T>& x_tilde,
                                       const grad::TensorPtr<T>& y,
                                       const grad::TensorPtr<T>& y_tilde);

template <typename T>
grad::TensorPtr<T> loss_cycle(grad::Tape<T>& tape, const grad::TensorPtr<T>& x,
                              const grad::TensorPtr<T>& x_dot, const grad::TensorPtr<T>& y,
                              const grad::TensorPtr<T>& y_dot);

// Prior-weighted translation loss; `pi` holds one weight in [0,1] per
// (batch, pixel).
template <typename T>
grad::TensorPtr<T> loss_translation(grad::Tape<T>& tape, const grad::TensorPtr<T>& x,
                                    const grad::TensorPtr<T>& x_hat, const grad::TensorPtr<T>& y,
                                    const grad::TensorPtr<T>& y_hat, const std::vector<T>& pi);

// Mean squared difference between the code correlation matrix and the
// similarity target. Backward reaches encoder parameters only, because R
// depends on nothing but the direct codes.
template <typename T>
grad::TensorPtr<T> loss_code(grad::Tape<T>& tape, const grad::TensorPtr<T>& r,
                             const grad::TensorPtr<T>& s);

template <typename T>
grad::TensorPtr<T> total_loss(grad::Tape<T>& tape, const grad::TensorPtr<T>& l_r,
                              const grad::TensorPtr<T>& l_c, const grad::TensorPtr<T>& l_t,
                              const grad::TensorPtr<T>& l_z, const LossWeights& w);

}  // namespace mmcd
