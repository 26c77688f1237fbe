#include "mmcd/model.hpp"

#include <cmath>
#include <stdexcept>

#include "mmcd/kernels.hpp"

namespace mmcd {

using grad::Activation;
using grad::ConvLayer;
using grad::Tape;
using grad::Tensor4;
using grad::TensorPtr;

template <typename T>
CoupledModel<T> CoupledModel<T>::create(int channels_x, int channels_y, Rng& rng, int hidden,
                                        int code) {
  if (channels_x < 1 || channels_y < 1) throw std::invalid_argument("CoupledModel: channel counts must be >= 1");
  if (hidden < 1 || code < 1) throw std::invalid_argument("CoupledModel: hidden/code sizes must be >= 1");
  CoupledModel<T> m;
  m.channels_x = channels_x;
  m.channels_y = channels_y;
  m.hidden_channels = hidden;
  m.code_channels = code;
  auto stack = [&](int cin, int cout_last) {
    std::array<ConvLayer<T>, 3> net;
    net[0] = grad::make_conv_layer<T>(cin, hidden, Activation::LeakyRelu, rng);
    net[1] = grad::make_conv_layer<T>(hidden, hidden, Activation::LeakyRelu, rng);
    net[2] = grad::make_conv_layer<T>(hidden, cout_last, Activation::Tanh, rng);
    return net;
  };
  m.encoder_x = stack(channels_x, code);
  m.encoder_y = stack(channels_y, code);
  m.decoder_x = stack(code, channels_x);
  m.decoder_y = stack(code, channels_y);
  return m;
}

template <typename T>
std::vector<TensorPtr<T>> CoupledModel<T>::parameters() const {
  std::vector<TensorPtr<T>> out;
  for (const auto* net : {&encoder_x, &encoder_y, &decoder_x, &decoder_y})
    for (const auto& layer : *net) {
      out.push_back(layer.kernel);
      out.push_back(layer.bias);
    }
  return out;
}

template <typename T>
std::vector<TensorPtr<T>> CoupledModel<T>::encoder_parameters() const {
  std::vector<TensorPtr<T>> out;
  for (const auto* net : {&encoder_x, &encoder_y})
    for (const auto& layer : *net) {
      out.push_back(layer.kernel);
      out.push_back(layer.bias);
    }
  return out;
}

template <typename T>
void CoupledModel<T>::zero_grad() const {
  for (const auto& p : parameters()) p->g.clear();
}

namespace {

template <typename T>
TensorPtr<T> apply_net(Tape<T>& tape, const std::array<ConvLayer<T>, 3>& net,
                       const TensorPtr<T>& x, bool training, Rng& rng, T dropout_rate) {
  auto h1 = grad::conv2d(tape, x, net[0]);
  h1 = grad::dropout(tape, h1, dropout_rate, training, rng);
  auto h2 = grad::conv2d(tape, h1, net[1]);
  h2 = grad::dropout(tape, h2, dropout_rate, training, rng);
  return grad::conv2d(tape, h2, net[2]);
}

}  // namespace

template <typename T>
TransformResult<T> transform(Tape<T>& tape, const CoupledModel<T>& model, const TensorPtr<T>& x,
                             const TensorPtr<T>& y, bool training, Rng& rng) {
  if (x->c != model.channels_x || y->c != model.channels_y)
    throw std::invalid_argument("transform: input channels do not match the model");
  if (x->n != y->n || x->h != y->h || x->w != y->w)
    throw std::invalid_argument("transform: x and y patches must share batch and spatial dims");

  TransformResult<T> r;
  const T rate = model.dropout_rate;
  r.z_x = apply_net(tape, model.encoder_x, x, training, rng, rate);
  r.z_y = apply_net(tape, model.encoder_y, y, training, rng, rate);
  r.x_tilde = apply_net(tape, model.decoder_x, r.z_x, training, rng, rate);
  r.y_tilde = apply_net(tape, model.decoder_y, r.z_y, training, rng, rate);
  r.y_hat = apply_net(tape, model.decoder_y, r.z_x, training, rng, rate);
  r.x_hat = apply_net(tape, model.decoder_x, r.z_y, training, rng, rate);
  auto z_cycle_x = apply_net(tape, model.encoder_y, r.y_hat, training, rng, rate);
  r.x_dot = apply_net(tape, model.decoder_x, z_cycle_x, training, rng, rate);
  auto z_cycle_y = apply_net(tape, model.encoder_x, r.x_hat, training, rng, rate);
  r.y_dot = apply_net(tape, model.decoder_y, z_cycle_y, training, rng, rate);
  return r;
}

template <typename T>
Tensor4<T> eval_apply(const std::array<ConvLayer<T>, 3>& net, const Tensor4<T>& x) {
  if (x.c != net[0].cin()) throw std::invalid_argument("eval_apply: channel mismatch");
  Tensor4<T> cur = x;
  for (const auto& layer : net) {
    Tensor4<T> next(cur.n, cur.h, cur.w, layer.cout());
    kern::conv3x3_forward(cur.v.data(), cur.n, cur.h, cur.w, cur.c, layer.kernel->v.data(),
                          layer.bias->v.data(), layer.cout(), next.v.data());
    const long long total = static_cast<long long>(next.numel());
    if (layer.act == Activation::LeakyRelu) {
      const T slope = layer.slope;
#pragma omp parallel for schedule(static) if (total > 16384)
      for (long long i = 0; i < total; ++i)
        if (next.v[i] < T(0)) next.v[i] *= slope;
    } else if (layer.act == Activation::Tanh) {
#pragma omp parallel for schedule(static) if (total > 16384)
      for (long long i = 0; i < total; ++i) next.v[i] = std::tanh(next.v[i]);
    }
    cur = std::move(next);
  }
  return cur;
}

template <typename T>
TensorPtr<T> loss_reconstruction(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& x_tilde,
                                 const TensorPtr<T>& y, const TensorPtr<T>& y_tilde) {
  auto dx = grad::weighted_sq_distance(tape, x_tilde, x, {});
  auto dy = grad::weighted_sq_distance(tape, y_tilde, y, {});
  return grad::weighted_sum<T>(tape, {{dx, T(1)}, {dy, T(1)}});
}

template <typename T>
TensorPtr<T> loss_cycle(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& x_dot,
                        const TensorPtr<T>& y, const TensorPtr<T>& y_dot) {
  auto dx = grad::weighted_sq_distance(tape, x_dot, x, {});
  auto dy = grad::weighted_sq_distance(tape, y_dot, y, {});
  return grad::weighted_sum<T>(tape, {{dx, T(1)}, {dy, T(1)}});
}

template <typename T>
TensorPtr<T> loss_translation(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& x_hat,
                              const TensorPtr<T>& y, const TensorPtr<T>& y_hat,
                              const std::vector<T>& pi) {
  auto dx = grad::weighted_sq_distance(tape, x_hat, x, pi);
  auto dy = grad::weighted_sq_distance(tape, y_hat, y, pi);
  return grad::weighted_sum<T>(tape, {{dx, T(1)}, {dy, T(1)}});
}

template <typename T>
TensorPtr<T> loss_code(Tape<T>& tape, const TensorPtr<T>& r, const TensorPtr<T>& s) {
  if (!r->same_shape(*s)) throw std::invalid_argument("loss_code: R and S shapes differ");
  return grad::weighted_sq_distance(tape, r, s, {});
}

template <typename T>
TensorPtr<T> total_loss(Tape<T>& tape, const TensorPtr<T>& l_r, const TensorPtr<T>& l_c,
                        const TensorPtr<T>& l_t, const TensorPtr<T>& l_z, const LossWeights& w) {
  for (const auto& term : {l_r, l_c, l_t, l_z})
    if (!std::isfinite(static_cast<double>(term->v[0])))
      throw std::runtime_error("total_loss: non-finite loss term, training diverged");
  return grad::weighted_sum<T>(tape, {{l_r, static_cast<T>(w.lambda_r)},
                                      {l_c, static_cast<T>(w.lambda_c)},
                                      {l_t, static_cast<T>(w.lambda_t)},
                                      {l_z, static_cast<T>(w.lambda_z)}});
}

#define MMCD_INSTANTIATE_MODEL(T)                                                                \
  template struct CoupledModel<T>;                                                              \
  template TransformResult<T> transform<T>(Tape<T>&, const CoupledModel<T>&,                    \
                                           const TensorPtr<T>&, const TensorPtr<T>&, bool,      \
                                           Rng&);                                               \
  template Tensor4<T> eval_apply<T>(const std::array<ConvLayer<T>, 3>&, const Tensor4<T>&);     \
  template TensorPtr<T> loss_reconstruction<T>(Tape<T>&, const TensorPtr<T>&,                   \
                                               const TensorPtr<T>&, const TensorPtr<T>&,        \
                                               const TensorPtr<T>&);                            \
  template TensorPtr<T> loss_cycle<T>(Tape<T>&, const TensorPtr<T>&, const TensorPtr<T>&,       \
                                      const TensorPtr<T>&, const TensorPtr<T>&);                \
  template TensorPtr<T> loss_translation<T>(Tape<T>&, const TensorPtr<T>&, const TensorPtr<T>&, \
                                            const TensorPtr<T>&, const TensorPtr<T>&,           \
                                            const std::vector<T>&);                             \
  template TensorPtr<T> loss_code<T>(Tape<T>&, const TensorPtr<T>&, const TensorPtr<T>&);       \
  template TensorPtr<T> total_loss<T>(Tape<T>&, const TensorPtr<T>&, const TensorPtr<T>&,       \
                                      const TensorPtr<T>&, const TensorPtr<T>&,                 \
                                      const LossWeights&);

MMCD_INSTANTIATE_MODEL(float)
MMCD_INSTANTIATE_MODEL(double)
#undef MMCD_INSTANTIATE_MODEL

}  // namespace mmcd
