#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mmcd/rng.hpp"
#include "mmcd/tensor.hpp"

namespace mmcd::grad {

enum class Activation { None, LeakyRelu, Tanh };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

template <typename T>
struct ConvLayer {
  TensorPtr<T> kernel;  // (3, 3, cin, cout)
  TensorPtr<T> bias;    // (1, 1, 1, cout)
  Activation act = Activation::None;
  T slope = T(0.3);

  int cin() const { return kernel->w; }
  int cout() const { return kernel->c; }
};

// Create a 3x3 layer with Glorot-uniform kernel and zero bias.
template <typename T>
ConvLayer<T> make_conv_layer(int cin, int cout, Activation act, Rng& rng);

// Reverse-mode tape over the fixed op set below. Forward calls record one
// closure per op; backward replays them in reverse. Gradients accumulate
// additively into leaf tensors (parameters, inputs); intermediate gradients
// are cleared at the start of every backward sweep so repeated sweeps add
// the same contribution each time.
template <typename T>
class Tape {
 public:
  // Tape tensors draw recycled buffers with stale contents; every op
  // overwrites its output in full before anything reads it.
  TensorPtr<T> make(int n, int h, int w, int c) {
    if (n < 1 || h < 1 || w < 1 || c < 1) throw std::invalid_argument("Tape::make: bad shape");
    auto t = std::make_shared<Tensor4<T>>();
    t->n = n;
    t->h = h;
    t->w = w;
    t->c = c;
    t->v = BufferPool<T>::instance().acquire(t->numel());
    tracked_.push_back(t);
    return t;
  }

  void record(std::function<void()> bwd) { nodes_.push_back(std::move(bwd)); }

  bool empty() const { return nodes_.empty(); }

  // Backpropagate from `out`, whose gradient must already be seeded.
  void backward(const TensorPtr<T>& out);

  // Seed d(out)/d(out) = 1 for a scalar output and backpropagate.
  void backward_scalar(const TensorPtr<T>& out);

  void clear() {
    nodes_.clear();
    tracked_.clear();
  }

  // All tensors this tape created, in creation order. Lets tests inspect
  // intermediates, e.g. to detect activation-kink crossings between two
  // finite-difference evaluations.
  const std::vector<TensorPtr<T>>& tracked() const { return tracked_; }

 private:
  std::vector<std::function<void()>> nodes_;
  std::vector<TensorPtr<T>> tracked_;
};

// --- ops -------------------------------------------------------------------
// All ops allocate their output on the tape and record the backward closure.

// Same-padding stride-1 3x3 cross-correlation plus bias, then the layer's
// activation. Output spatial dims equal the input's.
template <typename T>
TensorPtr<T> conv2d(Tape<T>& tape, const TensorPtr<T>& x, const ConvLayer<T>& layer);

template <typename T>
TensorPtr<T> leaky_relu(Tape<T>& tape, const TensorPtr<T>& x, T slope);

template <typename T>
TensorPtr<T> tanh_act(Tape<T>& tape, const TensorPtr<T>& x);

// Inverted dropout: zero with probability `rate`, scale survivors by
// 1/(1-rate). Identity when training is false or rate == 0.
template <typename T>
TensorPtr<T> dropout(Tape<T>& tape, const TensorPtr<T>& x, T rate, bool training, Rng& rng);

// Centered spatial crop to ch x cw.
template <typename T>
TensorPtr<T> crop_center(Tape<T>& tape, const TensorPtr<T>& x, int ch, int cw);

// Scalar (1/B) sum_b (1/n) sum_i pi_i ||a_i - b_i||^2 with n = h*w and the
// norm over channels. `pi` has one weight per (batch, pixel); empty means
// all-ones. Output is a (1,1,1,1) tensor.
template <typename T>
TensorPtr<T> weighted_sq_distance(Tape<T>& tape, const TensorPtr<T>& a,
                                  const TensorPtr<T>& b, const std::vector<T>& pi);

// R[b,i,j] = (z_x[b,i,:] . z_y[b,j,:] + C) / (2C) over flattened pixels of
// two (B, h, w, C) code crops; output (B, n, n, 1) with n = h*w.
template <typename T>
TensorPtr<T> code_correlation(Tape<T>& tape, const TensorPtr<T>& zx, const TensorPtr<T>& zy);

// sum_k coeff_k * scalar_k as a (1,1,1,1) tensor.
template <typename T>
TensorPtr<T> weighted_sum(Tape<T>& tape, const std::vector<std::pair<TensorPtr<T>, T>>& terms);

}  // namespace mmcd::grad
