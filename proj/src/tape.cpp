#include "mmcd/tape.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "mmcd/kernels.hpp"

namespace mmcd::grad {

Activation activation_from_name(const std::string& name) {
  if (name == "leaky-relu") return Activation::LeakyRelu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "none") return Activation::None;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::LeakyRelu: return "leaky-relu";
    case Activation::Tanh: return "tanh";
    default: return "none";
  }
}

template <typename T>
ConvLayer<T> make_conv_layer(int cin, int cout, Activation act, Rng& rng) {
  ConvLayer<T> layer;
  layer.kernel = make_tensor<T>(3, 3, cin, cout, true);
  layer.bias = make_tensor<T>(1, 1, 1, cout, true);
  layer.act = act;
  const double fan_in = 9.0 * cin;
  const double fan_out = 9.0 * cout;
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& wv : layer.kernel->v) wv = static_cast<T>(rng.uniform(-limit, limit));
  return layer;
}

template ConvLayer<float> make_conv_layer<float>(int, int, Activation, Rng&);
template ConvLayer<double> make_conv_layer<double>(int, int, Activation, Rng&);

template <typename T>
void Tape<T>::backward(const TensorPtr<T>& out) {
  if (nodes_.empty()) throw std::logic_error("backward called before any forward op was recorded");
  if (out->g.size() != out->numel())
    throw std::logic_error("backward: output gradient not seeded");
  const std::vector<T> seed = out->g;
  // Release intermediate gradients so closures whose upstream grad never
  // materializes can skip their work entirely.
  for (auto& t : tracked_)
    if (!t->g.empty()) {
      BufferPool<T>::instance().release(std::move(t->g));
      t->g.clear();
    }
  out->g = seed;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

template <typename T>
void Tape<T>::backward_scalar(const TensorPtr<T>& out) {
  if (out->numel() != 1) throw std::logic_error("backward_scalar expects a scalar tensor");
  out->ensure_grad();
  std::fill(out->g.begin(), out->g.end(), T(0));
  out->g[0] = T(1);
  backward(out);
}

template class Tape<float>;
template class Tape<double>;

namespace {

template <typename T>
TensorPtr<T> conv_linear(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& kernel,
                         const TensorPtr<T>& bias) {
  if (x->c != kernel->w)
    throw std::invalid_argument("conv2d: input has " + std::to_string(x->c) +
                                " channels, layer expects " + std::to_string(kernel->w));
  auto y = tape.make(x->n, x->h, x->w, kernel->c);
  kern::conv3x3_forward(x->v.data(), x->n, x->h, x->w, x->c, kernel->v.data(),
                        bias->v.data(), kernel->c, y->v.data());
  tape.record([x, kernel, bias, y]() {
    if (y->g.empty()) return;
    x->ensure_grad();
    kernel->ensure_grad();
    bias->ensure_grad();
    kern::conv3x3_backward_data(y->g.data(), y->n, y->h, y->w, y->c, kernel->v.data(), x->c,
                                x->g.data());
    kern::conv3x3_backward_weights(x->v.data(), y->g.data(), x->n, x->h, x->w, x->c, y->c,
                                   kernel->g.data(), bias->g.data());
  });
  return y;
}

}  // namespace

template <typename T>
TensorPtr<T> conv2d(Tape<T>& tape, const TensorPtr<T>& x, const ConvLayer<T>& layer) {
  auto lin = conv_linear(tape, x, layer.kernel, layer.bias);
  switch (layer.act) {
    case Activation::LeakyRelu: return leaky_relu(tape, lin, layer.slope);
    case Activation::Tanh: return tanh_act(tape, lin);
    default: return lin;
  }
}

template <typename T>
TensorPtr<T> leaky_relu(Tape<T>& tape, const TensorPtr<T>& x, T slope) {
  auto y = tape.make(x->n, x->h, x->w, x->c);
  const long long total = static_cast<long long>(x->numel());
#pragma omp parallel for schedule(static) if (total > 16384)
  for (long long i = 0; i < total; ++i) {
    const T v = x->v[i];
    y->v[i] = v >= T(0) ? v : slope * v;
  }
  // slope > 0 keeps the sign, so the branch can be recovered from the output.
  tape.record([x, y, slope, total]() {
    if (y->g.empty()) return;
    x->ensure_grad();
#pragma omp parallel for schedule(static) if (total > 16384)
    for (long long i = 0; i < total; ++i)
      x->g[i] += y->g[i] * (y->v[i] >= T(0) ? T(1) : slope);
  });
  return y;
}

template <typename T>
TensorPtr<T> tanh_act(Tape<T>& tape, const TensorPtr<T>& x) {
  auto y = tape.make(x->n, x->h, x->w, x->c);
  const long long total = static_cast<long long>(x->numel());
#pragma omp parallel for schedule(static) if (total > 16384)
  for (long long i = 0; i < total; ++i) y->v[i] = std::tanh(x->v[i]);
  tape.record([x, y, total]() {
    if (y->g.empty()) return;
    x->ensure_grad();
#pragma omp parallel for schedule(static) if (total > 16384)
    for (long long i = 0; i < total; ++i) x->g[i] += y->g[i] * (T(1) - y->v[i] * y->v[i]);
  });
  return y;
}

template <typename T>
TensorPtr<T> dropout(Tape<T>& tape, const TensorPtr<T>& x, T rate, bool training, Rng& rng) {
  if (rate < T(0) || rate >= T(1)) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  auto y = tape.make(x->n, x->h, x->w, x->c);
  const size_t total = x->numel();
  if (!training || rate == T(0)) {
    y->v = x->v;
    tape.record([x, y, total]() {
      if (y->g.empty()) return;
      x->ensure_grad();
      for (size_t i = 0; i < total; ++i) x->g[i] += y->g[i];
    });
    return y;
  }
  auto mask = std::make_shared<std::vector<std::uint8_t>>(total);
  const T scale = T(1) / (T(1) - rate);
  // One draw advances the caller's RNG; per-element bits come from a counter
  // hash so the mask is cheap to generate in parallel yet fully seeded.
  const std::uint64_t seed =
      (static_cast<std::uint64_t>(rng.next_u32()) << 32) | rng.next_u32();
  const auto drop_below = static_cast<std::uint32_t>(static_cast<double>(rate) * 4294967296.0);
  const long long n = static_cast<long long>(total);
#pragma omp parallel for schedule(static) if (n > 16384)
  for (long long i = 0; i < n; ++i) {
    std::uint64_t z = seed + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    const bool keep = static_cast<std::uint32_t>(z >> 32) >= drop_below;
    (*mask)[i] = keep ? 1 : 0;
    y->v[i] = keep ? x->v[i] * scale : T(0);
  }
  tape.record([x, y, mask, scale, total]() {
    if (y->g.empty()) return;
    x->ensure_grad();
    for (size_t i = 0; i < total; ++i)
      if ((*mask)[i]) x->g[i] += y->g[i] * scale;
  });
  return y;
}

template <typename T>
TensorPtr<T> crop_center(Tape<T>& tape, const TensorPtr<T>& x, int ch, int cw) {
  if (ch > x->h || cw > x->w) throw std::invalid_argument("crop_center: crop larger than input");
  const int oy = (x->h - ch) / 2;
  const int ox = (x->w - cw) / 2;
  auto y = tape.make(x->n, ch, cw, x->c);
  for (int bi = 0; bi < x->n; ++bi)
    for (int r = 0; r < ch; ++r)
      for (int col = 0; col < cw; ++col)
        for (int k = 0; k < x->c; ++k) y->at(bi, r, col, k) = x->at(bi, r + oy, col + ox, k);
  tape.record([x, y, oy, ox, ch, cw]() {
    if (y->g.empty()) return;
    x->ensure_grad();
    for (int bi = 0; bi < x->n; ++bi)
      for (int r = 0; r < ch; ++r)
        for (int col = 0; col < cw; ++col)
          for (int k = 0; k < x->c; ++k) {
            const size_t src = ((static_cast<size_t>(bi) * ch + r) * cw + col) * x->c + k;
            const size_t dst =
                ((static_cast<size_t>(bi) * x->h + r + oy) * x->w + col + ox) * x->c + k;
            x->g[dst] += y->g[src];
          }
  });
  return y;
}

template <typename T>
TensorPtr<T> weighted_sq_distance(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b,
                                  const std::vector<T>& pi) {
  if (!a->same_shape(*b)) throw std::invalid_argument("weighted_sq_distance: shape mismatch");
  const size_t npix = static_cast<size_t>(a->h) * a->w;
  if (!pi.empty() && pi.size() != npix * a->n)
    throw std::invalid_argument("weighted_sq_distance: weight vector length mismatch");
  for (const T wv : pi)
    if (wv < T(0) || wv > T(1)) throw std::invalid_argument("weighted_sq_distance: weights must lie in [0, 1]");

  auto out = tape.make(1, 1, 1, 1);
  const int c = a->c;
  double acc = 0.0;
  for (int bi = 0; bi < a->n; ++bi) {
    double patch = 0.0;
    for (size_t p = 0; p < npix; ++p) {
      const size_t base = (static_cast<size_t>(bi) * npix + p) * c;
      double d2 = 0.0;
      for (int k = 0; k < c; ++k) {
        const double d = static_cast<double>(a->v[base + k]) - static_cast<double>(b->v[base + k]);
        d2 += d * d;
      }
      const double wgt = pi.empty() ? 1.0 : static_cast<double>(pi[static_cast<size_t>(bi) * npix + p]);
      patch += wgt * d2;
    }
    acc += patch / static_cast<double>(npix);
  }
  out->v[0] = static_cast<T>(acc / a->n);

  auto piw = pi;  // captured by value; empty means all-ones
  tape.record([a, b, out, piw, npix, c]() {
    if (out->g.empty() || out->g[0] == T(0)) return;
    a->ensure_grad();
    b->ensure_grad();
    const T norm = out->g[0] * T(2) / (static_cast<T>(npix) * static_cast<T>(a->n));
    const long long tot = static_cast<long long>(a->n) * static_cast<long long>(npix);
#pragma omp parallel for schedule(static) if (tot > 8192)
    for (long long ip = 0; ip < tot; ++ip) {
      const T wgt = piw.empty() ? T(1) : piw[static_cast<size_t>(ip)];
      if (wgt == T(0)) continue;
      const size_t base = static_cast<size_t>(ip) * c;
      for (int k = 0; k < c; ++k) {
        const T d = a->v[base + k] - b->v[base + k];
        a->g[base + k] += norm * wgt * d;
        b->g[base + k] -= norm * wgt * d;
      }
    }
  });
  return out;
}

template <typename T>
TensorPtr<T> code_correlation(Tape<T>& tape, const TensorPtr<T>& zx, const TensorPtr<T>& zy) {
  if (!zx->same_shape(*zy)) throw std::invalid_argument("code_correlation: shape mismatch");
  const int n = zx->h * zx->w;
  const int c = zx->c;
  auto r = tape.make(zx->n, n, n, 1);
  const T denom = T(2) * static_cast<T>(c);
  for (int bi = 0; bi < zx->n; ++bi) {
    const T* px = zx->v.data() + static_cast<size_t>(bi) * n * c;
    const T* py = zy->v.data() + static_cast<size_t>(bi) * n * c;
    T* pr = r->v.data() + static_cast<size_t>(bi) * n * n;
#pragma omp parallel for schedule(static) if (n > 64)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        T dot = T(0);
        for (int k = 0; k < c; ++k) dot += px[static_cast<size_t>(i) * c + k] * py[static_cast<size_t>(j) * c + k];
        pr[static_cast<size_t>(i) * n + j] = (dot + static_cast<T>(c)) / denom;
      }
  }
  tape.record([zx, zy, r, n, c, denom]() {
    if (r->g.empty()) return;
    zx->ensure_grad();
    zy->ensure_grad();
    for (int bi = 0; bi < zx->n; ++bi) {
      const T* px = zx->v.data() + static_cast<size_t>(bi) * n * c;
      const T* py = zy->v.data() + static_cast<size_t>(bi) * n * c;
      const T* gr = r->g.data() + static_cast<size_t>(bi) * n * n;
      T* gx = zx->g.data() + static_cast<size_t>(bi) * n * c;
      T* gy = zy->g.data() + static_cast<size_t>(bi) * n * c;
#pragma omp parallel for schedule(static) if (n > 64)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const T gij = gr[static_cast<size_t>(i) * n + j] / denom;
          if (gij == T(0)) continue;
          for (int k = 0; k < c; ++k) gx[static_cast<size_t>(i) * c + k] += gij * py[static_cast<size_t>(j) * c + k];
        }
#pragma omp parallel for schedule(static) if (n > 64)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const T gij = gr[static_cast<size_t>(i) * n + j] / denom;
          if (gij == T(0)) continue;
          for (int k = 0; k < c; ++k) gy[static_cast<size_t>(j) * c + k] += gij * px[static_cast<size_t>(i) * c + k];
        }
    }
  });
  return r;
}

template <typename T>
TensorPtr<T> weighted_sum(Tape<T>& tape, const std::vector<std::pair<TensorPtr<T>, T>>& terms) {
  auto out = tape.make(1, 1, 1, 1);
  double acc = 0.0;
  for (const auto& [t, coeff] : terms) {
    if (t->numel() != 1) throw std::invalid_argument("weighted_sum: all terms must be scalars");
    acc += static_cast<double>(coeff) * static_cast<double>(t->v[0]);
  }
  out->v[0] = static_cast<T>(acc);
  tape.record([out, terms]() {
    if (out->g.empty()) return;
    for (const auto& [t, coeff] : terms) {
      t->ensure_grad();
      t->g[0] += coeff * out->g[0];
    }
  });
  return out;
}

#define MMCD_INSTANTIATE_OPS(T)                                                              \
  template TensorPtr<T> conv2d<T>(Tape<T>&, const TensorPtr<T>&, const ConvLayer<T>&);       \
  template TensorPtr<T> leaky_relu<T>(Tape<T>&, const TensorPtr<T>&, T);                     \
  template TensorPtr<T> tanh_act<T>(Tape<T>&, const TensorPtr<T>&);                          \
  template TensorPtr<T> dropout<T>(Tape<T>&, const TensorPtr<T>&, T, bool, Rng&);            \
  template TensorPtr<T> crop_center<T>(Tape<T>&, const TensorPtr<T>&, int, int);             \
  template TensorPtr<T> weighted_sq_distance<T>(Tape<T>&, const TensorPtr<T>&,               \
                                                const TensorPtr<T>&, const std::vector<T>&); \
  template TensorPtr<T> code_correlation<T>(Tape<T>&, const TensorPtr<T>&,                   \
                                            const TensorPtr<T>&);                            \
  template TensorPtr<T> weighted_sum<T>(Tape<T>&, const std::vector<std::pair<TensorPtr<T>, T>>&);

MMCD_INSTANTIATE_OPS(float)
MMCD_INSTANTIATE_OPS(double)
#undef MMCD_INSTANTIATE_OPS

}  // namespace mmcd::grad
