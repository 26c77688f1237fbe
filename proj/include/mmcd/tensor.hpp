#pragma once

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace mmcd::grad {

// Recycles value/gradient buffers between training steps. Tensor shapes
// repeat batch after batch, so exact-size buckets hit almost always and the
// hot loop never touches fresh pages. Recycled buffers come back with stale
// contents; tape ops overwrite their output in full.
template <typename T>
class BufferPool {
 public:
  static BufferPool& instance() {
    static thread_local BufferPool pool;
    return pool;
  }

  std::vector<T> acquire(size_t n) {
    auto it = buckets_.find(n);
    if (it != buckets_.end() && !it->second.empty()) {
      std::vector<T> v = std::move(it->second.back());
      it->second.pop_back();
      retained_ -= n * sizeof(T);
      return v;
    }
    return std::vector<T>(n);
  }

  void release(std::vector<T>&& v) {
    const size_t bytes = v.size() * sizeof(T);
    if (v.empty() || retained_ + bytes > kMaxRetainedBytes) return;
    retained_ += bytes;
    buckets_[v.size()].push_back(std::move(v));
  }

 private:
  static constexpr size_t kMaxRetainedBytes = size_t(2) << 30;
  std::unordered_map<size_t, std::vector<std::vector<T>>> buckets_;
  size_t retained_ = 0;
};

// Dense (batch, height, width, channels) tensor with an optional gradient
// buffer of the same shape. Kernel weights reuse the container with the
// axes read as (ky, kx, cin, cout).
template <typename T>
struct Tensor4 {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<T> v;
  std::vector<T> g;
  bool leaf = false;

  Tensor4() = default;
  Tensor4(int n_, int h_, int w_, int c_) : n(n_), h(h_), w(w_), c(c_) {
    if (n_ < 1 || h_ < 1 || w_ < 1 || c_ < 1) throw std::invalid_argument("Tensor4: all dims must be >= 1");
    v.assign(numel(), T(0));
  }
  Tensor4(const Tensor4&) = default;
  Tensor4& operator=(const Tensor4&) = default;
  Tensor4(Tensor4&&) noexcept = default;
  Tensor4& operator=(Tensor4&&) noexcept = default;
  ~Tensor4() {
    BufferPool<T>::instance().release(std::move(v));
    BufferPool<T>::instance().release(std::move(g));
  }

  size_t numel() const { return static_cast<size_t>(n) * h * w * c; }
  size_t pixels() const { return static_cast<size_t>(n) * h * w; }

  T& at(int bi, int y, int x, int ch) {
    return v[((static_cast<size_t>(bi) * h + y) * w + x) * c + ch];
  }
  const T& at(int bi, int y, int x, int ch) const {
    return v[((static_cast<size_t>(bi) * h + y) * w + x) * c + ch];
  }

  void ensure_grad() {
    if (g.size() != numel()) {
      g = BufferPool<T>::instance().acquire(numel());
      std::fill(g.begin(), g.end(), T(0));
    }
  }
  void zero_grad() {
    if (!g.empty()) std::fill(g.begin(), g.end(), T(0));
  }
  bool same_shape(const Tensor4& o) const { return n == o.n && h == o.h && w == o.w && c == o.c; }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor4<T>>;

template <typename T>
TensorPtr<T> make_tensor(int n, int h, int w, int c, bool leaf = false) {
  auto t = std::make_shared<Tensor4<T>>(n, h, w, c);
  t->leaf = leaf;
  return t;
}

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

}  // namespace mmcd::grad
