#include "mmcd/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

// Plain single-threaded loops, written for clarity. The parallel kernels are
// checked against these in tests/test_kernels.cpp and timed against them in
// bench/bench_kernels.cpp.

namespace mmcd::serial {

template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<size_t>(i) * n;
    if (!accumulate) std::memset(crow, 0, sizeof(T) * n);
    for (int kk = 0; kk < k; ++kk) {
      const T av = a[static_cast<size_t>(i) * k + kk];
      const T* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void conv3x3_forward(const T* x, int nb, int h, int w, int cin, const T* kernel,
                     const T* bias, int cout, T* y) {
  for (int bi = 0; bi < nb; ++bi) {
    const T* xi = x + static_cast<size_t>(bi) * h * w * cin;
    T* yi = y + static_cast<size_t>(bi) * h * w * cout;
    for (int oy = 0; oy < h; ++oy)
      for (int ox = 0; ox < w; ++ox)
        for (int co = 0; co < cout; ++co) {
          T acc = bias ? bias[co] : T(0);
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy + ky - 1;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ox + kx - 1;
              if (ix < 0 || ix >= w) continue;
              for (int ci = 0; ci < cin; ++ci)
                acc += xi[(static_cast<size_t>(iy) * w + ix) * cin + ci] *
                       kernel[(static_cast<size_t>(ky * 3 + kx) * cin + ci) * cout + co];
            }
          }
          yi[(static_cast<size_t>(oy) * w + ox) * cout + co] = acc;
        }
  }
}

template <typename T>
void conv3x3_backward_data(const T* dy, int nb, int h, int w, int cout,
                           const T* kernel, int cin, T* dx) {
  for (int bi = 0; bi < nb; ++bi) {
    const T* dyi = dy + static_cast<size_t>(bi) * h * w * cout;
    T* dxi = dx + static_cast<size_t>(bi) * h * w * cin;
    for (int oy = 0; oy < h; ++oy)
      for (int ox = 0; ox < w; ++ox)
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox + kx - 1;
            if (ix < 0 || ix >= w) continue;
            for (int ci = 0; ci < cin; ++ci) {
              T acc = T(0);
              for (int co = 0; co < cout; ++co)
                acc += dyi[(static_cast<size_t>(oy) * w + ox) * cout + co] *
                       kernel[(static_cast<size_t>(ky * 3 + kx) * cin + ci) * cout + co];
              dxi[(static_cast<size_t>(iy) * w + ix) * cin + ci] += acc;
            }
          }
        }
  }
}

template <typename T>
void conv3x3_backward_weights(const T* x, const T* dy, int nb, int h, int w,
                              int cin, int cout, T* dkernel, T* dbias) {
  for (int bi = 0; bi < nb; ++bi) {
    const T* xi = x + static_cast<size_t>(bi) * h * w * cin;
    const T* dyi = dy + static_cast<size_t>(bi) * h * w * cout;
    for (int oy = 0; oy < h; ++oy)
      for (int ox = 0; ox < w; ++ox)
        for (int co = 0; co < cout; ++co) {
          const T g = dyi[(static_cast<size_t>(oy) * w + ox) * cout + co];
          if (dbias) dbias[co] += g;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = oy + ky - 1;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ox + kx - 1;
              if (ix < 0 || ix >= w) continue;
              for (int ci = 0; ci < cin; ++ci)
                dkernel[(static_cast<size_t>(ky * 3 + kx) * cin + ci) * cout + co] +=
                    xi[(static_cast<size_t>(iy) * w + ix) * cin + ci] * g;
            }
          }
        }
  }
}

void pairwise_distances(const double* feat, int n, int c, double* dist) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < c; ++k) {
        const double d = feat[static_cast<size_t>(i) * c + k] - feat[static_cast<size_t>(j) * c + k];
        s += d * d;
      }
      dist[static_cast<size_t>(i) * n + j] = std::sqrt(s);
    }
}

void affinity_from_distances(const double* dist, int n, double sigma, double* aff) {
  for (size_t i = 0; i < static_cast<size_t>(n) * n; ++i)
    aff[i] = std::exp(-(dist[i] * dist[i]) / (sigma * sigma));
}

void crossmodal_distances(const double* ax, const double* ay, int n, double* d) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        const double diff = ax[static_cast<size_t>(i) * n + k] - ay[static_cast<size_t>(j) * n + k];
        s += diff * diff;
      }
      d[static_cast<size_t>(i) * n + j] = std::sqrt(s) / std::sqrt(static_cast<double>(n));
    }
}

void gaussian_blur(const float* src, int h, int w, float sigma, float* dst) {
  if (sigma <= 0.0f) {
    std::memcpy(dst, src, sizeof(float) * static_cast<size_t>(h) * w);
    return;
  }
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[i + r] = std::exp(-0.5 * double(i) * i / (double(sigma) * sigma));
    sum += taps[i + r];
  }
  for (double& t : taps) t /= sum;
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -1 - i;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int ty = -r; ty <= r; ++ty)
        for (int tx = -r; tx <= r; ++tx)
          s += taps[ty + r] * taps[tx + r] *
               src[static_cast<size_t>(reflect(y + ty, h)) * w + reflect(x + tx, w)];
      dst[static_cast<size_t>(y) * w + x] = static_cast<float>(s);
    }
}

template void gemm<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm<double>(int, int, int, const double*, const double*, double*, bool);
template void conv3x3_forward<float>(const float*, int, int, int, int, const float*, const float*, int, float*);
template void conv3x3_forward<double>(const double*, int, int, int, int, const double*, const double*, int, double*);
template void conv3x3_backward_data<float>(const float*, int, int, int, int, const float*, int, float*);
template void conv3x3_backward_data<double>(const double*, int, int, int, int, const double*, int, double*);
template void conv3x3_backward_weights<float>(const float*, const float*, int, int, int, int, int, float*, float*);
template void conv3x3_backward_weights<double>(const double*, const double*, int, int, int, int, int, double*, double*);

}  // namespace mmcd::serial
