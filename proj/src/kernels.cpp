#include "mmcd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace mmcd::kern {

namespace {
constexpr int kChunkPixels = 4096;

// Reusable per-thread scratch. The conv kernels are invoked serially per op,
// so slot indices only need to be distinct within one kernel invocation.
template <typename T>
std::vector<T>& workspace(int slot) {
  static thread_local std::vector<T> bufs[4];
  return bufs[slot];
}

// Gaussian taps, normalized to sum 1. radius = ceil(3*sigma).
std::vector<double> gaussian_taps(float sigma, int* radius) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    w[i + r] = std::exp(-0.5 * (double(i) * i) / (double(sigma) * sigma));
    sum += w[i + r];
  }
  for (double& v : w) v /= sum;
  *radius = r;
  return w;
}

// Symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
inline int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}
// Narrow/tail columns: transpose the B block once and take contiguous dot
// products; a broadcast kernel cannot vectorize a 3..16-wide inner loop.
// Operates on the n_cols-wide column block starting at b/c, whose rows are
// ldb/ldc apart.
template <typename T>
void gemm_narrow(int m, int n_cols, int k, const T* a, const T* b, int ldb, T* c, int ldc,
                 bool accumulate) {
  std::vector<T>& bt = workspace<T>(3);
  bt.resize(static_cast<size_t>(n_cols) * k);
  for (int kk = 0; kk < k; ++kk)
    for (int j = 0; j < n_cols; ++j)
      bt[static_cast<size_t>(j) * k + kk] = b[static_cast<size_t>(kk) * ldb + j];
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<size_t>(i) * k;
    T* crow = c + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < n_cols; ++j) {
      const T* brow = bt.data() + static_cast<size_t>(j) * k;
      T s = T(0);
#pragma omp simd reduction(+ : s)
      for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

// Wide C: register-resident accumulator tiles. Long K runs in chunks so the
// touched B block stays cache-resident across row tiles. Tall problems take
// 8-row tiles (B rows amortize further); short ones take 4-row tiles.
template <typename T, int IB>
void gemm_wide(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  constexpr int JB = 32;
  // Keep the active B block near 1 MB so it stays cache-resident.
  const int KB = std::clamp(static_cast<int>((1 << 20) / (sizeof(T) * n)), 128, 4096);
  const int jfull = (n / JB) * JB;
  for (int k0 = 0; k0 < k; k0 += KB) {
    const int kend = std::min(k0 + KB, k);
    const bool fresh = k0 == 0 && !accumulate;
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < m; i0 += IB) {
      const int ib = std::min(IB, m - i0);
      for (int j0 = 0; j0 < jfull; j0 += JB) {
        if (ib == IB) {
          T acc[IB][JB];
          for (int i = 0; i < IB; ++i)
            for (int j = 0; j < JB; ++j)
              acc[i][j] = fresh ? T(0) : c[static_cast<size_t>(i0 + i) * n + j0 + j];
          for (int kk = k0; kk < kend; ++kk) {
            const T* brow = b + static_cast<size_t>(kk) * n + j0;
            for (int i = 0; i < IB; ++i) {
              const T av = a[static_cast<size_t>(i0 + i) * k + kk];
#pragma omp simd
              for (int j = 0; j < JB; ++j) acc[i][j] += av * brow[j];
            }
          }
          for (int i = 0; i < IB; ++i)
            for (int j = 0; j < JB; ++j) c[static_cast<size_t>(i0 + i) * n + j0 + j] = acc[i][j];
        } else {
          for (int i = i0; i < i0 + ib; ++i) {
            T* crow = c + static_cast<size_t>(i) * n + j0;
            if (fresh) std::memset(crow, 0, sizeof(T) * JB);
            const T* arow = a + static_cast<size_t>(i) * k;
            for (int kk = k0; kk < kend; ++kk) {
              const T av = arow[kk];
              const T* brow = b + static_cast<size_t>(kk) * n + j0;
#pragma omp simd
              for (int j = 0; j < JB; ++j) crow[j] += av * brow[j];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
  constexpr int JB = 32;
  const int jfull = (n / JB) * JB;
  if (jfull > 0) {
    if (m >= 512)
      gemm_wide<T, 8>(m, n, k, a, b, c, accumulate);
    else
      gemm_wide<T, 4>(m, n, k, a, b, c, accumulate);
  }
  if (jfull < n) gemm_narrow(m, n - jfull, k, a, b + jfull, n, c + jfull, n, accumulate);
}

template <typename T>
void im2col3x3(const T* img, int h, int w, int c, int p0, int np, T* col) {
#pragma omp parallel for schedule(static) if (np > 256)
  for (int q = 0; q < np; ++q) {
    const int p = p0 + q;
    const int oy = p / w;
    const int ox = p % w;
    T* row = col + static_cast<size_t>(q) * 9 * c;
    for (int ky = 0; ky < 3; ++ky) {
      const int iy = oy + ky - 1;
      for (int kx = 0; kx < 3; ++kx) {
        const int ix = ox + kx - 1;
        T* dst = row + static_cast<size_t>(ky * 3 + kx) * c;
        if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
          std::memset(dst, 0, sizeof(T) * c);
        } else {
          std::memcpy(dst, img + (static_cast<size_t>(iy) * w + ix) * c, sizeof(T) * c);
        }
      }
    }
  }
}

template <typename T>
void conv3x3_forward(const T* x, int nb, int h, int w, int cin, const T* kernel,
                     const T* bias, int cout, T* y) {
  const int px = h * w;
  std::vector<T>& col = workspace<T>(0);
  col.resize(static_cast<size_t>(std::min(px, kChunkPixels)) * 9 * cin);
  for (int bi = 0; bi < nb; ++bi) {
    const T* xi = x + static_cast<size_t>(bi) * px * cin;
    T* yi = y + static_cast<size_t>(bi) * px * cout;
    for (int p0 = 0; p0 < px; p0 += kChunkPixels) {
      const int np = std::min(kChunkPixels, px - p0);
      im2col3x3(xi, h, w, cin, p0, np, col.data());
      T* ychunk = yi + static_cast<size_t>(p0) * cout;
      if (bias) {
#pragma omp parallel for schedule(static) if (np > 256)
        for (int q = 0; q < np; ++q)
          std::memcpy(ychunk + static_cast<size_t>(q) * cout, bias, sizeof(T) * cout);
        gemm(np, cout, 9 * cin, col.data(), kernel, ychunk, true);
      } else {
        gemm(np, cout, 9 * cin, col.data(), kernel, ychunk, false);
      }
    }
  }
}

template <typename T>
void conv3x3_backward_data(const T* dy, int nb, int h, int w, int cout,
                           const T* kernel, int cin, T* dx) {
  // Backward-data is a 3x3 convolution of dy with the spatially flipped,
  // channel-transposed kernel.
  std::vector<T>& kflip = workspace<T>(1);
  kflip.resize(static_cast<size_t>(9) * cout * cin);
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx)
      for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci)
          kflip[(static_cast<size_t>(ky * 3 + kx) * cout + co) * cin + ci] =
              kernel[(static_cast<size_t>((2 - ky) * 3 + (2 - kx)) * cin + ci) * cout + co];

  const int px = h * w;
  std::vector<T>& col = workspace<T>(0);
  col.resize(static_cast<size_t>(std::min(px, kChunkPixels)) * 9 * cout);
  for (int bi = 0; bi < nb; ++bi) {
    const T* dyi = dy + static_cast<size_t>(bi) * px * cout;
    T* dxi = dx + static_cast<size_t>(bi) * px * cin;
    for (int p0 = 0; p0 < px; p0 += kChunkPixels) {
      const int np = std::min(kChunkPixels, px - p0);
      im2col3x3(dyi, h, w, cout, p0, np, col.data());
      gemm(np, cin, 9 * cout, col.data(), kflip.data(), dxi + static_cast<size_t>(p0) * cin, true);
    }
  }
}

template <typename T>
void conv3x3_backward_weights(const T* x, const T* dy, int nb, int h, int w,
                              int cin, int cout, T* dkernel, T* dbias) {
  const int px = h * w;
  const int krows = 9 * cin;
  std::vector<T>& col = workspace<T>(0);
  col.resize(static_cast<size_t>(std::min(px, kChunkPixels)) * krows);
  // Both paths accumulate the transposed gradient [cout x krows]; the
  // contiguous layouts are what make the inner loops vectorize.
  std::vector<T>& dwt = workspace<T>(1);
  dwt.assign(static_cast<size_t>(cout) * krows, T(0));
  std::vector<T>& dyt = workspace<T>(2);

  for (int bi = 0; bi < nb; ++bi) {
    const T* xi = x + static_cast<size_t>(bi) * px * cin;
    const T* dyi = dy + static_cast<size_t>(bi) * px * cout;
    for (int p0 = 0; p0 < px; p0 += kChunkPixels) {
      const int np = std::min(kChunkPixels, px - p0);
      im2col3x3(xi, h, w, cin, p0, np, col.data());
      const T* dchunk = dyi + static_cast<size_t>(p0) * cout;
      if (cout <= 8) {
        constexpr int kRowBlock = 128;
#pragma omp parallel for schedule(static)
        for (int i0 = 0; i0 < krows; i0 += kRowBlock) {
          const int i1 = std::min(i0 + kRowBlock, krows);
          for (int q = 0; q < np; ++q) {
            const T* crow = col.data() + static_cast<size_t>(q) * krows;
            for (int j = 0; j < cout; ++j) {
              const T g = dchunk[static_cast<size_t>(q) * cout + j];
              T* drow = dwt.data() + static_cast<size_t>(j) * krows;
#pragma omp simd
              for (int i = i0; i < i1; ++i) drow[i] += crow[i] * g;
            }
          }
        }
      } else {
        // dW^T[cout x krows] += dY^T[cout x np] * col[np x krows], which runs
        // through the fast gemm after one cheap transpose of the dy chunk.
        dyt.resize(static_cast<size_t>(cout) * np);
        constexpr int TB = 32;
#pragma omp parallel for schedule(static)
        for (int q0 = 0; q0 < np; q0 += TB) {
          const int q1 = std::min(q0 + TB, np);
          for (int j0 = 0; j0 < cout; j0 += TB) {
            const int j1 = std::min(j0 + TB, cout);
            for (int q = q0; q < q1; ++q)
              for (int j = j0; j < j1; ++j)
                dyt[static_cast<size_t>(j) * np + q] = dchunk[static_cast<size_t>(q) * cout + j];
          }
        }
        gemm(cout, krows, np, dyt.data(), col.data(), dwt.data(), true);
      }
    }
    if (dbias) {
      for (int p = 0; p < px; ++p) {
        const T* dr = dyi + static_cast<size_t>(p) * cout;
#pragma omp simd
        for (int j = 0; j < cout; ++j) dbias[j] += dr[j];
      }
    }
  }
  for (int i = 0; i < krows; ++i)
    for (int j = 0; j < cout; ++j)
      dkernel[static_cast<size_t>(i) * cout + j] += dwt[static_cast<size_t>(j) * krows + i];
}

void pairwise_distances(const double* feat, int n, int c, double* dist) {
#pragma omp parallel for schedule(static) if (n > 32)
  for (int i = 0; i < n; ++i) {
    dist[static_cast<size_t>(i) * n + i] = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      const double* a = feat + static_cast<size_t>(i) * c;
      const double* b = feat + static_cast<size_t>(j) * c;
      for (int k = 0; k < c; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
      }
      const double d = std::sqrt(s);
      dist[static_cast<size_t>(i) * n + j] = d;
      dist[static_cast<size_t>(j) * n + i] = d;
    }
  }
}

void affinity_from_distances(const double* dist, int n, double sigma, double* aff) {
  const double inv = 1.0 / (sigma * sigma);
  const size_t total = static_cast<size_t>(n) * n;
#pragma omp parallel for schedule(static) if (total > 1024)
  for (long long i = 0; i < static_cast<long long>(total); ++i)
    aff[i] = std::exp(-dist[i] * dist[i] * inv);
}

void crossmodal_distances(const double* ax, const double* ay, int n, double* d) {
  const double invsqrt = 1.0 / std::sqrt(static_cast<double>(n));
#pragma omp parallel for schedule(static) if (n > 32)
  for (int i = 0; i < n; ++i) {
    const double* ri = ax + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* rj = ay + static_cast<size_t>(j) * n;
      double s = 0.0;
#pragma omp simd reduction(+ : s)
      for (int k = 0; k < n; ++k) {
        const double diff = ri[k] - rj[k];
        s += diff * diff;
      }
      d[static_cast<size_t>(i) * n + j] = std::sqrt(s) * invsqrt;
    }
  }
}

void gaussian_blur(const float* src, int h, int w, float sigma, float* dst) {
  if (sigma <= 0.0f) {
    std::memcpy(dst, src, sizeof(float) * static_cast<size_t>(h) * w);
    return;
  }
  int r = 0;
  const std::vector<double> taps = gaussian_taps(sigma, &r);
  std::vector<float> tmp(static_cast<size_t>(h) * w);
#pragma omp parallel for schedule(static) if (h > 8)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t) s += taps[t + r] * src[static_cast<size_t>(y) * w + reflect(x + t, w)];
      tmp[static_cast<size_t>(y) * w + x] = static_cast<float>(s);
    }
  }
#pragma omp parallel for schedule(static) if (w > 8)
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t) s += taps[t + r] * tmp[static_cast<size_t>(reflect(y + t, h)) * w + x];
      dst[static_cast<size_t>(y) * w + x] = static_cast<float>(s);
    }
  }
}

template void gemm<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm<double>(int, int, int, const double*, const double*, double*, bool);
template void im2col3x3<float>(const float*, int, int, int, int, int, float*);
template void im2col3x3<double>(const double*, int, int, int, int, int, double*);
template void conv3x3_forward<float>(const float*, int, int, int, int, const float*, const float*, int, float*);
template void conv3x3_forward<double>(const double*, int, int, int, int, const double*, const double*, int, double*);
template void conv3x3_backward_data<float>(const float*, int, int, int, int, const float*, int, float*);
template void conv3x3_backward_data<double>(const double*, int, int, int, int, const double*, int, double*);
template void conv3x3_backward_weights<float>(const float*, const float*, int, int, int, int, int, float*, float*);
template void conv3x3_backward_weights<double>(const double*, const double*, int, int, int, int, int, double*, double*);

}  // namespace mmcd::kern
