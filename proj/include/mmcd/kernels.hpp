#pragma once

#include <cstddef>

// OpenMP-parallel compute kernels. Every kernel assigns each output element to
// exactly one thread and keeps a fixed inner summation order, so results are
// identical run-to-run and independent of the thread count. mmcd::serial holds
// the plain-loop reference implementations used by the tests and the benchmark.

namespace mmcd::kern {

// C[m x n] (+)= A[m x k] * B[k x n], row-major.
template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

// Rows for output pixels [p0, p0+np) of one h x w x c image under 3x3
// same-padding: col[(p-p0)*9c + (ky*3+kx)*c + ci], zeros outside the image.
template <typename T>
void im2col3x3(const T* img, int h, int w, int c, int p0, int np, T* col);

// y = x (*) kernel + bias. x: (nb,h,w,cin); kernel: [9*cin x cout] row-major
// in (ky,kx,ci) order; y: (nb,h,w,cout). Stride 1, zero padding 1.
template <typename T>
void conv3x3_forward(const T* x, int nb, int h, int w, int cin, const T* kernel,
                     const T* bias, int cout, T* y);

// dx += backward-data pass of the convolution above.
template <typename T>
void conv3x3_backward_data(const T* dy, int nb, int h, int w, int cout,
                           const T* kernel, int cin, T* dx);

// dkernel[9*cin x cout] += im2col(x)^T * dy ; dbias[cout] += column sums of dy.
template <typename T>
void conv3x3_backward_weights(const T* x, const T* dy, int nb, int h, int w,
                              int cin, int cout, T* dkernel, T* dbias);

// dist[i*n+j] = Euclidean distance between feature vectors i and j (dim c).
void pairwise_distances(const double* feat, int n, int c, double* dist);

// aff[i*n+j] = exp(-dist^2 / sigma^2).
void affinity_from_distances(const double* dist, int n, double sigma, double* aff);

// d[i*n+j] = ||row_i(ax) - row_j(ay)||_2 / sqrt(n).
void crossmodal_distances(const double* ax, const double* ay, int n, double* d);

// Separable Gaussian blur, radius ceil(3*sigma), reflected borders.
// sigma <= 0 copies src to dst.
void gaussian_blur(const float* src, int h, int w, float sigma, float* dst);

}  // namespace mmcd::kern

namespace mmcd::serial {

template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

// Direct 7-loop convolution, no im2col.
template <typename T>
void conv3x3_forward(const T* x, int nb, int h, int w, int cin, const T* kernel,
                     const T* bias, int cout, T* y);

template <typename T>
void conv3x3_backward_data(const T* dy, int nb, int h, int w, int cout,
                           const T* kernel, int cin, T* dx);

template <typename T>
void conv3x3_backward_weights(const T* x, const T* dy, int nb, int h, int w,
                              int cin, int cout, T* dkernel, T* dbias);

void pairwise_distances(const double* feat, int n, int c, double* dist);
void affinity_from_distances(const double* dist, int n, double sigma, double* aff);
void crossmodal_distances(const double* ax, const double* ay, int n, double* d);

// Direct dense 2-D Gaussian convolution (O(r^2) per pixel).
void gaussian_blur(const float* src, int h, int w, float sigma, float* dst);

}  // namespace mmcd::serial
