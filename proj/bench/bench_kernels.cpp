// Timing comparison between the OpenMP kernels and the serial references.
// Build target: bench_kernels. Not registered with ctest.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "mmcd/kernels.hpp"
#include "mmcd/rng.hpp"

namespace {

double time_ms(const std::function<void()>& f, int reps = 3) {
  f();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.2f ms %10.2f ms   x%.2f\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  mmcd::Rng rng(7);

  std::printf("%-28s %13s %13s   %s\n", "kernel", "serial", "openmp", "speedup");

  {
    const int m = 4096, k = 900, n = 100;
    std::vector<float> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n),
        c(static_cast<size_t>(m) * n);
    for (auto& v : a) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));
    row("gemm 4096x900x100",
        time_ms([&] { mmcd::serial::gemm(m, n, k, a.data(), b.data(), c.data(), false); }),
        time_ms([&] { mmcd::kern::gemm(m, n, k, a.data(), b.data(), c.data(), false); }));
  }

  {
    const int h = 64, w = 64, cin = 100, cout = 100, nb = 1;
    std::vector<float> x(static_cast<size_t>(nb) * h * w * cin),
        kernel(static_cast<size_t>(9) * cin * cout), bias(cout),
        y(static_cast<size_t>(nb) * h * w * cout);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : kernel) v = static_cast<float>(rng.uniform(-0.05, 0.05));
    row("conv fwd 64x64x100->100",
        time_ms([&] {
          mmcd::serial::conv3x3_forward(x.data(), nb, h, w, cin, kernel.data(), bias.data(), cout, y.data());
        }),
        time_ms([&] {
          mmcd::kern::conv3x3_forward(x.data(), nb, h, w, cin, kernel.data(), bias.data(), cout, y.data());
        }));

    std::vector<float> dy(y.size()), dx(x.size()), dk(kernel.size()), db(bias.size());
    for (auto& v : dy) v = static_cast<float>(rng.uniform(-1, 1));
    row("conv bwd-data 64x64",
        time_ms([&] {
          std::fill(dx.begin(), dx.end(), 0.0f);
          mmcd::serial::conv3x3_backward_data(dy.data(), nb, h, w, cout, kernel.data(), cin, dx.data());
        }),
        time_ms([&] {
          std::fill(dx.begin(), dx.end(), 0.0f);
          mmcd::kern::conv3x3_backward_data(dy.data(), nb, h, w, cout, kernel.data(), cin, dx.data());
        }));
    row("conv bwd-weights 64x64",
        time_ms([&] {
          std::fill(dk.begin(), dk.end(), 0.0f);
          std::fill(db.begin(), db.end(), 0.0f);
          mmcd::serial::conv3x3_backward_weights(x.data(), dy.data(), nb, h, w, cin, cout, dk.data(), db.data());
        }),
        time_ms([&] {
          std::fill(dk.begin(), dk.end(), 0.0f);
          std::fill(db.begin(), db.end(), 0.0f);
          mmcd::kern::conv3x3_backward_weights(x.data(), dy.data(), nb, h, w, cin, cout, dk.data(), db.data());
        }));
  }

  {
    const int n = 256, c = 4;
    std::vector<double> feat(static_cast<size_t>(n) * c), dist(static_cast<size_t>(n) * n),
        ax(static_cast<size_t>(n) * n), ay(static_cast<size_t>(n) * n), d(static_cast<size_t>(n) * n);
    for (auto& v : feat) v = rng.uniform(-1, 1);
    row("pairwise dist n=256",
        time_ms([&] { mmcd::serial::pairwise_distances(feat.data(), n, c, dist.data()); }),
        time_ms([&] { mmcd::kern::pairwise_distances(feat.data(), n, c, dist.data()); }));
    mmcd::kern::affinity_from_distances(dist.data(), n, 0.7, ax.data());
    mmcd::kern::affinity_from_distances(dist.data(), n, 0.9, ay.data());
    row("crossmodal D n=256",
        time_ms([&] { mmcd::serial::crossmodal_distances(ax.data(), ay.data(), n, d.data()); }),
        time_ms([&] { mmcd::kern::crossmodal_distances(ax.data(), ay.data(), n, d.data()); }));
  }

  {
    const int h = 512, w = 512;
    std::vector<float> src(static_cast<size_t>(h) * w), dst(src.size());
    for (auto& v : src) v = static_cast<float>(rng.uniform(0, 1));
    row("gaussian blur 512x512 s=2",
        time_ms([&] { mmcd::serial::gaussian_blur(src.data(), h, w, 2.0f, dst.data()); }),
        time_ms([&] { mmcd::kern::gaussian_blur(src.data(), h, w, 2.0f, dst.data()); }));
  }

  return 0;
}
