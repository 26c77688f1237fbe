#include "mmcd/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mmcd/kernels.hpp"

namespace mmcd {

std::vector<double> pairwise_distances(const std::vector<double>& patch, int n, int c) {
  if (n < 2) throw std::invalid_argument("pairwise_distances: need at least 2 pixels");
  if (patch.size() != static_cast<size_t>(n) * c)
    throw std::invalid_argument("pairwise_distances: patch size does not match n*c");
  std::vector<double> dist(static_cast<size_t>(n) * n);
  kern::pairwise_distances(patch.data(), n, c, dist.data());
  return dist;
}

int default_neighbor_rank(int n) { return static_cast<int>(std::ceil(0.75 * n)); }

double kernel_width(const std::vector<double>& dists, int n, int k) {
  if (k < 1 || k > n - 1)
    throw std::invalid_argument("kernel_width: k must lie in [1, n-1], got " + std::to_string(k));
  double sum = 0.0;
  std::vector<double> row(n - 1);
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) row[m++] = dists[static_cast<size_t>(i) * n + j];
    std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
    sum += row[k - 1];
  }
  const double sigma = sum / n;
  if (sigma <= 0.0)
    throw std::runtime_error("kernel_width: degenerate data, all pairwise distances are zero");
  return sigma;
}

AffinityMatrix affinity_matrix(const std::vector<double>& dists, int n, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("affinity_matrix: sigma must be positive");
  AffinityMatrix a;
  a.n = n;
  a.sigma = sigma;
  a.entries.resize(static_cast<size_t>(n) * n);
  kern::affinity_from_distances(dists.data(), n, sigma, a.entries.data());
  return a;
}

std::vector<double> crossmodal_distance(const AffinityMatrix& ax, const AffinityMatrix& ay) {
  if (ax.n != ay.n) throw std::invalid_argument("crossmodal_distance: affinity sizes differ");
  std::vector<double> d(static_cast<size_t>(ax.n) * ax.n);
  kern::crossmodal_distances(ax.entries.data(), ay.entries.data(), ax.n, d.data());
  return d;
}

CrossmodalSimilarity similarity_with_range(const std::vector<double>& d, int n, double lo,
                                           double hi) {
  CrossmodalSimilarity s;
  s.n = n;
  s.distances = d;
  s.stretch_min = lo;
  s.stretch_max = hi;
  s.similarities.resize(d.size());
  if (hi > lo) {
    const double inv = 1.0 / (hi - lo);
    for (size_t i = 0; i < d.size(); ++i) s.similarities[i] = 1.0 - (d[i] - lo) * inv;
  } else {
    // Degenerate batch: treat the stretched distance as zero everywhere.
    std::fill(s.similarities.begin(), s.similarities.end(), 1.0);
  }
  return s;
}

CrossmodalSimilarity similarity_target(const std::vector<double>& d, int n, bool stretch) {
  if (!stretch) {
    CrossmodalSimilarity s;
    s.n = n;
    s.distances = d;
    s.similarities.resize(d.size());
    for (size_t i = 0; i < d.size(); ++i) s.similarities[i] = 1.0 - d[i];
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    s.stretch_min = d.empty() ? 0.0 : *lo;
    s.stretch_max = d.empty() ? 0.0 : *hi;
    return s;
  }
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  return similarity_with_range(d, n, *lo, *hi);
}

}  // namespace mmcd
