#pragma once

#include <vector>

namespace mmcd {

// Gaussian-kernel affinities between all pixel pairs of one patch in one
// modality, with the self-tuned kernel width that produced them.
struct AffinityMatrix {
  int n = 0;
  std::vector<double> entries;  // n x n, symmetric, unit diagonal
  double sigma = 0.0;
};

// Crossmodal distances D and the similarity target S = 1 - stretch(D).
// S is generally not symmetric.
struct CrossmodalSimilarity {
  int n = 0;
  std::vector<double> distances;
  std::vector<double> similarities;
  double stretch_min = 0.0;
  double stretch_max = 0.0;
};

// Euclidean distances between the n pixel feature vectors (dim c) of a
// flattened patch. Returns a symmetric n x n matrix with zero diagonal.
std::vector<double> pairwise_distances(const std::vector<double>& patch, int n, int c);

// ceil(0.75 * n), the default neighbor rank.
int default_neighbor_rank(int n);

// Mean over all pixels of the distance to the k-th nearest neighbor, the
// pixel itself excluded. Throws if every pairwise distance is zero.
double kernel_width(const std::vector<double>& dists, int n, int k);

// A[i,j] = exp(-d[i,j]^2 / sigma^2); entries in (0,1], diagonal exactly 1.
AffinityMatrix affinity_matrix(const std::vector<double>& dists, int n, double sigma);

// D[i,j] = ||row_i(ax) - row_j(ay)||_2 / sqrt(n) in [0,1].
std::vector<double> crossmodal_distance(const AffinityMatrix& ax, const AffinityMatrix& ay);

// S = 1 - D', where D' is D contrast-stretched between the given empirical
// bounds (all-zero when hi == lo, which makes S all ones).
CrossmodalSimilarity similarity_with_range(const std::vector<double>& d, int n, double lo,
                                           double hi);

// Convenience form: stretch against d's own extremes, or skip stretching.
CrossmodalSimilarity similarity_target(const std::vector<double>& d, int n, bool stretch);

}  // namespace mmcd
