#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dgi/tensor.hpp"
#include "dgi/variants.hpp"

namespace dgi {

enum class KMeansSeeding { kPlusPlus, kRandomSubset };

struct KMeansResult {
  Tensor centroids;  // k x d, not normalized
  std::vector<std::size_t> assignment;
  double inertia = 0.0;       // sum of squared distances to assigned centroid
  std::size_t reseeded = 0;   // empty clusters re-seeded from the farthest point
};

/// Lloyd's algorithm on the rows of `points`. Throws PreconditionError when
/// there are fewer distinct rows than k.
KMeansResult kmeans(const Tensor& points, std::size_t k, std::size_t iterations,
                    std::uint64_t seed, KMeansSeeding seeding = KMeansSeeding::kPlusPlus);

/// Sum of squared distances from each point to its nearest centroid.
double kmeans_inertia(const Tensor& points, const Tensor& centroids);

/// Residual K-means codebook initialization. Level 1 clusters the base
/// embeddings; level j clusters the level j-1 residuals after hard
/// assignment. Centroids are l2-normalized after fitting.
std::vector<Tensor> kmeans_init(const Tensor& base_embeddings,
                                std::span<const std::size_t> level_sizes,
                                std::size_t iterations, std::uint64_t seed,
                                Geometry geometry = Geometry::kCosine);

}  // namespace dgi
