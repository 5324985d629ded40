#include "dgi/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dgi/errors.hpp"
#include "dgi/quantizer.hpp"
#include "dgi/random.hpp"
#include "dgi/sphere.hpp"

namespace dgi {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t distinct_rows(const Tensor& points) {
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    seen.emplace(points.row(i).begin(), points.row(i).end());
  }
  return seen.size();
}

Tensor seed_plus_plus(const Tensor& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows(), d = points.cols();
  Tensor centroids(k, d);
  std::size_t first = uniform_index(rng, n);
  std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(points.row(i), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : dist) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= dist[pick];
        if (u < 0.0 && dist[pick] > 0.0) break;
      }
      if (dist[pick] == 0.0) {
        pick = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      }
    }
    std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], squared_distance(points.row(i), centroids.row(c)));
    }
  }
  return centroids;
}

Tensor seed_random_subset(const Tensor& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  Tensor centroids(k, points.cols());
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(points.row(idx[c]).begin(), points.row(idx[c]).end(), centroids.row(c).begin());
  }
  return centroids;
}

std::size_t nearest_centroid(std::span<const double> p, const Tensor& centroids, double* best_dist) {
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(p, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_dist != nullptr) *best_dist = best_d;
  return best;
}

}  // namespace

double kmeans_inertia(const Tensor& points, const Tensor& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double d = 0.0;
    nearest_centroid(points.row(i), centroids, &d);
    total += d;
  }
  return total;
}

KMeansResult kmeans(const Tensor& points, std::size_t k, std::size_t iterations, std::uint64_t seed,
                    KMeansSeeding seeding) {
  if (k == 0) throw PreconditionError("kmeans: k must be positive");
  if (distinct_rows(points) < k) throw PreconditionError("kmeans: fewer distinct points than clusters");
  const std::size_t n = points.rows(), d = points.cols();
  Rng rng(seed);
  KMeansResult res;
  res.centroids = seeding == KMeansSeeding::kPlusPlus ? seed_plus_plus(points, k, rng)
                                                      : seed_random_subset(points, k, rng);
  res.assignment.assign(n, 0);
  std::vector<double> dist(n);
  for (std::size_t it = 0; it <= iterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_centroid(points.row(i), res.centroids, &dist[i]);
      if (c != res.assignment[i]) changed = true;
      res.assignment[i] = c;
    }
    if (!changed || it == iterations) break;

    Tensor sums(k, d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = res.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) sums(c, j) += points(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed from the point currently farthest from its centroid.
        const std::size_t far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy(points.row(far).begin(), points.row(far).end(), res.centroids.row(c).begin());
        dist[far] = 0.0;
        ++res.reseeded;
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) res.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
  }
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) res.inertia += squared_distance(points.row(i), res.centroids.row(res.assignment[i]));
  return res;
}

std::vector<Tensor> kmeans_init(const Tensor& base_embeddings, std::span<const std::size_t> level_sizes,
                                std::size_t iterations, std::uint64_t seed, Geometry geometry) {
  std::vector<Tensor> codebooks;
  Tensor residuals = base_embeddings;
  for (std::size_t j = 0; j < level_sizes.size(); ++j) {
    KMeansResult fit = kmeans(residuals, level_sizes[j], iterations, seed + 7919 * j);
    Tensor codebook = fit.centroids;
    for (std::size_t c = 0; c < codebook.rows(); ++c) {
      const auto unit = l2_normalize(codebook.row(c));
      std::copy(unit.begin(), unit.end(), codebook.row(c).begin());
    }
    for (std::size_t i = 0; i < residuals.rows(); ++i) {
      const std::size_t code = nearest_code(residuals.row(i), codebook, geometry);
      const auto e = codebook.row(code);
      auto r = residuals.row(i);
      for (std::size_t c = 0; c < r.size(); ++c) r[c] -= e[c];
    }
    codebooks.push_back(std::move(codebook));
  }
  return codebooks;
}

}  // namespace dgi
