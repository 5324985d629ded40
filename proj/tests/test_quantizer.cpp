#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "dgi/errors.hpp"
#include "dgi/kmeans.hpp"
#include "dgi/quantizer.hpp"
#include "dgi/sphere.hpp"
#include "support.hpp"

namespace dgi {
namespace {

using test::normalized_rows;
using test::random_tensor;

// Codebooks plus log-gamma in a store, wrapped by a Quantizer.
struct Books {
  ParameterStore store;
  std::vector<Parameter*> books;
  Parameter* log_gamma = nullptr;

  Books(Rng& rng, std::size_t d, std::vector<std::size_t> sizes, double gamma = 30.0) {
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      books.push_back(&store.add("codebook_" + std::to_string(j), normalized_rows(random_tensor(rng, sizes[j], d)),
                                 ParamGroup::kQuantizer));
    }
    log_gamma = &store.add("log_gamma", Tensor::scalar(std::log(gamma)), ParamGroup::kQuantizer);
  }
  Quantizer quantizer(Geometry g = Geometry::kCosine) const { return Quantizer(books, log_gamma, g); }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    for (auto* b : books) s.push_back(b->value.rows());
    return s;
  }
};

TEST(CosineLogits, Examples) {
  Graph g;
  Var codebook = g.constant(Tensor::from_rows({{2.0, 0.0}, {0.0, 3.0}, {-1.0, 0.0}}));
  Var gamma = g.constant(Tensor::scalar(30.0));
  Var s = cosine_logits(g.constant(Tensor::from_rows({{0.5, 0.0}})), codebook, gamma);
  EXPECT_NEAR(s.value()[0], 30.0, 1e-12);
  EXPECT_NEAR(s.value()[1], 0.0, 1e-12);
  EXPECT_NEAR(s.value()[2], -30.0, 1e-12);
  EXPECT_THROW(cosine_logits(g.constant(Tensor::from_rows({{0.0, 0.0}})), codebook, gamma), DegenerateVectorError);

  std::vector<bool> degenerate;
  Var masked = cosine_logits_masked(g.constant(Tensor::from_rows({{0.0, 0.0}, {1.0, 1.0}})), codebook, gamma,
                                    degenerate);
  EXPECT_TRUE(degenerate[0]);
  EXPECT_FALSE(degenerate[1]);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(masked.value()(0, k), 0.0);
}

TEST(CosineLogits, BoundedByGamma) {
  Rng rng(8);
  Graph g;
  Var s = cosine_logits(g.constant(random_tensor(rng, 20, 6, 5.0)), g.constant(random_tensor(rng, 9, 6, 0.1)),
                        g.constant(Tensor::scalar(12.5)));
  for (double v : s.value().values()) {
    EXPECT_LE(v, 12.5 + 1e-12);
    EXPECT_GE(v, -12.5 - 1e-12);
  }
}

TEST(GumbelSoftmax, Examples) {
  Graph g;
  Var uniform = gumbel_softmax(g.constant(Tensor(1, 5, 2.0)), 0.7, Tensor(1, 5, 0.0));
  for (double v : uniform.value().values()) EXPECT_NEAR(v, 0.2, 1e-12);
  Var two = gumbel_softmax(g.constant(Tensor::row_vector({1.0, 0.0})), 1.0, Tensor(1, 2, 0.0));
  EXPECT_NEAR(two.value()[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(two.value()[1], 1.0 / (1.0 + std::exp(1.0)), 1e-12);
  EXPECT_NEAR(two.value()[0], 0.7311, 1e-4);
  EXPECT_THROW(gumbel_softmax(g.constant(Tensor(1, 2, 0.0)), 0.0, Tensor(1, 2, 0.0)), ConfigError);
}

// gamma = 30 cosine logits, d = K = 4. How often the limit is reached at
// tau = 0.01 depends on the spread of the logits (about 99.5% here, about 97%
// for random 64 x 64 codebooks).
TEST(GumbelSoftmax, LowTemperatureConcentrates) {
  Rng rng(21);
  std::size_t concentrated = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<std::size_t> k{4};
    const GumbelNoise noise = draw_gumbel_noise(rng, 1, k);
    Graph g;
    Var s = cosine_logits(g.constant(random_tensor(rng, 1, 4)), g.constant(random_tensor(rng, 4, 4)),
                          g.constant(Tensor::scalar(30.0)));
    Var p = gumbel_softmax(s, 0.01, noise[0]);
    const auto& v = p.value().values();
    concentrated += *std::max_element(v.begin(), v.end()) >= 0.99 ? 1 : 0;
  }
  EXPECT_GE(concentrated, 990u);
}

TEST(GumbelNoise, StandardGumbelMoments) {
  Rng rng(1);
  const std::vector<std::size_t> k{100};
  const GumbelNoise noise = draw_gumbel_noise(rng, 2000, k);
  double mean = 0.0;
  for (double v : noise[0].values()) mean += v;
  mean /= static_cast<double>(noise[0].size());
  EXPECT_NEAR(mean, 0.5772156649, 0.01);  // Euler-Mascheroni constant
}

TEST(Quantize, SimplexAndTelescoping) {
  Rng rng(3);
  Books s(rng, 8, {6, 4, 4});
  const Quantizer q = s.quantizer();
  Graph g;
  Var z = g.constant(random_tensor(rng, 10, 8));
  const QuantizeResult r = q.quantize(g, z, draw_gumbel_noise(rng, 10, s.sizes()), 0.5);
  for (const Var& p : r.probs) {
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double total = 0.0;
      for (double v : p.value().row(i)) {
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-8);
    }
  }
  // r_J = z - sum of soft vectors, evaluated left to right.
  Tensor acc = z.value();
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] -= r.soft_vectors[j].value()[i];
    EXPECT_EQ(acc, r.residuals[j + 1].value());
  }
  for (const SemanticId& sid : r.sids) {
    ASSERT_EQ(sid.size(), 3u);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_LT(sid.codes[j], s.sizes()[j]);
  }
}

TEST(Quantize, SidIgnoresNoiseAndMatchesHardAssign) {
  Rng rng(4);
  Books s(rng, 8, {6, 4, 4});
  const Quantizer q = s.quantizer();
  const Tensor z = random_tensor(rng, 25, 8);
  const auto hard = q.hard_assign(z);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g;
    const QuantizeResult r = q.quantize(g, g.constant(z), draw_gumbel_noise(rng, 25, s.sizes()), 0.3);
    EXPECT_EQ(r.sids, hard);
  }
  EXPECT_EQ(q.hard_assign(z), hard);
}

TEST(Quantize, PerfectFirstLevelFit) {
  Rng rng(5);
  Books s(rng, 6, {5, 3});
  const Quantizer q = s.quantizer();
  Tensor z(1, 6);
  std::copy(s.books[0]->value.row(2).begin(), s.books[0]->value.row(2).end(), z.row(0).begin());
  Graph g;
  const QuantizeResult r = q.quantize(g, g.constant(z), zero_gumbel_noise(1, s.sizes()), 0.01);
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_LE(std::abs(r.soft_vectors[0].value()[c] - z[c]), 1e-3);
    EXPECT_LE(std::abs(r.residuals[1].value()[c]), 1e-3);
  }
}

TEST(Quantize, LowTemperatureMatchesNoisyArgmax) {
  Rng rng(6);
  std::size_t close = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Books s(rng, 4, {4});
    const Quantizer q = s.quantizer();
    const Tensor z = random_tensor(rng, 1, 4);
    const GumbelNoise noise = draw_gumbel_noise(rng, 1, s.sizes());
    Graph g;
    const QuantizeResult r = q.quantize(g, g.constant(z), noise, 0.01);
    std::size_t best = 0;
    for (std::size_t k = 1; k < 4; ++k) {
      if (r.logits[0].value()[k] + noise[0][k] > r.logits[0].value()[best] + noise[0][best]) best = k;
    }
    double diff = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      diff = std::max(diff, std::abs(r.soft_vectors[0].value()[c] - s.books[0]->value(best, c)));
    }
    close += diff <= 1e-3 ? 1 : 0;
  }
  EXPECT_GE(close, 990u);
}

TEST(Quantize, SoftGradientReachesInput) {
  Rng rng(7);
  Books s(rng, 5, {4, 3});
  const Quantizer q = s.quantizer();
  ParameterStore inputs;
  Parameter& z = inputs.add("z", random_tensor(rng, 3, 5), ParamGroup::kBackbone);
  const GumbelNoise noise = draw_gumbel_noise(rng, 3, s.sizes());
  const Tensor w = random_tensor(rng, 3, 5);
  auto build = [&](Graph& g) {
    const QuantizeResult r = q.quantize(g, g.param(z), noise, 0.8);
    return sum(mul(add(r.soft_vectors[0], r.soft_vectors[1]), g.constant(w)));
  };
  const double err = test::gradient_error(build, {&z});
  EXPECT_LE(err, 1e-4);
  double gnorm = 0.0;
  for (double v : z.grad.values()) gnorm += v * v;
  EXPECT_GT(gnorm, 0.0);
  // codebooks and gamma are on the path too
  EXPECT_LE(test::gradient_error(build, std::vector<Parameter*>{s.books[0], s.books[1], s.log_gamma}), 1e-4);
}

TEST(Quantize, StraightThroughForwardIsCodebookRow) {
  Rng rng(8);
  Books s(rng, 6, {5, 4});
  const Quantizer q = s.quantizer();
  ParameterStore inputs;
  Parameter& z = inputs.add("z", random_tensor(rng, 4, 6), ParamGroup::kBackbone);
  const GumbelNoise noise = draw_gumbel_noise(rng, 4, s.sizes());
  Graph g;
  const QuantizeResult r = q.quantize(g, g.param(z), noise, 0.7, Relaxation::kStraightThrough);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 4; ++i) {
      bool matches = false;
      for (std::size_t k = 0; k < s.sizes()[j]; ++k) {
        bool same = true;
        for (std::size_t c = 0; c < 6; ++c) same = same && r.soft_vectors[j].value()(i, c) == s.books[j]->value(k, c);
        matches = matches || same;
      }
      EXPECT_TRUE(matches);
    }
  }
  z.zero_grad();
  g.backward(sum(r.soft_vectors[0]));
  double gnorm = 0.0;
  for (double v : z.grad.values()) gnorm += v * v;
  EXPECT_GT(gnorm, 0.0);
}

TEST(Quantize, DegenerateResidualFallsBackToUniform) {
  Rng rng(9);
  Books s(rng, 4, {3, 3});
  const Quantizer q = s.quantizer();
  Graph g;
  const QuantizeResult r = q.quantize(g, g.constant(Tensor(2, 4, 0.0)), draw_gumbel_noise(rng, 2, s.sizes()), 0.5);
  EXPECT_GE(r.degenerate_count, 2u);
  for (double v : r.probs[0].value().values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);
}

TEST(HardAssign, FirstLevelScaleInvariant) {
  Rng rng(10);
  Books s(rng, 8, {16, 8, 4});
  const Quantizer q = s.quantizer();
  const Tensor z = random_tensor(rng, 50, 8);
  for (double alpha : {0.01, 0.5, 3.0, 1e4}) {
    Tensor scaled = z;
    for (double& v : scaled.values()) v *= alpha;
    const auto a = q.hard_assign(z);
    const auto b = q.hard_assign(scaled);
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(a[i].codes[0], b[i].codes[0]);
  }
}

// Brute force: per level, the code with the largest cosine to the running
// residual; the residual then subtracts that raw codebook row.
TEST(HardAssign, MatchesPerLevelOracle) {
  Rng rng(11);
  Books s(rng, 6, {4, 2, 2});
  const Quantizer q = s.quantizer();
  const Tensor z = random_tensor(rng, 8, 6);
  const auto sids = q.hard_assign(z);
  for (std::size_t i = 0; i < 8; ++i) {
    std::vector<double> r(z.row(i).begin(), z.row(i).end());
    for (std::size_t j = 0; j < 3; ++j) {
      const Tensor& E = s.books[j]->value;
      std::size_t best = 0;
      double best_cos = -2.0;
      for (std::size_t k = 0; k < E.rows(); ++k) {
        const double c = dot(r, E.row(k)) / (norm(r) * norm(E.row(k)));
        if (c > best_cos) {
          best_cos = c;
          best = k;
        }
      }
      EXPECT_EQ(sids[i].codes[j], best);
      for (std::size_t c = 0; c < 6; ++c) r[c] -= E(best, c);
    }
  }
  Tensor twice(2, 6);
  std::copy(z.row(3).begin(), z.row(3).end(), twice.row(0).begin());
  std::copy(z.row(3).begin(), z.row(3).end(), twice.row(1).begin());
  const auto same = q.hard_assign(twice);
  EXPECT_EQ(same[0], same[1]);
}

TEST(HardAssign, DotGeometryUsesInnerProduct) {
  Tensor book = Tensor::from_rows({{1.0, 0.0}, {0.0, 5.0}});
  EXPECT_EQ(nearest_code(std::vector<double>{1.0, 0.3}, book, Geometry::kCosine), 0u);
  EXPECT_EQ(nearest_code(std::vector<double>{1.0, 0.3}, book, Geometry::kDot), 1u);
}

TEST(KMeans, SeparatedPoints) {
  const Tensor pts = Tensor::from_rows({{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
  const KMeansResult r = kmeans(pts, 4, 10, 1);
  std::set<std::pair<double, double>> found;
  for (std::size_t k = 0; k < 4; ++k) found.insert({r.centroids(k, 0), r.centroids(k, 1)});
  EXPECT_EQ(found, (std::set<std::pair<double, double>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}));
  EXPECT_EQ(r.inertia, 0.0);
}

TEST(KMeans, SingleClusterIsNormalizedMean) {
  Rng rng(2);
  const Tensor pts = random_tensor(rng, 30, 5);
  const std::vector<std::size_t> sizes{1};
  const auto books = kmeans_init(pts, sizes, 10, 3);
  std::vector<double> mean(5, 0.0);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t c = 0; c < 5; ++c) mean[c] += pts(i, c) / 30.0;
  }
  const auto expected = l2_normalize(mean);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(books[0](0, c), expected[c], 1e-12);
}

TEST(KMeans, PlusPlusBeatsRandomSubset) {
  Rng data_rng(77);
  // Clustered data: 8 well-separated centers plus noise.
  const Tensor centers = random_tensor(data_rng, 8, 16, 4.0);
  Tensor pts(200, 16);
  for (std::size_t i = 0; i < 200; ++i) {
    const std::size_t c = uniform_index(data_rng, 8);
    for (std::size_t k = 0; k < 16; ++k) pts(i, k) = centers(c, k) + 0.3 * standard_normal(data_rng);
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double pp = kmeans(pts, 8, 25, seed, KMeansSeeding::kPlusPlus).inertia;
    const double rnd = kmeans(pts, 8, 0, seed, KMeansSeeding::kRandomSubset).inertia;
    EXPECT_LE(pp, rnd) << "seed " << seed;
    EXPECT_NEAR(pp, kmeans_inertia(pts, kmeans(pts, 8, 25, seed).centroids), 1e-9 * pp);
  }
}

TEST(KMeans, InitIsDeterministicAndNormalized) {
  Rng rng(5);
  const Tensor pts = random_tensor(rng, 120, 6);
  const std::vector<std::size_t> sizes{8, 4, 4};
  const auto a = kmeans_init(pts, sizes, 15, 9);
  const auto b = kmeans_init(pts, sizes, 15, 9);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(a[j], b[j]);
    EXPECT_EQ(a[j].rows(), sizes[j]);
    for (std::size_t k = 0; k < sizes[j]; ++k) EXPECT_NEAR(norm(a[j].row(k)), 1.0, 1e-12);
  }
  EXPECT_THROW(kmeans(Tensor::from_rows({{1, 0}, {1, 0}, {0, 1}}), 3, 5, 1), PreconditionError);
}

}  // namespace
}  // namespace dgi
