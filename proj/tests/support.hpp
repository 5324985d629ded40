#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "dgi/autograd.hpp"
#include "dgi/corpus.hpp"
#include "dgi/finite_diff.hpp"
#include "dgi/random.hpp"
#include "dgi/sphere.hpp"
#include "dgi/tensor.hpp"
#include "dgi/trainer.hpp"

namespace dgi::test {

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = scale * standard_normal(rng);
  return t;
}

inline Tensor normalized_rows(Tensor t) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto u = l2_normalize(t.row(r));
    std::copy(u.begin(), u.end(), t.row(r).begin());
  }
  return t;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * standard_normal(rng);
  return v;
}

/// Backward gradient and central differences of the scalar built by `build`
/// with respect to `params`; returns the relative error.
inline double gradient_error(const std::function<Var(Graph&)>& build, const std::vector<Parameter*>& params,
                             double h = 1e-5) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    g.backward(build(g));
  }
  const std::vector<double> analytic = flatten_grads(params);
  const std::vector<double> numeric = finite_diff_params(
      [&] {
        Graph g;
        return build(g).value()[0];
      },
      params, h);
  return relative_error(analytic, numeric);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dgi_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Small generated corpus for fast end-to-end tests.
inline Dataset small_corpus(std::size_t items = 50, std::size_t interactions = 600, std::uint64_t seed = 3) {
  CorpusParams p;
  p.n_items = items;
  p.vocab_size = 64;
  p.n_interactions = interactions;
  p.n_topics = 5;
  p.seed = seed;
  return generate_corpus(p);
}

/// Model, batch and fixed noise for gradient checks of the full objective:
/// d = 16, three levels of (8, 4, 4) codes, a 6-row batch.
struct GradientInstance {
  Dataset data;
  TrainConfig config;
  Model model;
  std::vector<Interaction> rows;
  Batch batch;
  GumbelNoise noise;
  double tau = 0.7;

  GradientInstance(std::uint64_t seed, GradientPath path = GradientPath::kSoft, Geometry geometry = Geometry::kCosine,
                   WeightSharing sharing = WeightSharing::kShared)
      : data(small_corpus(30, 120, seed)), config(make_config(path, geometry, sharing)),
        model(config.model_config(64), seed) {
    Rng rng(seed * 7919 + 1);
    for (std::size_t i = 0; i < 6; ++i) rows.push_back(data.interactions[uniform_index(rng, data.interactions.size())]);
    std::vector<const Interaction*> ptrs;
    for (const Interaction& r : rows) ptrs.push_back(&r);
    batch = BatchBuilder(data.items).build(ptrs);
    noise = draw_gumbel_noise(rng, rows.size(), config.level_sizes);
  }

  static TrainConfig make_config(GradientPath path, Geometry geometry, WeightSharing sharing) {
    TrainConfig c;
    c.dim = 16;
    c.hidden = 16;
    c.decoder_hidden = 16;
    c.level_sizes = {8, 4, 4};
    c.gradient_path = path;
    c.geometry = geometry;
    c.weight_sharing = sharing;
    return c;
  }

  BatchForward forward(Graph& g) { return forward_batch(g, model, LossSettings::from(config), batch, noise, tau); }

  /// Relative error of backward vs central differences for one loss term
  /// (or the total when `pick` returns it) over every model parameter.
  double term_error(const std::function<Var(const BatchForward&)>& pick, double h = 1e-5) {
    return gradient_error([&](Graph& g) { return pick(forward(g)); }, model.all_params(), h);
  }
};

}  // namespace dgi::test
