#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dgi/autograd.hpp"
#include "dgi/random.hpp"
#include "dgi/tensor.hpp"
#include "dgi/variants.hpp"

namespace dgi {

/// Hard identifier: one code per quantization level.
struct SemanticId {
  std::vector<std::uint32_t> codes;

  std::size_t size() const noexcept { return codes.size(); }
  std::string to_string() const;  // "3-0-12"

  friend bool operator==(const SemanticId&, const SemanticId&) = default;
  friend auto operator<=>(const SemanticId&, const SemanticId&) = default;  // lexicographic
};

/// Gumbel(0, 1) draws per level, each rows x K_j. Held fixed across repeated
/// evaluations so forward passes are reproducible.
using GumbelNoise = std::vector<Tensor>;

GumbelNoise draw_gumbel_noise(Rng& rng, std::size_t rows, std::span<const std::size_t> level_sizes);
GumbelNoise zero_gumbel_noise(std::size_t rows, std::span<const std::size_t> level_sizes);

enum class Relaxation {
  kGumbelSoftmax,    // soft forward, soft backward
  kStraightThrough,  // one-hot forward, soft Jacobian backward
};

struct QuantizeResult {
  std::vector<Var> logits;        // s_j, rows x K_j (noise-free)
  std::vector<Var> probs;         // p_j, rows x K_j
  std::vector<Var> soft_vectors;  // z~_j, rows x d
  std::vector<Var> residuals;     // r_0 .. r_m
  std::vector<SemanticId> sids;   // hard, noise-free supervision targets
  /// Per level, per row: argmax of the noise-free logits along the soft path.
  std::vector<std::vector<std::size_t>> selected;
  std::size_t degenerate_count = 0;
};

/// gamma * cos(r_i, e_k) for every residual row and codebook row. Throws
/// DegenerateVectorError on a residual with norm below 1e-12.
Var cosine_logits(Var residuals, Var codebook, Var gamma);
/// As cosine_logits, but degenerate residual rows yield zero logits and are
/// flagged instead of raising.
Var cosine_logits_masked(Var residuals, Var codebook, Var gamma, std::vector<bool>& degenerate);
/// Raw inner products r_i . e_k (ablation geometry).
Var dot_logits(Var residuals, Var codebook);

/// softmax((logits + noise) / tau) row-wise; noise is treated as a constant.
/// Throws ConfigError for tau <= 0.
Var gumbel_softmax(Var logits, double tau, const Tensor& noise);

/// Index of the best-scoring code for residual r (first index wins ties).
/// Sets *degenerate and returns 0 if cosine geometry meets a residual with
/// norm below 1e-12.
std::size_t nearest_code(std::span<const double> r, const Tensor& codebook, Geometry geometry,
                         bool* degenerate = nullptr);

/// Hierarchical residual quantizer over codebooks held elsewhere (the model
/// owns the parameters; the decoder heads may alias the same objects).
class Quantizer {
 public:
  Quantizer(std::vector<Parameter*> codebooks, Parameter* log_gamma, Geometry geometry);

  std::size_t levels() const noexcept { return codebooks_.size(); }
  std::size_t level_size(std::size_t level) const { return codebooks_.at(level)->value.rows(); }
  std::vector<std::size_t> level_sizes() const;
  std::size_t dim() const { return codebooks_.front()->value.cols(); }
  Geometry geometry() const noexcept { return geometry_; }
  Parameter& codebook(std::size_t level) const { return *codebooks_.at(level); }

  Var gamma(Graph& g) const;
  /// Level logits for a batch of residual rows under the configured geometry.
  Var logits(Graph& g, Var residuals, std::size_t level, std::vector<bool>& degenerate) const;

  /// Soft residual quantization. `noise` must hold one rows x K_j tensor per
  /// level. Degenerate residual rows fall back to uniform probabilities.
  QuantizeResult quantize(Graph& g, Var z_base, const GumbelNoise& noise, double tau,
                          Relaxation relaxation = Relaxation::kGumbelSoftmax) const;

  /// Noise-free, temperature-free argmax per level with hard residual
  /// subtraction. Never touches a graph.
  std::vector<SemanticId> hard_assign(const Tensor& z_base, std::size_t* degenerate = nullptr) const;

 private:
  std::vector<Parameter*> codebooks_;
  Parameter* log_gamma_;
  Geometry geometry_;
};

}  // namespace dgi
