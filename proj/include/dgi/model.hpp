#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dgi/autograd.hpp"
#include "dgi/corpus.hpp"
#include "dgi/quantizer.hpp"
#include "dgi/variants.hpp"

namespace dgi {

struct ModelConfig {
  std::size_t vocab_size = 500;
  std::size_t dim = 64;
  std::size_t hidden = 64;          // encoder MLP width
  std::size_t decoder_hidden = 64;
  std::vector<std::size_t> level_sizes{64, 32, 16};
  Geometry geometry = Geometry::kCosine;
  WeightSharing weight_sharing = WeightSharing::kShared;
  double gamma_init = 30.0;
};

/// Query tokens plus the titles of the history items (possibly empty).
struct QueryInput {
  std::span<const TokenId> tokens;
  std::vector<std::span<const TokenId>> history;
};

/// Item/query encoders and the per-step conditional decoder. The decoder's
/// level-t prediction head is the level-t codebook itself under shared
/// weights; under separate weights it is an independent parameter.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t levels() const noexcept { return config_.level_sizes.size(); }
  std::size_t dim() const noexcept { return config_.dim; }

  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  Parameter& codebook(std::size_t level) { return *codebooks_.at(level); }
  const Parameter& codebook(std::size_t level) const { return *codebooks_.at(level); }
  Parameter& head(std::size_t level) { return *heads_.at(level); }
  const Parameter& head(std::size_t level) const { return *heads_.at(level); }
  Parameter& log_gamma() { return *log_gamma_; }
  double gamma() const;

  /// Quantizer view over this model's codebooks and scale.
  Quantizer quantizer() const;

  /// Overwrites codebooks (and separate heads) with the given tables.
  void set_codebooks(const std::vector<Tensor>& tables);

  /// Parameters of the item tower only (its MLP). The token table is shared
  /// with the query tower and is not included.
  std::vector<Parameter*> item_encoder_params();
  std::vector<Parameter*> all_params();

  /// Mean of token embeddings through the item MLP. rows = titles.size().
  Var encode_items(Graph& g, std::span<const std::span<const TokenId>> titles);
  /// Unit-norm query embedding from [mean(query tokens), mean(history titles)].
  Var encode_queries(Graph& g, std::span<const QueryInput> queries);
  /// Hidden state for step t (1-based) from z_q and t-1 prior vectors.
  Var decode_step(Graph& g, Var z_q, std::span<const Var> prior_vectors, std::size_t t);
  /// gamma * cos(h_t, e_k) against head t (1-based).
  Var head_logits(Graph& g, Var h, std::size_t t);
  /// h_t . e_k against head t (1-based), unnormalized.
  Var dot_head_logits(Graph& g, Var h, std::size_t t);
  /// head_logits or dot_head_logits according to the configured geometry.
  Var level_logits(Graph& g, Var h, std::size_t t);

  /// Graph-free item embeddings (z_base) for a list of items.
  Tensor item_embeddings(const std::vector<ItemRecord>& items);

 private:
  struct Mlp {
    Parameter* w1 = nullptr;
    Parameter* b1 = nullptr;
    Parameter* w2 = nullptr;
    Parameter* b2 = nullptr;
  };

  Mlp make_mlp(const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
               double out_scale, Rng& rng, double in_std = 0.0);
  Var apply_mlp(Graph& g, const Mlp& mlp, Var x);

  ModelConfig config_;
  ParameterStore params_;
  Parameter* token_embedding_ = nullptr;
  Parameter* step_embedding_ = nullptr;
  Parameter* log_gamma_ = nullptr;
  Mlp item_mlp_;
  Mlp query_mlp_;
  Mlp decoder_mlp_;
  std::vector<Parameter*> codebooks_;
  std::vector<Parameter*> heads_;
};

}  // namespace dgi
