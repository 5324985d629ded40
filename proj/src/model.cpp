#include "dgi/model.hpp"

#include <cmath>

#include "dgi/errors.hpp"
#include "dgi/random.hpp"

namespace dgi {

namespace {

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = stddev * standard_normal(rng);
  return t;
}

void normalize_table_rows(Tensor& t) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double n = 0.0;
    for (double v : t.row(r)) n += v * v;
    n = std::sqrt(n);
    for (double& v : t.row(r)) v /= n;
  }
}

}  // namespace

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config_.vocab_size == 0 || config_.dim == 0 || config_.hidden == 0 || config_.decoder_hidden == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (config_.level_sizes.empty()) throw ConfigError("model needs at least one quantization level");
  for (std::size_t k : config_.level_sizes) {
    if (k < 2) throw ConfigError("every codebook level needs at least 2 codes");
  }
  if (!(config_.gamma_init > 0.0)) throw ConfigError("gamma_init must be positive");

  Rng rng(seed);
  const std::size_t d = config_.dim, h = config_.hidden, m = levels();
  token_embedding_ = &params_.add("token_embedding", gaussian(config_.vocab_size, d, 1.0, rng), ParamGroup::kBackbone);
  // The item tower output starts near unit norm so normalized K-means
  // centroids and residuals live on a comparable scale.
  item_mlp_ = make_mlp("item_mlp", d, h, d, 2.5 / std::sqrt(static_cast<double>(d)), rng);
  query_mlp_ = make_mlp("query_mlp", 2 * d, h, d, 1.0, rng);
  // Decoder inputs are three roughly unit-norm blocks rather than
  // unit-variance coordinates, so the first layer is scaled to the input norm.
  decoder_mlp_ = make_mlp("decoder_mlp", 3 * d, config_.decoder_hidden, d, 1.0, rng, 1.0 / std::sqrt(3.0));
  step_embedding_ = &params_.add("step_embedding", gaussian(m, d, 1.0 / std::sqrt(static_cast<double>(d)), rng), ParamGroup::kBackbone);

  for (std::size_t j = 0; j < m; ++j) {
    Tensor table = gaussian(config_.level_sizes[j], d, 1.0, rng);
    normalize_table_rows(table);
    codebooks_.push_back(&params_.add("codebook_" + std::to_string(j), table, ParamGroup::kQuantizer));
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (config_.weight_sharing == WeightSharing::kShared) {
      heads_.push_back(codebooks_[j]);
    } else {
      heads_.push_back(&params_.add("head_" + std::to_string(j), codebooks_[j]->value, ParamGroup::kQuantizer));
    }
  }
  log_gamma_ = &params_.add("log_gamma", Tensor::scalar(std::log(config_.gamma_init)), ParamGroup::kQuantizer);
}

Model::Mlp Model::make_mlp(const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t out,
                           double out_scale, Rng& rng, double in_std) {
  Mlp mlp;
  if (in_std <= 0.0) in_std = 1.0 / std::sqrt(static_cast<double>(in));
  mlp.w1 = &params_.add(prefix + ".w1", gaussian(in, hidden, in_std, rng),
                        ParamGroup::kBackbone);
  mlp.b1 = &params_.add(prefix + ".b1", Tensor(1, hidden, 0.0), ParamGroup::kBackbone);
  mlp.w2 = &params_.add(prefix + ".w2",
                        gaussian(hidden, out, out_scale / std::sqrt(static_cast<double>(hidden)), rng),
                        ParamGroup::kBackbone);
  mlp.b2 = &params_.add(prefix + ".b2", Tensor(1, out, 0.0), ParamGroup::kBackbone);
  return mlp;
}

Var Model::apply_mlp(Graph& g, const Mlp& mlp, Var x) {
  Var hidden = tanh(add_row(matmul(x, g.param(*mlp.w1)), g.param(*mlp.b1)));
  return add_row(matmul(hidden, g.param(*mlp.w2)), g.param(*mlp.b2));
}

double Model::gamma() const { return std::exp(log_gamma_->value[0]); }

Quantizer Model::quantizer() const { return Quantizer(codebooks_, log_gamma_, config_.geometry); }

void Model::set_codebooks(const std::vector<Tensor>& tables) {
  if (tables.size() != levels()) throw PreconditionError("set_codebooks: level count mismatch");
  for (std::size_t j = 0; j < levels(); ++j) {
    if (!tables[j].same_shape(codebooks_[j]->value)) throw PreconditionError("set_codebooks: shape mismatch");
    codebooks_[j]->value = tables[j];
    if (heads_[j] != codebooks_[j]) heads_[j]->value = tables[j];
  }
}

std::vector<Parameter*> Model::item_encoder_params() {
  return {item_mlp_.w1, item_mlp_.b1, item_mlp_.w2, item_mlp_.b2};
}

std::vector<Parameter*> Model::all_params() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

Var Model::encode_items(Graph& g, std::span<const std::span<const TokenId>> titles) {
  PoolSegments segments(titles.size());
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (titles[i].empty()) throw PreconditionError("encode_item: empty token sequence");
    const double w = 1.0 / static_cast<double>(titles[i].size());
    for (TokenId t : titles[i]) segments[i].emplace_back(static_cast<std::size_t>(t), w);
  }
  Var pooled = pool_rows(g.param(*token_embedding_), std::move(segments));
  return apply_mlp(g, item_mlp_, pooled);
}

Var Model::encode_queries(Graph& g, std::span<const QueryInput> queries) {
  PoolSegments query_seg(queries.size());
  PoolSegments history_seg(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const QueryInput& q = queries[i];
    if (q.tokens.empty()) throw PreconditionError("encode_query: empty query");
    const double wq = 1.0 / static_cast<double>(q.tokens.size());
    for (TokenId t : q.tokens) query_seg[i].emplace_back(static_cast<std::size_t>(t), wq);
    const double per_item = q.history.empty() ? 0.0 : 1.0 / static_cast<double>(q.history.size());
    for (const auto& title : q.history) {
      if (title.empty()) throw PreconditionError("encode_query: history item without tokens");
      const double w = per_item / static_cast<double>(title.size());
      for (TokenId t : title) history_seg[i].emplace_back(static_cast<std::size_t>(t), w);
    }
  }
  Var table = g.param(*token_embedding_);
  Var x = concat_cols({pool_rows(table, std::move(query_seg)), pool_rows(table, std::move(history_seg))});
  return normalize_rows(apply_mlp(g, query_mlp_, x));
}

Var Model::decode_step(Graph& g, Var z_q, std::span<const Var> prior_vectors, std::size_t t) {
  if (t < 1 || t > levels()) throw PreconditionError("decode_step: step out of range");
  if (prior_vectors.size() != t - 1) throw PreconditionError("decode_step: expected t-1 prior vectors");
  const std::size_t rows = z_q.rows();
  Var prior = prior_vectors.empty() ? g.constant(Tensor(rows, config_.dim, 0.0)) : prior_vectors[0];
  for (std::size_t i = 1; i < prior_vectors.size(); ++i) prior = add(prior, prior_vectors[i]);
  Var step = gather_rows(g.param(*step_embedding_), std::vector<std::size_t>(rows, t - 1));
  return apply_mlp(g, decoder_mlp_, concat_cols({z_q, prior, step}));
}

Var Model::head_logits(Graph& g, Var h, std::size_t t) {
  if (t < 1 || t > levels()) throw PreconditionError("head_logits: level out of range");
  return cosine_logits(h, g.param(*heads_[t - 1]), exp(g.param(*log_gamma_)));
}

Var Model::dot_head_logits(Graph& g, Var h, std::size_t t) {
  if (t < 1 || t > levels()) throw PreconditionError("dot_head_logits: level out of range");
  return matmul_nt(h, g.param(*heads_[t - 1]));
}

Var Model::level_logits(Graph& g, Var h, std::size_t t) {
  return config_.geometry == Geometry::kCosine ? head_logits(g, h, t) : dot_head_logits(g, h, t);
}

Tensor Model::item_embeddings(const std::vector<ItemRecord>& items) {
  Tensor out(items.size(), config_.dim);
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < items.size(); start += kChunk) {
    const std::size_t end = std::min(items.size(), start + kChunk);
    std::vector<std::span<const TokenId>> titles;
    for (std::size_t i = start; i < end; ++i) titles.emplace_back(items[i].tokens);
    Graph g;
    const Tensor& z = encode_items(g, titles).value();
    std::copy(z.values().begin(), z.values().end(), out.data() + start * config_.dim);
  }
  return out;
}

}  // namespace dgi
