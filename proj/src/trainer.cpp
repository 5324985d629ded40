#include "dgi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dgi/errors.hpp"
#include "dgi/kmeans.hpp"
#include "dgi/random.hpp"

namespace dgi {

std::string to_string(OptimizerKind o) { return o == OptimizerKind::kSgd ? "sgd" : "adamw"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adamw") return OptimizerKind::kAdamW;
  throw ConfigError("unknown optimizer: " + s);
}

void TrainConfig::validate() const {
  if (dim == 0 || hidden == 0 || decoder_hidden == 0) throw ConfigError("dim and hidden sizes must be positive");
  if (level_sizes.empty()) throw ConfigError("level_sizes must not be empty");
  for (std::size_t k : level_sizes) {
    if (k < 2) throw ConfigError("every level needs at least 2 codes");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0 && max_steps == 0) throw ConfigError("epochs or max_steps must be positive");
  if (!(lr_backbone > 0.0) || !(lr_quantizer > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(tau_end > 0.0) || !(tau_start >= tau_end)) throw ConfigError("need tau_start >= tau_end > 0");
  if (!(tau_cl > 0.0)) throw ConfigError("tau_cl must be positive");
  if (!(beta >= 0.0)) throw ConfigError("beta must be nonnegative");
  if (!(eps >= 0.0)) throw ConfigError("eps must be nonnegative");
  if (!(gamma_init > 0.0)) throw ConfigError("gamma_init must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  for (double w : {weights.ntp, weights.global, weights.local, weights.infonce, weights.diversity}) {
    if (!(w >= 0.0)) throw ConfigError("loss weights must be nonnegative");
  }
}

ModelConfig TrainConfig::model_config(std::size_t vocab) const {
  ModelConfig mc;
  mc.vocab_size = vocab;
  mc.dim = dim;
  mc.hidden = hidden;
  mc.decoder_hidden = decoder_hidden;
  mc.level_sizes = level_sizes;
  mc.geometry = geometry;
  mc.weight_sharing = weight_sharing;
  mc.gamma_init = gamma_init;
  return mc;
}

LossSettings LossSettings::from(const TrainConfig& cfg) {
  LossSettings s;
  s.gradient_path = cfg.gradient_path;
  s.tau_cl = cfg.tau_cl;
  s.beta = cfg.beta;
  s.eps = cfg.eps;
  s.diversity = cfg.diversity;
  s.weights = cfg.weights;
  return s;
}

LossWeights LossSettings::effective_weights() const {
  LossWeights w = weights;
  if (!diversity) w.diversity = 0.0;
  return w;
}

BatchForward forward_batch(Graph& g, Model& model, const LossSettings& settings, const Batch& batch,
                           const GumbelNoise& noise, double tau) {
  BatchForward out;
  const bool detached = settings.gradient_path == GradientPath::kDetached;
  out.z_base = model.encode_items(g, batch.titles);
  out.z_q = model.encode_queries(g, batch.queries);
  // Two-stage behaviour: the quantizer sees a constant copy of z_base and the
  // decoder sees constant soft vectors.
  Var q_in = detached ? detach(out.z_base) : out.z_base;
  const Relaxation relax =
      settings.gradient_path == GradientPath::kSte ? Relaxation::kStraightThrough : Relaxation::kGumbelSoftmax;
  out.quantized = model.quantizer().quantize(g, q_in, noise, tau, relax);
  const QuantizeResult& qr = out.quantized;
  const std::size_t m = model.levels();

  std::vector<Var> priors;
  for (const Var& z : qr.soft_vectors) priors.push_back(detached ? detach(z) : z);
  std::vector<Var> logits;
  for (std::size_t t = 1; t <= m; ++t) {
    Var h = model.decode_step(g, out.z_q, std::span<const Var>(priors).first(t - 1), t);
    logits.push_back(model.level_logits(g, h, t));
  }

  std::vector<Var> inputs;
  std::vector<Var> codebooks;
  for (std::size_t j = 0; j < m; ++j) {
    if (detached) {
      // Same value as r_{j-1}, but only the commitment term's z_base path
      // carries gradient back to the encoder.
      Tensor offset = qr.residuals[j].value();
      const Tensor& base = out.z_base.value();
      for (std::size_t i = 0; i < offset.size(); ++i) offset[i] -= base[i];
      inputs.push_back(add(out.z_base, g.constant(std::move(offset))));
    } else {
      inputs.push_back(qr.residuals[j]);
    }
    codebooks.push_back(g.param(model.codebook(j)));
  }

  Var items = normalize_rows(out.z_base);
  out.terms.ntp = ntp_loss(logits, qr.sids);
  out.terms.global_recon = global_recon_loss(q_in, qr.soft_vectors, &out.breakdown.global_skipped);
  out.terms.local_codebook = local_codebook_loss(inputs, codebooks, qr.selected, settings.beta);
  out.terms.infonce = infonce_loss(out.z_q, items, settings.tau_cl);
  out.terms.diversity = diversity_loss(qr.probs, settings.eps);
  out.total = total_loss(out.terms, settings.effective_weights());

  out.breakdown.ntp = out.terms.ntp.value()[0];
  out.breakdown.global_recon = out.terms.global_recon.value()[0];
  out.breakdown.local_codebook = out.terms.local_codebook.value()[0];
  out.breakdown.infonce = out.terms.infonce.value()[0];
  out.breakdown.diversity = out.terms.diversity.value()[0];
  out.breakdown.total = out.total.value()[0];
  return out;
}

// ---------------------------------------------------------------------------
// Trace I/O

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const TrainTrace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const TraceRecord& r : trace.records) {
    out << r.step << ',' << fmt(r.tau) << ',' << fmt(r.lr) << ',' << fmt(r.loss.ntp) << ','
        << fmt(r.loss.global_recon) << ',' << fmt(r.loss.local_codebook) << ',' << fmt(r.loss.infonce) << ','
        << fmt(r.loss.diversity) << ',' << fmt(r.loss.total) << ',' << fmt(r.enc_grad_norm) << '\n';
  }
}

void save_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace: " + path);
  write_trace_csv(trace, out);
  if (!out) throw Error("failed writing trace: " + path);
}

std::vector<double> load_trace_grad_norms(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read trace: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trace is empty", 1);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto it = std::find(header.begin(), header.end(), "enc_grad_norm");
  if (it == header.end()) throw ParseError("trace header lacks enc_grad_norm", 1);
  const std::size_t col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    bool found = false;
    while (std::getline(ss, cell, ',')) {
      if (c++ == col) {
        try {
          out.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw ParseError("bad enc_grad_norm value", lineno);
        }
        found = true;
        break;
      }
    }
    if (!found) throw ParseError("row has too few columns", lineno);
  }
  return out;
}

double sliding_window_stddev(std::span<const double> values, std::size_t window) {
  if (values.empty()) throw PreconditionError("sliding_window_stddev: empty series");
  if (window == 0) throw PreconditionError("sliding_window_stddev: window must be positive");
  const std::size_t w = std::min(window, values.size());
  double acc = 0.0;
  std::size_t windows = 0;
  for (std::size_t start = 0; start + w <= values.size(); ++start) {
    double mean = 0.0;
    for (std::size_t i = start; i < start + w; ++i) mean += values[i];
    mean /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t i = start; i < start + w; ++i) var += (values[i] - mean) * (values[i] - mean);
    acc += std::sqrt(var / static_cast<double>(w));
    ++windows;
  }
  return acc / static_cast<double>(windows);
}

// ---------------------------------------------------------------------------
// Batches

BatchBuilder::BatchBuilder(const std::vector<ItemRecord>& items) : items_(&items) {
  lookup_.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) lookup_.emplace_back(items[i].item_id, i);
  std::sort(lookup_.begin(), lookup_.end());
}

std::size_t BatchBuilder::index_of(ItemId id) const {
  auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(id, std::size_t{0}));
  if (it == lookup_.end() || it->first != id) throw PreconditionError("unknown item id " + std::to_string(id));
  return it->second;
}

const ItemRecord& BatchBuilder::item(ItemId id) const { return (*items_)[index_of(id)]; }

QueryInput BatchBuilder::query(const Interaction& row) const {
  QueryInput q;
  q.tokens = row.query_tokens;
  for (ItemId h : row.history) q.history.emplace_back(item(h).tokens);
  return q;
}

Batch BatchBuilder::build(std::span<const Interaction* const> rows) const {
  Batch b;
  for (const Interaction* r : rows) {
    b.titles.emplace_back(item(r->target).tokens);
    b.queries.push_back(query(*r));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Training loop

std::size_t infer_vocab_size(const std::vector<ItemRecord>& items, std::span<const Interaction> rows) {
  TokenId max_id = -1;
  for (const ItemRecord& it : items) {
    for (TokenId t : it.tokens) max_id = std::max(max_id, t);
  }
  for (const Interaction& r : rows) {
    for (TokenId t : r.query_tokens) max_id = std::max(max_id, t);
  }
  return static_cast<std::size_t>(max_id + 1);
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::vector<Parameter*> params) : cfg_(cfg), params_(std::move(params)) {
    if (cfg_.optimizer == OptimizerKind::kAdamW) {
      for (Parameter* p : params_) {
        m_.emplace_back(p->value.shape(), 0.0);
        v_.emplace_back(p->value.shape(), 0.0);
      }
    }
  }

  void step(std::size_t t, double lr_backbone, double lr_quantizer) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter& p = *params_[k];
      const double lr = p.group == ParamGroup::kQuantizer ? lr_quantizer : lr_backbone;
      if (cfg_.optimizer == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * p.grad[i];
        continue;
      }
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t + 1));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t + 1));
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double gi = p.grad[i];
        m_[k][i] = b1 * m_[k][i] + (1.0 - b1) * gi;
        v_[k][i] = b2 * v_[k][i] + (1.0 - b2) * gi * gi;
        const double update = (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps);
        p.value[i] -= lr * (update + cfg_.weight_decay * p.value[i]);
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
};

double grad_norm(const std::vector<Parameter*>& params) {
  double s = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.values()) s += g * g;
  }
  return std::sqrt(s);
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<ItemRecord>& items,
                  const std::vector<Interaction>& train_set, const StepCallback& on_step) {
  config.validate();
  if (train_set.empty()) throw PreconditionError("train: empty training set");
  if (items.empty()) throw PreconditionError("train: empty item list");
  const std::size_t needed = infer_vocab_size(items, train_set);
  const std::size_t vocab = config.vocab_size == 0 ? needed : config.vocab_size;
  if (vocab < needed) throw ConfigError("vocab_size smaller than the largest token id in the corpus");

  TrainResult result{Model(config.model_config(vocab), config.seed), {}, 0, vocab};
  Model& model = result.model;
  const Tensor base = model.item_embeddings(items);
  model.set_codebooks(kmeans_init(base, config.level_sizes, config.kmeans_iterations, config.seed, config.geometry));

  BatchBuilder builder(items);
  const LossSettings settings = LossSettings::from(config);
  Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  const std::size_t n = train_set.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total = config.max_steps > 0 ? config.max_steps : config.epochs * per_epoch;
  const std::vector<std::size_t> sizes = config.level_sizes;
  std::vector<Parameter*> params = model.all_params();
  const std::vector<Parameter*> encoder = model.item_encoder_params();
  Optimizer optimizer(config, params);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::size_t cursor = n;  // forces a shuffle before the first batch
  std::vector<const Interaction*> rows;
  for (std::size_t step = 0; step < total; ++step) {
    if (cursor >= n) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
      cursor = 0;
    }
    const std::size_t end = std::min(n, cursor + config.batch_size);
    rows.clear();
    for (std::size_t i = cursor; i < end; ++i) rows.push_back(&train_set[order[i]]);
    cursor = end;

    const double tau = anneal_tau(step, total, config.tau_start, config.tau_end);
    const double lr_b = lr_at(step, config.lr_backbone, config.warmup_steps, total);
    const double lr_q = lr_at(step, config.lr_quantizer, config.warmup_steps, total);
    const Batch batch = builder.build(rows);
    const GumbelNoise noise = draw_gumbel_noise(rng, rows.size(), sizes);

    Graph g;
    BatchForward fwd;
    try {
      fwd = forward_batch(g, model, settings, batch, noise, tau);
    } catch (const DegenerateVectorError& e) {
      // once parameters have moved, a degenerate forward pass means the run blew up
      if (step == 0) throw;
      throw DivergenceError(e.what(), step);
    } catch (const PreconditionError& e) {
      if (step == 0) throw;
      throw DivergenceError(e.what(), step);
    }
    if (!std::isfinite(fwd.breakdown.total)) throw DivergenceError("non-finite loss", step);
    model.params().zero_grad();
    g.backward(fwd.total);
    for (const Parameter* p : params) {
      if (!p->grad.all_finite()) throw DivergenceError("non-finite gradient in " + p->name, step);
    }

    TraceRecord rec;
    rec.step = step;
    rec.tau = tau;
    rec.lr = lr_b;
    rec.loss = fwd.breakdown;
    rec.enc_grad_norm = grad_norm(encoder);
    rec.usage.resize(sizes.size());
    for (std::size_t j = 0; j < sizes.size(); ++j) rec.usage[j].assign(sizes[j], 0);
    for (const SemanticId& sid : fwd.quantized.sids) {
      for (std::size_t j = 0; j < sid.size(); ++j) ++rec.usage[j][sid.codes[j]];
    }

    optimizer.step(step, lr_b, lr_q);
    for (const Parameter* p : params) {
      if (!p->value.all_finite()) throw DivergenceError("non-finite parameter " + p->name, step);
    }
    if (on_step) on_step(rec, total);
    result.trace.records.push_back(std::move(rec));
  }
  result.steps = total;
  return result;
}

}  // namespace dgi
