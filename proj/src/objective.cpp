#include "dgi/objective.hpp"

#include <cmath>

#include "dgi/errors.hpp"

namespace dgi {

Var ntp_loss(std::span<const Var> level_logits, std::span<const SemanticId> targets) {
  if (level_logits.empty()) throw PreconditionError("ntp_loss: no levels");
  const std::size_t rows = level_logits[0].rows();
  if (targets.size() != rows) throw PreconditionError("ntp_loss: one target per row required");
  Var acc{};
  for (std::size_t t = 0; t < level_logits.size(); ++t) {
    if (level_logits[t].rows() != rows) throw PreconditionError("ntp_loss: row mismatch across levels");
    std::vector<std::size_t> cols(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      if (targets[i].size() != level_logits.size()) throw PreconditionError("ntp_loss: sid length mismatch");
      cols[i] = targets[i].codes[t];
      if (cols[i] >= level_logits[t].cols()) throw PreconditionError("ntp_loss: code out of range");
    }
    Var nll = sum(pick(log_softmax_rows(level_logits[t]), std::move(cols)));
    acc = t == 0 ? nll : add(acc, nll);
  }
  return scale(acc, -1.0 / static_cast<double>(rows));
}

Var global_recon_loss(Var z_base, std::span<const Var> soft_vectors, std::size_t* skipped) {
  if (soft_vectors.empty()) throw PreconditionError("global_recon_loss: no soft vectors");
  Var total = soft_vectors[0];
  for (std::size_t j = 1; j < soft_vectors.size(); ++j) total = add(total, soft_vectors[j]);
  std::vector<bool> deg_sum, deg_base;
  Var cos = row_dot(normalize_rows_masked(z_base, deg_base), normalize_rows_masked(total, deg_sum));
  std::size_t valid = 0;
  for (std::size_t i = 0; i < deg_sum.size(); ++i) {
    if (!deg_sum[i] && !deg_base[i]) ++valid;
  }
  if (skipped != nullptr) *skipped = deg_sum.size() - valid;
  Graph& g = *z_base.graph;
  if (valid == 0) return g.constant(Tensor::scalar(0.0));
  // Masked rows contribute a zero cosine, so only valid rows enter the sum.
  Var n = g.constant(Tensor::scalar(static_cast<double>(valid)));
  return scale(sub(n, sum(cos)), 1.0 / static_cast<double>(valid));
}

Var local_codebook_loss(std::span<const Var> inputs, std::span<const Var> codebooks,
                        const std::vector<std::vector<std::size_t>>& selected, double beta) {
  if (inputs.empty() || inputs.size() != codebooks.size() || selected.size() != inputs.size()) {
    throw PreconditionError("local_codebook_loss: level count mismatch");
  }
  const std::size_t rows = inputs[0].rows();
  Var acc{};
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    Var e = gather_rows(codebooks[j], selected[j]);
    Var attract = sum(square(sub(detach(inputs[j]), e)));
    Var commit = sum(square(sub(inputs[j], detach(e))));
    Var level = add(attract, scale(commit, beta));
    acc = j == 0 ? level : add(acc, level);
  }
  return scale(acc, 1.0 / static_cast<double>(rows));
}

Var infonce_loss(Var queries, Var items, double tau_cl) {
  if (queries.rows() == 0) throw PreconditionError("infonce_loss: empty batch");
  if (queries.rows() != items.rows()) throw PreconditionError("infonce_loss: batch size mismatch");
  if (!(tau_cl > 0.0)) throw ConfigError("infonce_loss: temperature must be positive");
  const std::size_t rows = queries.rows();
  Var log_p = log_softmax_rows(scale(matmul_nt(queries, items), 1.0 / tau_cl));
  std::vector<std::size_t> diagonal(rows);
  for (std::size_t i = 0; i < rows; ++i) diagonal[i] = i;
  return scale(sum(pick(log_p, std::move(diagonal))), -1.0 / static_cast<double>(rows));
}

Var diversity_loss(std::span<const Var> level_probs, double eps) {
  if (level_probs.empty()) throw PreconditionError("diversity_loss: no levels");
  Var acc{};
  for (std::size_t j = 0; j < level_probs.size(); ++j) {
    Var usage = mean_rows(level_probs[j]);
    Var level = sum(mul(usage, log_eps(usage, eps)));
    acc = j == 0 ? level : add(acc, level);
  }
  return acc;
}

namespace {

void check_weights(const LossWeights& w) {
  for (double v : {w.ntp, w.global, w.local, w.infonce, w.diversity}) {
    if (!(v >= 0.0)) throw ConfigError("loss weights must be nonnegative");
  }
}

}  // namespace

Var total_loss(const LossTerms& terms, const LossWeights& weights) {
  check_weights(weights);
  Var acc = scale(terms.ntp, weights.ntp);
  acc = add(acc, scale(terms.global_recon, weights.global));
  acc = add(acc, scale(terms.local_codebook, weights.local));
  acc = add(acc, scale(terms.infonce, weights.infonce));
  return add(acc, scale(terms.diversity, weights.diversity));
}

double total_loss(const LossBreakdown& terms, const LossWeights& weights) {
  check_weights(weights);
  double acc = terms.ntp * weights.ntp;
  acc += terms.global_recon * weights.global;
  acc += terms.local_codebook * weights.local;
  acc += terms.infonce * weights.infonce;
  return acc + terms.diversity * weights.diversity;
}

double anneal_tau(std::size_t step, std::size_t total_steps, double tau_start, double tau_end) {
  if (!(tau_end > 0.0) || !(tau_start >= tau_end)) throw ConfigError("anneal_tau: need tau_start >= tau_end > 0");
  if (step > total_steps) throw PreconditionError("anneal_tau: step beyond total_steps");
  if (total_steps == 0) return tau_start;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return tau_start * std::pow(tau_end / tau_start, frac);
}

double lr_at(std::size_t step, double base_lr, std::size_t warmup_steps, std::size_t total_steps) {
  if (step >= total_steps) return 0.0;
  if (step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  const double remaining = static_cast<double>(total_steps - step);
  return base_lr * remaining / static_cast<double>(total_steps - warmup_steps);
}

}  // namespace dgi
