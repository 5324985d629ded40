#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dgi/autograd.hpp"
#include "dgi/quantizer.hpp"

namespace dgi {

struct LossWeights {
  double ntp = 1.0;
  double global = 1.0;
  double local = 1.0;
  double infonce = 1.0;
  double diversity = 1.0;
};

/// Scalar values of each term after a forward pass.
struct LossBreakdown {
  double ntp = 0.0;
  double global_recon = 0.0;
  double local_codebook = 0.0;
  double infonce = 0.0;
  double diversity = 0.0;
  double total = 0.0;
  std::size_t global_skipped = 0;  // rows with a degenerate soft-vector sum
};

/// Graph nodes for each term, so callers can backpropagate any of them.
struct LossTerms {
  Var ntp;
  Var global_recon;
  Var local_codebook;
  Var infonce;
  Var diversity;
};

/// Batch mean of sum_t -log softmax(logits_t)[sid_t].
Var ntp_loss(std::span<const Var> level_logits, std::span<const SemanticId> targets);

/// Batch mean of 1 - cos(z_base, sum_j z~_j). Rows whose sum (or z_base)
/// has norm below 1e-12 are skipped and counted in *skipped.
Var global_recon_loss(Var z_base, std::span<const Var> soft_vectors, std::size_t* skipped = nullptr);

/// Batch mean of sum_j ||sg(r_{j-1}) - e_{j,k}||^2 + beta ||r_{j-1} - sg(e_{j,k})||^2
/// where k = selected[j][row]. `inputs[j]` is the level-j input residual.
Var local_codebook_loss(std::span<const Var> inputs, std::span<const Var> codebooks,
                        const std::vector<std::vector<std::size_t>>& selected, double beta);

/// In-batch contrastive loss between aligned query and item rows.
Var infonce_loss(Var queries, Var items, double tau_cl);

/// sum_j sum_k pbar_{j,k} log(pbar_{j,k} + eps), pbar the batch-mean usage.
Var diversity_loss(std::span<const Var> level_probs, double eps);

/// Weighted sum of the terms. Throws ConfigError for a negative weight.
Var total_loss(const LossTerms& terms, const LossWeights& weights);
double total_loss(const LossBreakdown& terms, const LossWeights& weights);

/// tau_start * (tau_end / tau_start)^(step / total_steps).
double anneal_tau(std::size_t step, std::size_t total_steps, double tau_start, double tau_end);

/// Linear warmup to base_lr over warmup_steps, then linear decay to 0 at
/// total_steps.
double lr_at(std::size_t step, double base_lr, std::size_t warmup_steps, std::size_t total_steps);

}  // namespace dgi
