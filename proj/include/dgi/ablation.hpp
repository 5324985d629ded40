#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dgi/corpus.hpp"
#include "dgi/retrieval.hpp"
#include "dgi/trainer.hpp"

namespace dgi {

struct Variant {
  std::string name;
  std::string label;
  void (*apply)(TrainConfig&);
};

/// full, the five component ablations, plus the STE and diversity-off
/// variants used by the gradient-stability and codebook-usage comparisons.
const std::vector<Variant>& ablation_variants();
const Variant& find_variant(const std::string& name);

struct VariantResult {
  std::string variant;
  std::uint64_t seed = 0;
  Metrics test;
  std::optional<double> tail_hit10;  // last popularity bucket
  double grad_stability = 0.0;       // sliding-window stddev of the encoder grad norm
  double perplexity = 0.0;           // mean codebook perplexity over levels
  std::optional<double> freq_norm_corr;
  double indexed_norm_spread = 0.0;
};

/// Trains `base` modified by the variant and evaluates it on `test`.
VariantResult run_variant(const Variant& variant, TrainConfig base, std::uint64_t seed,
                          const std::vector<ItemRecord>& items, const Split& split, std::size_t beam);

struct Comparison {
  std::string name;
  std::string description;
  std::string variant;                 // compared against "full"
  std::vector<bool> holds;             // per seed
  bool majority() const;
};

/// Direction checks of the full model against the ablations. Missing
/// variants are skipped.
std::vector<Comparison> compare_variants(const std::vector<VariantResult>& results);

struct AblationOutcome {
  std::vector<VariantResult> results;
  std::vector<Comparison> comparisons;
};

using VariantCallback = std::function<void(const VariantResult&)>;

AblationOutcome run_ablation(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                             const TrainConfig& base, const std::vector<ItemRecord>& items, const Split& split,
                             std::size_t beam, const VariantCallback& on_result = {});

void write_ablation_csv(const AblationOutcome& outcome, const std::string& path);
void write_verdict_csv(const AblationOutcome& outcome, const std::string& path);

}  // namespace dgi
