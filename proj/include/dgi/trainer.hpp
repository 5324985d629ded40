#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dgi/corpus.hpp"
#include "dgi/model.hpp"
#include "dgi/objective.hpp"
#include "dgi/quantizer.hpp"
#include "dgi/variants.hpp"

namespace dgi {

enum class OptimizerKind { kSgd, kAdamW };

std::string to_string(OptimizerKind o);
OptimizerKind parse_optimizer(const std::string& s);

struct TrainConfig {
  // Model shape. vocab_size 0 means "infer from the item titles".
  std::size_t vocab_size = 0;
  std::size_t dim = 64;
  std::size_t hidden = 64;
  std::size_t decoder_hidden = 64;
  std::vector<std::size_t> level_sizes{64, 32, 16};
  double gamma_init = 30.0;

  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  std::size_t max_steps = 0;  // 0 = epochs * batches_per_epoch
  double lr_backbone = 5e-3;
  double lr_quantizer = 5e-2;
  std::size_t warmup_steps = 1000;
  double tau_start = 1.0;
  double tau_end = 0.1;
  double tau_cl = 0.07;
  double beta = 0.25;
  double eps = 1e-10;
  LossWeights weights;

  GradientPath gradient_path = GradientPath::kSoft;
  Geometry geometry = Geometry::kCosine;
  WeightSharing weight_sharing = WeightSharing::kShared;
  bool diversity = true;

  OptimizerKind optimizer = OptimizerKind::kSgd;
  double weight_decay = 0.01;  // AdamW only
  std::size_t kmeans_iterations = 25;
  std::uint64_t seed = 1;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
  ModelConfig model_config(std::size_t vocab) const;
};

/// Loss settings shared by the trainer and by gradient checks.
struct LossSettings {
  GradientPath gradient_path = GradientPath::kSoft;
  double tau_cl = 0.07;
  double beta = 0.25;
  double eps = 1e-10;
  bool diversity = true;
  LossWeights weights;

  static LossSettings from(const TrainConfig& cfg);
  /// Weights with the diversity term zeroed when it is switched off.
  LossWeights effective_weights() const;
};

/// One mini-batch: target item titles aligned with query inputs.
struct Batch {
  std::vector<std::span<const TokenId>> titles;
  std::vector<QueryInput> queries;
};

struct BatchForward {
  LossTerms terms;
  Var total;
  LossBreakdown breakdown;
  QuantizeResult quantized;
  Var z_base;
  Var z_q;
};

/// Builds the full training loss for one batch on `g`.
BatchForward forward_batch(Graph& g, Model& model, const LossSettings& settings, const Batch& batch,
                           const GumbelNoise& noise, double tau);

struct TraceRecord {
  std::size_t step = 0;
  double tau = 0.0;
  double lr = 0.0;  // backbone group; quantizer group is a fixed multiple
  LossBreakdown loss;
  double enc_grad_norm = 0.0;
  std::vector<std::vector<std::uint32_t>> usage;  // per level, per code: batch SID counts
};

struct TrainTrace {
  std::vector<TraceRecord> records;
};

inline constexpr const char* kTraceHeader = "step,tau,lr,ntp,global,local,infonce,div,total,enc_grad_norm";

void write_trace_csv(const TrainTrace& trace, std::ostream& out);
void save_trace_csv(const TrainTrace& trace, const std::string& path);
/// Reads the enc_grad_norm column of a trace CSV.
std::vector<double> load_trace_grad_norms(const std::string& path);

/// Mean over all full windows of the population standard deviation of the
/// values inside each window (a stride-1 sliding window).
double sliding_window_stddev(std::span<const double> values, std::size_t window = 100);

/// Resolves item ids to titles and builds query inputs for interactions.
class BatchBuilder {
 public:
  explicit BatchBuilder(const std::vector<ItemRecord>& items);
  Batch build(std::span<const Interaction* const> rows) const;
  QueryInput query(const Interaction& row) const;
  const ItemRecord& item(ItemId id) const;
  std::size_t index_of(ItemId id) const;

 private:
  const std::vector<ItemRecord>* items_;
  std::vector<std::pair<ItemId, std::size_t>> lookup_;  // sorted by id
};

struct TrainResult {
  Model model;
  TrainTrace trace;
  std::size_t steps = 0;
  std::size_t vocab_size = 0;
};

using StepCallback = std::function<void(const TraceRecord&, std::size_t total_steps)>;

/// Infers the vocabulary size from item titles and query tokens (max token id + 1).
std::size_t infer_vocab_size(const std::vector<ItemRecord>& items, std::span<const Interaction> rows = {});

/// Full training run: K-means codebook init, then mini-batch descent with
/// annealed temperature and per-group learning rates. Throws DivergenceError
/// on a non-finite loss or gradient.
TrainResult train(const TrainConfig& config, const std::vector<ItemRecord>& items,
                  const std::vector<Interaction>& train_set, const StepCallback& on_step = {});

}  // namespace dgi
