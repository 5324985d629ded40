#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgi/corpus.hpp"
#include "dgi/model.hpp"
#include "dgi/quantizer.hpp"
#include "dgi/tensor.hpp"

namespace dgi {

/// Trie over the SIDs present in a corpus plus a cache of unit-norm item
/// embeddings for fine-grained tie ranking.
class SidIndex {
 public:
  struct Node {
    std::map<std::uint32_t, std::size_t> children;  // code -> node, ascending codes
    std::vector<ItemId> items;                      // leaves only, ascending ids
  };

  SidIndex(std::size_t levels, std::size_t dim, Geometry geometry);

  /// Adds an item; `embedding` is the raw z_base row. Throws on duplicate ids
  /// and DegenerateVectorError on a zero embedding.
  void insert(ItemId id, const SemanticId& sid, std::span<const double> embedding);

  std::size_t levels() const noexcept { return levels_; }
  Geometry geometry() const noexcept { return geometry_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t item_count() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const Node& root() const { return nodes_.front(); }
  /// Node reached by a full or partial code prefix, or nullopt.
  std::optional<std::size_t> find(std::span<const std::uint32_t> prefix) const;
  /// Items stored under a complete SID (empty if absent).
  const std::vector<ItemId>& items_for(const SemanticId& sid) const;
  /// Every complete SID in lexicographic order.
  std::vector<SemanticId> all_sids() const;

  const std::vector<ItemId>& item_ids() const noexcept { return ids_; }
  const SemanticId& sid_of(ItemId id) const;
  std::span<const double> unit_embedding(ItemId id) const;
  double raw_norm(ItemId id) const;
  const Tensor& unit_embeddings() const noexcept { return unit_; }
  const std::vector<double>& raw_norms() const noexcept { return norms_; }
  const std::vector<SemanticId>& sids() const noexcept { return sids_; }
  /// Norm of the vector the index stores for an item: the unit embedding
  /// under cosine geometry, the raw embedding under dot geometry.
  double stored_norm(std::size_t row) const;

 private:
  std::size_t row_of(ItemId id) const;

  std::size_t levels_;
  std::size_t dim_;
  Geometry geometry_;
  std::vector<Node> nodes_;
  std::vector<ItemId> ids_;
  std::vector<SemanticId> sids_;
  std::vector<double> norms_;
  Tensor unit_;
  std::unordered_map<ItemId, std::size_t> rows_;
};

/// Hard-assigns every item through the model's quantizer and indexes it.
SidIndex build_index(Model& model, const std::vector<ItemRecord>& items);

struct ScoredSid {
  SemanticId sid;
  double score = 0.0;  // sum of restricted log-softmax values
};

/// Restricted log-softmax over the given columns of a logit row, in the
/// order given. Max-subtracted log-sum-exp accumulated left to right.
std::vector<double> restricted_log_softmax(std::span<const double> logits, std::span<const std::uint32_t> codes);

/// Level-t logit rows (1-based) for a batch of code prefixes of length t-1,
/// each conditioned on the hard code embeddings of its prefix.
Tensor prefix_logits(Model& model, std::span<const double> z_q, const std::vector<std::vector<std::uint32_t>>& prefixes,
                     std::size_t t);

/// Trie-constrained beam search. Returns surviving complete SIDs ordered by
/// score descending, then SID ascending. `z_q` is one unit query row.
std::vector<ScoredSid> constrained_beam_search(Model& model, std::span<const double> z_q, const SidIndex& index,
                                               std::size_t beam_size);

/// Expands SIDs to items ordered by (beam score desc, cosine to z_q desc,
/// item id asc) and truncates to k.
std::vector<ItemId> rank_candidates(std::span<const ScoredSid> sids, std::span<const double> z_q,
                                    const SidIndex& index, std::size_t k);

/// Fraction of queries whose target is within the first k entries.
double hitrate_at_k(std::span<const std::vector<ItemId>> ranked, std::span<const ItemId> targets, std::size_t k);
/// Mean of 1/log2(rank+1) for targets ranked within k, else 0.
double ndcg_at_k(std::span<const std::vector<ItemId>> ranked, std::span<const ItemId> targets, std::size_t k);

inline constexpr std::size_t kHitKs[] = {1, 5, 10, 20};
inline constexpr std::size_t kNdcgKs[] = {5, 10, 20};

struct Metrics {
  std::size_t queries = 0;
  std::map<std::size_t, double> hit;   // keyed by K
  std::map<std::size_t, double> ndcg;  // keyed by K
};

Metrics compute_metrics(std::span<const std::vector<ItemId>> ranked, std::span<const ItemId> targets);

/// Per-bucket metrics restricted to queries whose target lies in the bucket.
/// Buckets without queries are nullopt.
std::vector<std::optional<Metrics>> bucket_report(std::span<const std::vector<ItemId>> ranked,
                                                  std::span<const ItemId> targets,
                                                  const PopularityBucketing& buckets);

struct HubnessStats {
  std::size_t k = 10;
  std::optional<double> freq_norm_corr;  // undefined when either side has zero variance
  double k_occurrence_skewness = 0.0;
  double indexed_norm_spread = 0.0;      // max - min of SidIndex::stored_norm
  std::vector<std::size_t> n_k;          // per indexed item, aligned with index.item_ids()
};

double pearson(std::span<const double> x, std::span<const double> y, bool* defined = nullptr);
/// Population skewness; 0 when the variance is 0.
double skewness(std::span<const double> x);

/// `ranked` are the retrieval lists of the query sample; frequencies come
/// from `items` (train_frequency), norms from the raw item embeddings.
HubnessStats hubness_stats(const SidIndex& index, const std::vector<ItemRecord>& items,
                           std::span<const std::vector<ItemId>> ranked, std::size_t k = 10);

/// exp(entropy) of the code usage of the indexed items, per level.
std::vector<double> codebook_perplexity(const SidIndex& index, std::span<const std::size_t> level_sizes);

struct EvalReport {
  std::size_t beam = 20;
  Metrics overall;
  std::vector<std::optional<Metrics>> buckets;
  HubnessStats hubness;
  std::vector<double> perplexity;
};

/// Encodes every interaction's query and runs beam search + ranking.
std::vector<std::vector<ItemId>> retrieve(Model& model, const SidIndex& index, const std::vector<ItemRecord>& items,
                                          std::span<const Interaction> queries, std::size_t beam, std::size_t k = 20);

/// Full evaluation: metrics, popularity buckets (computed from `train`),
/// hubness over the evaluated queries, codebook perplexity.
EvalReport evaluate(Model& model, const SidIndex& index, const std::vector<ItemRecord>& items,
                    std::span<const Interaction> queries, const std::vector<Interaction>& train, std::size_t beam);

std::string report_to_json(const EvalReport& report);
void write_bucket_csv(const EvalReport& report, const std::string& path);
void write_hubness_csv(const SidIndex& index, const std::vector<ItemRecord>& items, const HubnessStats& stats,
                       const std::string& path);
/// item_id,sid,norm,raw_norm,v0..v{d-1}: the stored vector (unit under
/// cosine geometry, raw z_base under dot), its norm, and the raw z_base norm.
void export_embeddings(Model& model, const std::vector<ItemRecord>& items, const std::string& path);

}  // namespace dgi
