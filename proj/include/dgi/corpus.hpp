#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dgi {

using TokenId = std::int32_t;
using ItemId = std::int64_t;

inline constexpr std::size_t kMaxHistory = 10;

struct ItemRecord {
  ItemId item_id = 0;
  std::vector<TokenId> tokens;
  std::int64_t train_frequency = 0;

  friend bool operator==(const ItemRecord&, const ItemRecord&) = default;
};

struct Interaction {
  std::int64_t timestamp = 0;
  std::vector<TokenId> query_tokens;
  std::vector<ItemId> history;  // oldest first, at most kMaxHistory
  ItemId target = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct Dataset {
  std::vector<ItemRecord> items;  // items[i].item_id == i for generated corpora
  std::vector<Interaction> interactions;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct CorpusParams {
  std::size_t n_items = 1000;
  std::size_t vocab_size = 500;
  std::size_t n_interactions = 20000;
  double zipf_exponent = 1.1;
  std::uint64_t seed = 7;
  std::size_t n_topics = 20;
  std::size_t min_title_length = 4;
  std::size_t max_title_length = 8;
};

/// Synthetic topic-model corpus with Zipf-distributed item popularity.
Dataset generate_corpus(const CorpusParams& params);

struct Split {
  std::vector<Interaction> train;
  std::vector<Interaction> test;
};

/// Chronological split: the first floor(fraction * N) interactions by
/// timestamp (stable for equal timestamps) form the training set.
Split time_split(std::vector<Interaction> interactions, double train_fraction);

/// Recomputes ItemRecord::train_frequency from the training interactions.
void count_train_frequency(std::vector<ItemRecord>& items, const std::vector<Interaction>& train);

struct PopularityBucketing {
  std::size_t bucket_count = 5;
  std::vector<std::size_t> bucket_of;  // indexed by position in the item list
  std::vector<ItemId> item_ids;

  std::size_t bucket_for(ItemId id) const;
};

/// Items sorted by descending training frequency (ties by ascending id),
/// split into equal-count groups. Bucket 0 holds the head.
PopularityBucketing bucket_by_popularity(const std::vector<ItemRecord>& items,
                                         const std::vector<Interaction>& train,
                                         std::size_t n_buckets = 5);

/// Checks ids are unique, tokens in range and interactions reference known items.
void validate_dataset(const Dataset& data, std::size_t vocab_size);

// JSON-lines persistence. Item lines: {"item_id", "tokens"}; interaction
// lines: {"ts", "query", "history", "target"}.
void save_items(const std::filesystem::path& path, const std::vector<ItemRecord>& items);
void save_interactions(const std::filesystem::path& path, const std::vector<Interaction>& rows);
std::vector<ItemRecord> load_items(const std::filesystem::path& path);
std::vector<Interaction> load_interactions(const std::filesystem::path& path);

/// Writes items.jsonl and interactions.jsonl under `dir`.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace dgi
