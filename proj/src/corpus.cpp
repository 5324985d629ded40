#include "dgi/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "dgi/errors.hpp"
#include "dgi/random.hpp"

namespace dgi {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kQueryTitleTokens = 3;

void validate_params(const CorpusParams& p) {
  if (p.n_items < 2) throw ConfigError("generate_corpus: n_items must be at least 2");
  if (p.vocab_size < 16) throw ConfigError("generate_corpus: vocab_size must be at least 16");
  if (!(p.zipf_exponent > 1.0)) throw ConfigError("generate_corpus: zipf_exponent must exceed 1");
  if (p.n_topics == 0) throw ConfigError("generate_corpus: n_topics must be positive");
  if (p.min_title_length == 0 || p.min_title_length > p.max_title_length) {
    throw ConfigError("generate_corpus: invalid title length range");
  }
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

}  // namespace

Dataset generate_corpus(const CorpusParams& p) {
  validate_params(p);
  Rng rng(p.seed);
  const std::size_t topics = std::max<std::size_t>(1, std::min(p.n_topics, p.vocab_size / 4));
  const std::size_t words_per_topic = p.vocab_size / topics;

  Dataset data;
  data.items.resize(p.n_items);
  std::vector<std::size_t> topic_of(p.n_items);
  for (std::size_t i = 0; i < p.n_items; ++i) {
    const std::size_t topic = uniform_index(rng, topics);
    topic_of[i] = topic;
    std::vector<TokenId> words(words_per_topic);
    std::iota(words.begin(), words.end(), static_cast<TokenId>(topic * words_per_topic));
    const std::size_t max_len = std::min(p.max_title_length, words_per_topic);
    const std::size_t min_len = std::min(p.min_title_length, max_len);
    const std::size_t len = min_len + uniform_index(rng, max_len - min_len + 1);
    // Partial Fisher-Yates: the first `len` entries are a uniform sample.
    for (std::size_t k = 0; k < len; ++k) {
      std::swap(words[k], words[k + uniform_index(rng, words_per_topic - k)]);
    }
    data.items[i].item_id = static_cast<ItemId>(i);
    data.items[i].tokens.assign(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(len));
  }

  // Popularity ranks are a random permutation; weight of rank r is r^-s.
  std::vector<std::size_t> rank(p.n_items);
  std::iota(rank.begin(), rank.end(), 0);
  shuffle(rank, rng);
  std::vector<double> cumulative(p.n_items);
  double total = 0.0;
  for (std::size_t i = 0; i < p.n_items; ++i) {
    total += std::pow(static_cast<double>(rank[i] + 1), -p.zipf_exponent);
    cumulative[i] = total;
  }

  std::vector<std::deque<ItemId>> recent(topics);
  std::int64_t ts = 0;
  data.interactions.reserve(p.n_interactions);
  for (std::size_t n = 0; n < p.n_interactions; ++n) {
    ts += 1 + static_cast<std::int64_t>(uniform_index(rng, 3));
    const double u = uniform01(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t target = std::min<std::size_t>(it - cumulative.begin(), p.n_items - 1);

    Interaction row;
    row.timestamp = ts;
    row.target = static_cast<ItemId>(target);
    std::vector<TokenId> title = data.items[target].tokens;
    shuffle(title, rng);
    const std::size_t take = std::min(kQueryTitleTokens, title.size());
    row.query_tokens.assign(title.begin(), title.begin() + static_cast<std::ptrdiff_t>(take));
    row.query_tokens.push_back(static_cast<TokenId>(uniform_index(rng, p.vocab_size)));

    auto& hist = recent[topic_of[target]];
    row.history.assign(hist.begin(), hist.end());
    hist.push_back(row.target);
    if (hist.size() > kMaxHistory) hist.pop_front();
    data.interactions.push_back(std::move(row));
  }
  return data;
}

Split time_split(std::vector<Interaction> interactions, double train_fraction) {
  if (interactions.empty()) throw PreconditionError("time_split: no interactions");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("time_split: train_fraction must lie in (0, 1)");
  }
  std::stable_sort(interactions.begin(), interactions.end(),
                   [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
  const auto cut = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(interactions.size())));
  Split split;
  split.train.assign(std::make_move_iterator(interactions.begin()),
                     std::make_move_iterator(interactions.begin() + static_cast<std::ptrdiff_t>(cut)));
  split.test.assign(std::make_move_iterator(interactions.begin() + static_cast<std::ptrdiff_t>(cut)),
                    std::make_move_iterator(interactions.end()));
  return split;
}

void count_train_frequency(std::vector<ItemRecord>& items, const std::vector<Interaction>& train) {
  std::unordered_map<ItemId, std::size_t> pos;
  for (std::size_t i = 0; i < items.size(); ++i) {
    pos[items[i].item_id] = i;
    items[i].train_frequency = 0;
  }
  for (const auto& row : train) {
    if (auto it = pos.find(row.target); it != pos.end()) ++items[it->second].train_frequency;
  }
}

std::size_t PopularityBucketing::bucket_for(ItemId id) const {
  for (std::size_t i = 0; i < item_ids.size(); ++i) {
    if (item_ids[i] == id) return bucket_of[i];
  }
  throw PreconditionError("bucket_for: unknown item " + std::to_string(id));
}

PopularityBucketing bucket_by_popularity(const std::vector<ItemRecord>& items,
                                         const std::vector<Interaction>& train,
                                         std::size_t n_buckets) {
  if (n_buckets < 2) throw ConfigError("bucket_by_popularity: need at least 2 buckets");
  if (items.size() < n_buckets) throw PreconditionError("bucket_by_popularity: fewer items than buckets");
  std::vector<ItemRecord> counted = items;
  count_train_frequency(counted, train);

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (counted[a].train_frequency != counted[b].train_frequency) {
      return counted[a].train_frequency > counted[b].train_frequency;
    }
    return counted[a].item_id < counted[b].item_id;
  });

  PopularityBucketing out;
  out.bucket_count = n_buckets;
  out.bucket_of.resize(items.size());
  out.item_ids.resize(items.size());
  const std::size_t n = items.size();
  for (std::size_t k = 0; k < n; ++k) {
    out.bucket_of[order[k]] = k * n_buckets / n;
  }
  for (std::size_t i = 0; i < n; ++i) out.item_ids[i] = items[i].item_id;
  return out;
}

void validate_dataset(const Dataset& data, std::size_t vocab_size) {
  std::unordered_set<ItemId> ids;
  for (const auto& item : data.items) {
    if (!ids.insert(item.item_id).second) {
      throw ConfigError("duplicate item_id " + std::to_string(item.item_id));
    }
    if (item.tokens.empty()) throw ConfigError("item " + std::to_string(item.item_id) + " has no tokens");
    for (TokenId t : item.tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
        throw ConfigError("item " + std::to_string(item.item_id) + " has out-of-vocabulary token");
      }
    }
  }
  for (const auto& row : data.interactions) {
    if (!ids.contains(row.target)) throw ConfigError("interaction targets unknown item");
    if (row.history.size() > kMaxHistory) throw ConfigError("history longer than 10 items");
    for (ItemId h : row.history) {
      if (!ids.contains(h)) throw ConfigError("history references unknown item");
    }
    for (TokenId t : row.query_tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
        throw ConfigError("query has out-of-vocabulary token");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// JSON lines

namespace {

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
      fn(j);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.filename().string() + ": " + e.what(), number);
    }
  }
}

void write_lines(const std::filesystem::path& path, const std::vector<ordered_json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& j : rows) out << j.dump() << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

void save_items(const std::filesystem::path& path, const std::vector<ItemRecord>& items) {
  std::vector<ordered_json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) {
    ordered_json j;
    j["item_id"] = item.item_id;
    j["tokens"] = item.tokens;
    rows.push_back(std::move(j));
  }
  write_lines(path, rows);
}

void save_interactions(const std::filesystem::path& path, const std::vector<Interaction>& interactions) {
  std::vector<ordered_json> rows;
  rows.reserve(interactions.size());
  for (const auto& r : interactions) {
    ordered_json j;
    j["ts"] = r.timestamp;
    j["query"] = r.query_tokens;
    j["history"] = r.history;
    j["target"] = r.target;
    rows.push_back(std::move(j));
  }
  write_lines(path, rows);
}

std::vector<ItemRecord> load_items(const std::filesystem::path& path) {
  std::vector<ItemRecord> items;
  for_each_line(path, [&](const ordered_json& j) {
    ItemRecord item;
    item.item_id = j.at("item_id").get<ItemId>();
    item.tokens = j.at("tokens").get<std::vector<TokenId>>();
    items.push_back(std::move(item));
  });
  return items;
}

std::vector<Interaction> load_interactions(const std::filesystem::path& path) {
  std::vector<Interaction> rows;
  for_each_line(path, [&](const ordered_json& j) {
    Interaction r;
    r.timestamp = j.at("ts").get<std::int64_t>();
    r.query_tokens = j.at("query").get<std::vector<TokenId>>();
    r.history = j.at("history").get<std::vector<ItemId>>();
    r.target = j.at("target").get<ItemId>();
    rows.push_back(std::move(r));
  });
  return rows;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  save_items(dir / "items.jsonl", data.items);
  save_interactions(dir / "interactions.jsonl", data.interactions);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset data;
  data.items = load_items(dir / "items.jsonl");
  data.interactions = load_interactions(dir / "interactions.jsonl");
  return data;
}

}  // namespace dgi
