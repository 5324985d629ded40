#include "dgi/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "dgi/errors.hpp"
#include "dgi/sphere.hpp"
#include "dgi/trainer.hpp"

namespace dgi {

// ---------------------------------------------------------------------------
// Index

SidIndex::SidIndex(std::size_t levels, std::size_t dim, Geometry geometry)
    : levels_(levels), dim_(dim), geometry_(geometry), nodes_(1), unit_(std::vector<std::size_t>{0, dim}) {}

void SidIndex::insert(ItemId id, const SemanticId& sid, std::span<const double> embedding) {
  if (sid.size() != levels_) throw PreconditionError("SidIndex: sid length mismatch");
  if (embedding.size() != dim_) throw PreconditionError("SidIndex: embedding dimension mismatch");
  if (rows_.count(id) != 0) throw PreconditionError("SidIndex: duplicate item id " + std::to_string(id));
  const std::vector<double> unit = l2_normalize(embedding);

  std::size_t cur = 0;
  for (std::uint32_t code : sid.codes) {
    auto it = nodes_[cur].children.find(code);
    if (it == nodes_[cur].children.end()) {
      nodes_.emplace_back();
      it = nodes_[cur].children.emplace(code, nodes_.size() - 1).first;
    }
    cur = it->second;
  }
  auto& leaf = nodes_[cur].items;
  leaf.insert(std::upper_bound(leaf.begin(), leaf.end(), id), id);

  rows_.emplace(id, ids_.size());
  ids_.push_back(id);
  sids_.push_back(sid);
  norms_.push_back(norm(embedding));
  std::vector<double>& values = unit_.values();
  values.insert(values.end(), unit.begin(), unit.end());
  unit_ = Tensor(std::vector<std::size_t>{ids_.size(), dim_}, std::move(values));
}

std::optional<std::size_t> SidIndex::find(std::span<const std::uint32_t> prefix) const {
  std::size_t cur = 0;
  for (std::uint32_t code : prefix) {
    auto it = nodes_[cur].children.find(code);
    if (it == nodes_[cur].children.end()) return std::nullopt;
    cur = it->second;
  }
  return cur;
}

const std::vector<ItemId>& SidIndex::items_for(const SemanticId& sid) const {
  static const std::vector<ItemId> kEmpty;
  if (sid.size() != levels_) return kEmpty;
  auto node = find(sid.codes);
  return node ? nodes_[*node].items : kEmpty;
}

std::vector<SemanticId> SidIndex::all_sids() const {
  std::vector<SemanticId> out;
  std::vector<std::uint32_t> path;
  auto walk = [&](auto&& self, std::size_t n) -> void {
    if (path.size() == levels_) {
      out.push_back(SemanticId{path});
      return;
    }
    for (const auto& [code, child] : nodes_[n].children) {
      path.push_back(code);
      self(self, child);
      path.pop_back();
    }
  };
  if (!empty()) walk(walk, 0);
  return out;
}

std::size_t SidIndex::row_of(ItemId id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) throw PreconditionError("SidIndex: unknown item id " + std::to_string(id));
  return it->second;
}

const SemanticId& SidIndex::sid_of(ItemId id) const { return sids_[row_of(id)]; }
std::span<const double> SidIndex::unit_embedding(ItemId id) const { return unit_.row(row_of(id)); }
double SidIndex::raw_norm(ItemId id) const { return norms_[row_of(id)]; }

double SidIndex::stored_norm(std::size_t row) const {
  return geometry_ == Geometry::kCosine ? norm(unit_.row(row)) : norms_.at(row);
}

SidIndex build_index(Model& model, const std::vector<ItemRecord>& items) {
  const Tensor z = model.item_embeddings(items);
  const std::vector<SemanticId> sids = model.quantizer().hard_assign(z);
  SidIndex index(model.levels(), model.dim(), model.config().geometry);
  for (std::size_t i = 0; i < items.size(); ++i) index.insert(items[i].item_id, sids[i], z.row(i));
  return index;
}

// ---------------------------------------------------------------------------
// Beam search

std::vector<double> restricted_log_softmax(std::span<const double> logits, std::span<const std::uint32_t> codes) {
  if (codes.empty()) return {};
  double mx = -INFINITY;
  for (std::uint32_t c : codes) mx = std::max(mx, logits[c]);
  double s = 0.0;
  for (std::uint32_t c : codes) s += std::exp(logits[c] - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out;
  out.reserve(codes.size());
  for (std::uint32_t c : codes) out.push_back(logits[c] - lse);
  return out;
}

Tensor prefix_logits(Model& model, std::span<const double> z_q, const std::vector<std::vector<std::uint32_t>>& prefixes,
                     std::size_t t) {
  const std::size_t rows = prefixes.size(), d = model.dim();
  if (z_q.size() != d) throw PreconditionError("prefix_logits: query dimension mismatch");
  Graph g;
  Tensor q(rows, d);
  for (std::size_t i = 0; i < rows; ++i) std::copy(z_q.begin(), z_q.end(), q.row(i).begin());
  std::vector<Var> priors;
  for (std::size_t j = 0; j + 1 < t; ++j) {
    const Tensor& codebook = model.codebook(j).value;
    Tensor e(rows, d);
    for (std::size_t i = 0; i < rows; ++i) {
      const auto src = codebook.row(prefixes[i].at(j));
      std::copy(src.begin(), src.end(), e.row(i).begin());
    }
    priors.push_back(g.constant(std::move(e)));
  }
  Var h = model.decode_step(g, g.constant(std::move(q)), priors, t);
  return model.level_logits(g, h, t).value();
}

std::vector<ScoredSid> constrained_beam_search(Model& model, std::span<const double> z_q, const SidIndex& index,
                                               std::size_t beam_size) {
  if (beam_size == 0) throw PreconditionError("beam search: beam_size must be at least 1");
  if (index.empty()) throw PreconditionError("beam search: empty index");
  if (index.levels() != model.levels()) throw IncompatibleError("beam search: index and model level counts differ");
  struct Hyp {
    std::vector<std::uint32_t> prefix;
    std::size_t node;
    double score;
  };
  std::vector<Hyp> beam{{{}, 0, 0.0}};
  std::vector<std::vector<std::uint32_t>> prefixes;
  std::vector<std::uint32_t> codes;
  for (std::size_t t = 1; t <= model.levels(); ++t) {
    prefixes.clear();
    for (const Hyp& h : beam) prefixes.push_back(h.prefix);
    const Tensor logits = prefix_logits(model, z_q, prefixes, t);
    std::vector<Hyp> next;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      const auto& children = index.node(beam[i].node).children;
      codes.clear();
      for (const auto& kv : children) codes.push_back(kv.first);
      const std::vector<double> lp = restricted_log_softmax(logits.row(i), codes);
      std::size_t c = 0;
      for (const auto& [code, child] : children) {
        Hyp h{beam[i].prefix, child, beam[i].score + lp[c++]};
        h.prefix.push_back(code);
        next.push_back(std::move(h));
      }
    }
    std::sort(next.begin(), next.end(), [](const Hyp& a, const Hyp& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.prefix < b.prefix;
    });
    if (next.size() > beam_size) next.resize(beam_size);
    beam = std::move(next);
  }
  std::vector<ScoredSid> out;
  out.reserve(beam.size());
  for (Hyp& h : beam) out.push_back(ScoredSid{SemanticId{std::move(h.prefix)}, h.score});
  return out;
}

std::vector<ItemId> rank_candidates(std::span<const ScoredSid> sids, std::span<const double> z_q,
                                    const SidIndex& index, std::size_t k) {
  if (k == 0) throw PreconditionError("rank_candidates: k must be at least 1");
  struct Cand {
    double score, cos;
    ItemId id;
  };
  std::vector<Cand> cands;
  for (const ScoredSid& s : sids) {
    for (ItemId id : index.items_for(s.sid)) cands.push_back({s.score, dot(z_q, index.unit_embedding(id)), id});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.cos != b.cos) return a.cos > b.cos;
    return a.id < b.id;
  });
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < cands.size() && i < k; ++i) out.push_back(cands[i].id);
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

void check_aligned(std::span<const std::vector<ItemId>> ranked, std::span<const ItemId> targets) {
  if (ranked.size() != targets.size()) throw PreconditionError("metrics: ranked lists and targets differ in length");
}

// 1-based rank of the target within the first k entries, or 0.
std::size_t rank_within(const std::vector<ItemId>& list, ItemId target, std::size_t k) {
  for (std::size_t i = 0; i < list.size() && i < k; ++i) {
    if (list[i] == target) return i + 1;
  }
  return 0;
}

}  // namespace

double hitrate_at_k(std::span<const std::vector<ItemId>> ranked, std::span<const ItemId> targets, std::size_t k) {
  check_aligned(ranked, targets);
  if (ranked.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    if (rank_within(ranked[q], targets[q], k) > 0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

double ndcg_at_k(std::span<const std::vector<ItemId>> ranked, std::span<const ItemId> targets, std::size_t k) {
  check_aligned(ranked, targets);
  if (ranked.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    const std::size_t r = rank_within(ranked[q], targets[q], k);
    if (r > 0) total += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return total / static_cast<double>(ranked.size());
}

Metrics compute_metrics(std::span<const std::vector<ItemId>> ranked, std::span<const ItemId> targets) {
  Metrics m;
  m.queries = ranked.size();
  for (std::size_t k : kHitKs) m.hit[k] = hitrate_at_k(ranked, targets, k);
  for (std::size_t k : kNdcgKs) m.ndcg[k] = ndcg_at_k(ranked, targets, k);
  return m;
}

std::vector<std::optional<Metrics>> bucket_report(std::span<const std::vector<ItemId>> ranked,
                                                  std::span<const ItemId> targets,
                                                  const PopularityBucketing& buckets) {
  check_aligned(ranked, targets);
  std::vector<std::vector<std::vector<ItemId>>> lists(buckets.bucket_count);
  std::vector<std::vector<ItemId>> tgts(buckets.bucket_count);
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    const std::size_t b = buckets.bucket_for(targets[q]);
    lists[b].push_back(ranked[q]);
    tgts[b].push_back(targets[q]);
  }
  std::vector<std::optional<Metrics>> out(buckets.bucket_count);
  for (std::size_t b = 0; b < buckets.bucket_count; ++b) {
    if (!lists[b].empty()) out[b] = compute_metrics(lists[b], tgts[b]);
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y, bool* defined) {
  if (x.size() != y.size()) throw PreconditionError("pearson: length mismatch");
  if (defined != nullptr) *defined = false;
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
  if (defined != nullptr) *defined = true;
  return sxy / std::sqrt(sxx * syy);
}

double skewness(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  if (!(m2 > 0.0)) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

HubnessStats hubness_stats(const SidIndex& index, const std::vector<ItemRecord>& items,
                           std::span<const std::vector<ItemId>> ranked, std::size_t k) {
  HubnessStats out;
  out.k = k;
  std::unordered_map<ItemId, double> freq;
  for (const ItemRecord& it : items) freq[it.item_id] = static_cast<double>(it.train_frequency);
  const auto& ids = index.item_ids();
  std::vector<double> f(ids.size()), norms(ids.size());
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = freq.find(ids[i]);
    f[i] = it == freq.end() ? 0.0 : it->second;
    norms[i] = index.raw_norms()[i];
    const double s = index.stored_norm(i);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  out.indexed_norm_spread = ids.empty() ? 0.0 : hi - lo;
  bool defined = false;
  const double r = pearson(f, norms, &defined);
  if (defined) out.freq_norm_corr = r;

  std::unordered_map<ItemId, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = i;
  out.n_k.assign(ids.size(), 0);
  for (const auto& list : ranked) {
    for (std::size_t i = 0; i < list.size() && i < k; ++i) {
      auto it = pos.find(list[i]);
      if (it != pos.end()) ++out.n_k[it->second];
    }
  }
  std::vector<double> nk(out.n_k.begin(), out.n_k.end());
  out.k_occurrence_skewness = skewness(nk);
  return out;
}

std::vector<double> codebook_perplexity(const SidIndex& index, std::span<const std::size_t> level_sizes) {
  std::vector<double> out;
  const double n = static_cast<double>(index.item_count());
  for (std::size_t j = 0; j < level_sizes.size(); ++j) {
    std::vector<std::size_t> counts(level_sizes[j], 0);
    for (const SemanticId& s : index.sids()) ++counts.at(s.codes.at(j));
    double h = 0.0;
    for (std::size_t c : counts) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / n;
      h -= p * std::log(p);
    }
    out.push_back(std::exp(h));
  }
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end evaluation

std::vector<std::vector<ItemId>> retrieve(Model& model, const SidIndex& index, const std::vector<ItemRecord>& items,
                                          std::span<const Interaction> queries, std::size_t beam, std::size_t k) {
  BatchBuilder builder(items);
  std::vector<std::vector<ItemId>> out;
  out.reserve(queries.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < queries.size(); start += kChunk) {
    const std::size_t end = std::min(queries.size(), start + kChunk);
    std::vector<QueryInput> inputs;
    for (std::size_t i = start; i < end; ++i) inputs.push_back(builder.query(queries[i]));
    Graph g;
    const Tensor z_q = model.encode_queries(g, inputs).value();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto scored = constrained_beam_search(model, z_q.row(i), index, beam);
      out.push_back(rank_candidates(scored, z_q.row(i), index, k));
    }
  }
  return out;
}

EvalReport evaluate(Model& model, const SidIndex& index, const std::vector<ItemRecord>& items,
                    std::span<const Interaction> queries, const std::vector<Interaction>& train, std::size_t beam) {
  EvalReport report;
  report.beam = beam;
  const auto ranked = retrieve(model, index, items, queries, beam, 20);
  std::vector<ItemId> targets;
  for (const Interaction& q : queries) targets.push_back(q.target);
  report.overall = compute_metrics(ranked, targets);
  report.buckets = bucket_report(ranked, targets, bucket_by_popularity(items, train, 5));
  std::vector<ItemRecord> counted = items;
  count_train_frequency(counted, train);
  report.hubness = hubness_stats(index, counted, ranked, 10);
  report.perplexity = codebook_perplexity(index, model.config().level_sizes);
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using Json = nlohmann::ordered_json;

Json metrics_json(const Metrics& m) {
  Json j;
  j["queries"] = m.queries;
  Json hit = Json::object(), ndcg = Json::object();
  for (const auto& [k, v] : m.hit) hit[std::to_string(k)] = v;
  for (const auto& [k, v] : m.ndcg) ndcg[std::to_string(k)] = v;
  j["hitrate"] = hit;
  j["ndcg"] = ndcg;
  return j;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  Json j;
  j["beam"] = report.beam;
  j["overall"] = metrics_json(report.overall);
  Json buckets = Json::array();
  for (std::size_t b = 0; b < report.buckets.size(); ++b) {
    Json e;
    e["bucket"] = b;
    if (report.buckets[b]) {
      Json m = metrics_json(*report.buckets[b]);
      for (auto it = m.begin(); it != m.end(); ++it) e[it.key()] = it.value();
      e["omitted"] = false;
    } else {
      e["queries"] = 0;
      e["omitted"] = true;
    }
    buckets.push_back(e);
  }
  j["buckets"] = buckets;
  Json hub;
  hub["k"] = report.hubness.k;
  hub["freq_norm_corr"] = report.hubness.freq_norm_corr ? Json(*report.hubness.freq_norm_corr) : Json(nullptr);
  hub["k_occurrence_skewness"] = report.hubness.k_occurrence_skewness;
  hub["indexed_norm_spread"] = report.hubness.indexed_norm_spread;
  j["hubness"] = hub;
  j["codebook_perplexity"] = report.perplexity;
  return j.dump(2) + "\n";
}

void write_bucket_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "bucket,hit@10,ndcg@10,hit@1,hit@5,hit@20,ndcg@5,ndcg@20,queries\n";
  for (std::size_t b = 0; b < report.buckets.size(); ++b) {
    out << b;
    if (!report.buckets[b]) {
      out << ",NA,NA,NA,NA,NA,NA,NA,0\n";
      continue;
    }
    const Metrics& m = *report.buckets[b];
    out << ',' << fmt(m.hit.at(10)) << ',' << fmt(m.ndcg.at(10)) << ',' << fmt(m.hit.at(1)) << ','
        << fmt(m.hit.at(5)) << ',' << fmt(m.hit.at(20)) << ',' << fmt(m.ndcg.at(5)) << ',' << fmt(m.ndcg.at(20))
        << ',' << m.queries << '\n';
  }
}

void write_hubness_csv(const SidIndex& index, const std::vector<ItemRecord>& items, const HubnessStats& stats,
                       const std::string& path) {
  std::unordered_map<ItemId, std::int64_t> freq;
  for (const ItemRecord& it : items) freq[it.item_id] = it.train_frequency;
  std::ofstream out = open_out(path);
  out << "item_id,freq,norm,n_k\n";
  const auto& ids = index.item_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ',' << freq[ids[i]] << ',' << fmt(index.raw_norms()[i]) << ','
        << (i < stats.n_k.size() ? stats.n_k[i] : 0) << '\n';
  }
}

void export_embeddings(Model& model, const std::vector<ItemRecord>& items, const std::string& path) {
  const Tensor z = model.item_embeddings(items);
  const std::vector<SemanticId> sids = model.quantizer().hard_assign(z);
  const bool cosine = model.config().geometry == Geometry::kCosine;
  std::ofstream out = open_out(path);
  out << "item_id,sid,norm,raw_norm";
  for (std::size_t c = 0; c < model.dim(); ++c) out << ",v" << c;
  out << '\n';
  for (std::size_t i = 0; i < items.size(); ++i) {
    const double raw = norm(z.row(i));
    std::vector<double> v(z.row(i).begin(), z.row(i).end());
    if (cosine) v = l2_normalize(v);
    out << items[i].item_id << ',' << sids[i].to_string() << ',' << fmt(norm(v)) << ',' << fmt(raw);
    for (double x : v) out << ',' << fmt(x);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace dgi
