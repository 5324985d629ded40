#include "dgi/ablation.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "dgi/errors.hpp"

namespace dgi {

const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> kVariants = {
      {"full", "Full model", [](TrainConfig&) {}},
      {"no_soft_gradient", "w/o Soft Gradient Flow",
       [](TrainConfig& c) { c.gradient_path = GradientPath::kDetached; }},
      {"no_weight_sharing", "w/o Weight Sharing",
       [](TrainConfig& c) { c.weight_sharing = WeightSharing::kSeparate; }},
      {"fully_decoupled", "w/o Both (Fully Decoupled)",
       [](TrainConfig& c) {
         c.gradient_path = GradientPath::kDetached;
         c.weight_sharing = WeightSharing::kSeparate;
       }},
      {"no_scaled_cosine", "w/o Scaled Cosine", [](TrainConfig& c) { c.geometry = Geometry::kDot; }},
      {"no_components", "w/o All Components",
       [](TrainConfig& c) {
         c.gradient_path = GradientPath::kDetached;
         c.weight_sharing = WeightSharing::kSeparate;
         c.geometry = Geometry::kDot;
       }},
      {"ste", "Straight-through estimator", [](TrainConfig& c) { c.gradient_path = GradientPath::kSte; }},
      {"diversity_off", "w/o Diversity loss", [](TrainConfig& c) { c.diversity = false; }},
  };
  return kVariants;
}

const Variant& find_variant(const std::string& name) {
  for (const Variant& v : ablation_variants()) {
    if (v.name == name) return v;
  }
  throw ConfigError("unknown ablation variant: " + name);
}

VariantResult run_variant(const Variant& variant, TrainConfig base, std::uint64_t seed,
                          const std::vector<ItemRecord>& items, const Split& split, std::size_t beam) {
  variant.apply(base);
  base.seed = seed;
  TrainResult trained = train(base, items, split.train);
  const SidIndex index = build_index(trained.model, items);
  const EvalReport report = evaluate(trained.model, index, items, split.test, split.train, beam);

  VariantResult out;
  out.variant = variant.name;
  out.seed = seed;
  out.test = report.overall;
  if (!report.buckets.empty() && report.buckets.back()) out.tail_hit10 = report.buckets.back()->hit.at(10);
  std::vector<double> norms;
  for (const TraceRecord& r : trained.trace.records) norms.push_back(r.enc_grad_norm);
  out.grad_stability = sliding_window_stddev(norms, 100);
  double p = 0.0;
  for (double v : report.perplexity) p += v;
  out.perplexity = p / static_cast<double>(report.perplexity.size());
  out.freq_norm_corr = report.hubness.freq_norm_corr;
  out.indexed_norm_spread = report.hubness.indexed_norm_spread;
  return out;
}

bool Comparison::majority() const {
  std::size_t yes = 0;
  for (bool h : holds) yes += h ? 1 : 0;
  return !holds.empty() && 2 * yes > holds.size();
}

std::vector<Comparison> compare_variants(const std::vector<VariantResult>& results) {
  std::map<std::pair<std::string, std::uint64_t>, const VariantResult*> by_key;
  std::vector<std::uint64_t> seeds;
  for (const VariantResult& r : results) {
    by_key[{r.variant, r.seed}] = &r;
    if (r.variant == "full") seeds.push_back(r.seed);
  }
  struct Spec {
    const char* name;
    const char* description;
    const char* variant;
    bool (*holds)(const VariantResult& full, const VariantResult& other);
  };
  static const Spec kSpecs[] = {
      {"full_vs_dot_hit10", "full test H@10 > no_scaled_cosine", "no_scaled_cosine",
       [](const VariantResult& f, const VariantResult& o) { return f.test.hit.at(10) > o.test.hit.at(10); }},
      {"soft_vs_ste_stability", "full grad-norm window stddev < ste", "ste",
       [](const VariantResult& f, const VariantResult& o) { return f.grad_stability < o.grad_stability; }},
      {"diversity_perplexity", "full codebook perplexity > diversity_off", "diversity_off",
       [](const VariantResult& f, const VariantResult& o) { return f.perplexity > o.perplexity; }},
      {"tail_cosine_vs_dot", "full tail-bucket H@10 >= no_scaled_cosine", "no_scaled_cosine",
       [](const VariantResult& f, const VariantResult& o) {
         return f.tail_hit10.value_or(0.0) >= o.tail_hit10.value_or(0.0);
       }},
      {"full_vs_decoupled_hit10", "full test H@10 > fully_decoupled", "fully_decoupled",
       [](const VariantResult& f, const VariantResult& o) { return f.test.hit.at(10) > o.test.hit.at(10); }},
      {"full_vs_no_soft_hit10", "full test H@10 > no_soft_gradient", "no_soft_gradient",
       [](const VariantResult& f, const VariantResult& o) { return f.test.hit.at(10) > o.test.hit.at(10); }},
      {"full_vs_no_sharing_hit10", "full test H@10 > no_weight_sharing", "no_weight_sharing",
       [](const VariantResult& f, const VariantResult& o) { return f.test.hit.at(10) > o.test.hit.at(10); }},
      {"full_vs_no_components_hit10", "full test H@10 > no_components", "no_components",
       [](const VariantResult& f, const VariantResult& o) { return f.test.hit.at(10) > o.test.hit.at(10); }},
  };
  std::vector<Comparison> out;
  for (const Spec& s : kSpecs) {
    Comparison c{s.name, s.description, s.variant, {}};
    for (std::uint64_t seed : seeds) {
      auto f = by_key.find({"full", seed});
      auto o = by_key.find({s.variant, seed});
      if (o == by_key.end()) continue;
      c.holds.push_back(s.holds(*f->second, *o->second));
    }
    if (!c.holds.empty()) out.push_back(std::move(c));
  }
  return out;
}

AblationOutcome run_ablation(const std::vector<std::string>& variants, const std::vector<std::uint64_t>& seeds,
                             const TrainConfig& base, const std::vector<ItemRecord>& items, const Split& split,
                             std::size_t beam, const VariantCallback& on_result) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  AblationOutcome out;
  for (const std::string& name : variants) {
    const Variant& v = find_variant(name);
    for (std::uint64_t seed : seeds) {
      out.results.push_back(run_variant(v, base, seed, items, split, beam));
      if (on_result) on_result(out.results.back());
    }
  }
  out.comparisons = compare_variants(out.results);
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

}  // namespace

void write_ablation_csv(const AblationOutcome& outcome, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "variant,seed,hit@1,hit@10,ndcg@10,tail_hit@10,grad_stability,perplexity,freq_norm_corr\n";
  for (const VariantResult& r : outcome.results) {
    out << r.variant << ',' << r.seed << ',' << fmt(r.test.hit.at(1)) << ',' << fmt(r.test.hit.at(10)) << ','
        << fmt(r.test.ndcg.at(10)) << ',' << fmt(r.tail_hit10) << ',' << fmt(r.grad_stability) << ','
        << fmt(r.perplexity) << ',' << fmt(r.freq_norm_corr) << '\n';
  }
}

void write_verdict_csv(const AblationOutcome& outcome, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "comparison,description,seeds_holding,seeds_total,majority\n";
  for (const Comparison& c : outcome.comparisons) {
    std::size_t yes = 0;
    for (bool h : c.holds) yes += h ? 1 : 0;
    out << c.name << ',' << c.description << ',' << yes << ',' << c.holds.size() << ','
        << (c.majority() ? "holds" : "fails") << '\n';
  }
}

}  // namespace dgi
