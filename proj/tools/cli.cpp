#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dgi/ablation.hpp"
#include "dgi/checkpoint.hpp"
#include "dgi/corpus.hpp"
#include "dgi/errors.hpp"
#include "dgi/manifest.hpp"
#include "dgi/retrieval.hpp"
#include "dgi/trainer.hpp"

namespace dgi::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::string out_root() {
  const char* env = std::getenv("DGI_OUT_ROOT");
  return env != nullptr && *env != '\0' ? env : "runs";
}

std::string resolve_out(const std::string& given, const std::string& command) {
  return given.empty() ? (fs::path(out_root()) / command).string() : given;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ParseError(what + " not found: " + path, 0);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string kebab(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

// Training flags mirror every TrainConfig key. Values are kept as strings and
// converted with the type of the default so flags override a config file
// field by field.
struct TrainFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file (flags override it)");
    const Json defaults = config_to_json(TrainConfig{});
    for (const auto& [key, value] : defaults.items()) {
      std::string help = "default " + value.dump();
      app.add_option("--" + kebab(key), values[key], help);
    }
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file " + config_path);
      Json j;
      try {
        j = Json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
      }
      apply_config_json(cfg, j);
    }
    const Json defaults = config_to_json(TrainConfig{});
    Json overrides = Json::object();
    for (const auto& [key, text] : values) {
      if (text.empty()) continue;
      const Json& like = defaults.at(key);
      try {
        if (like.is_number_unsigned() || like.is_number_integer()) {
          if (text.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument(text);
          overrides[key] = std::stoull(text);
        } else if (like.is_number_float()) {
          std::size_t used = 0;
          overrides[key] = std::stod(text, &used);
          if (used != text.size()) throw std::invalid_argument(text);
        } else if (like.is_array()) {
          std::vector<std::size_t> list;
          std::stringstream ss(text);
          std::string cell;
          while (std::getline(ss, cell, ',')) {
            if (cell.empty() || cell.find_first_not_of("0123456789") != std::string::npos) {
              throw std::invalid_argument(text);
            }
            list.push_back(std::stoull(cell));
          }
          overrides[key] = list;
        } else {
          overrides[key] = text;
        }
      } catch (const std::logic_error&) {
        throw ConfigError("invalid value for --" + kebab(key) + ": " + text);
      }
    }
    apply_config_json(cfg, overrides);
    cfg.validate();
    return cfg;
  }
};

struct DataFiles {
  std::vector<ItemRecord> items;
  std::vector<Interaction> train;
  std::vector<Interaction> test;
};

DataFiles load_data(const std::string& dir, bool need_test) {
  DataFiles d;
  const std::string items = path_in(dir, "items.jsonl"), train = path_in(dir, "train.jsonl"),
                    test = path_in(dir, "test.jsonl");
  require_file(items, "items file");
  require_file(train, "train split");
  d.items = load_items(items);
  d.train = load_interactions(train);
  if (need_test) {
    require_file(test, "test split");
    d.test = load_interactions(test);
  }
  Dataset check{d.items, d.train};
  check.interactions.insert(check.interactions.end(), d.test.begin(), d.test.end());
  try {
    validate_dataset(check, infer_vocab_size(check.items, check.interactions));
  } catch (const ConfigError& e) {
    // inconsistent files are a data problem, not a usage one
    throw ParseError(dir + ": " + e.what(), 0);
  }
  return d;
}

// One-row summary; the per-item table goes to a separate file.
void write_hubness_summary(const HubnessStats& hub, std::size_t queries, const std::string& path) {
  std::ostringstream s;
  char buf[128];
  s << "freq_norm_corr,k_occurrence_skewness,indexed_norm_spread,k,queries\n";
  if (hub.freq_norm_corr) {
    std::snprintf(buf, sizeof buf, "%.17g", *hub.freq_norm_corr);
    s << buf;
  } else {
    s << "NA";
  }
  std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%zu,%zu\n", hub.k_occurrence_skewness, hub.indexed_norm_spread, hub.k,
                queries);
  s << buf;
  write_file_atomic(path, s.str());
}

void log_line(bool quiet, const std::string& s) {
  if (!quiet) std::cerr << s << std::endl;
}

// ---------------------------------------------------------------------------

struct GenCorpusCmd {
  CorpusParams params{};
  double split = 0.8;
  std::string out;

  GenCorpusCmd() { params.n_interactions = 25000; }

  void attach(CLI::App& app) {
    app.add_option("--items", params.n_items, "number of items")->capture_default_str();
    app.add_option("--vocab", params.vocab_size, "vocabulary size")->capture_default_str();
    app.add_option("--interactions", params.n_interactions, "total interactions before the split")
        ->capture_default_str();
    app.add_option("--zipf", params.zipf_exponent, "popularity exponent (> 1)")->capture_default_str();
    app.add_option("--topics", params.n_topics, "latent topics")->capture_default_str();
    app.add_option("--split", split, "chronological train fraction")->capture_default_str();
    app.add_option("--seed", params.seed, "generator seed")->capture_default_str();
    app.add_option("--out", out, "output directory (default $DGI_OUT_ROOT/corpus)");
  }

  int run() {
    const auto t0 = Clock::now();
    const std::string dir = resolve_out(out, "corpus");
    Dataset data = generate_corpus(params);
    Split parts = time_split(data.interactions, split);
    count_train_frequency(data.items, parts.train);
    fs::create_directories(dir);
    const std::string items = path_in(dir, "items.jsonl"), all = path_in(dir, "interactions.jsonl"),
                      train = path_in(dir, "train.jsonl"), test = path_in(dir, "test.jsonl");
    save_items(items, data.items);
    save_interactions(all, data.interactions);
    save_interactions(train, parts.train);
    save_interactions(test, parts.test);

    RunManifest m;
    m.command = "gen-corpus";
    m.config = {{"items", params.n_items},       {"vocab", params.vocab_size}, {"interactions", params.n_interactions},
                {"zipf", params.zipf_exponent},  {"topics", params.n_topics},  {"split", split},
                {"seed", params.seed}};
    m.seed = params.seed;
    m.outputs = {{"items", items}, {"interactions", all}, {"train", train}, {"test", test}};
    m.duration_seconds = seconds_since(t0);
    write_manifest(path_in(dir, "manifest.json"), m);
    std::cout << "wrote " << data.items.size() << " items, " << parts.train.size() << " train / "
              << parts.test.size() << " test interactions to " << dir << "\n";
    return kExitOk;
  }
};

struct TrainCmd {
  TrainFlags flags;
  std::string data;
  std::string out;
  bool quiet = false;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "corpus directory (items.jsonl, train.jsonl)")->required();
    app.add_option("--out", out, "output directory (default $DGI_OUT_ROOT/train)");
    app.add_flag("--quiet", quiet, "no progress output");
    flags.attach(app);
  }

  int run() {
    const auto t0 = Clock::now();
    const TrainConfig cfg = flags.resolve();
    const DataFiles d = load_data(data, false);
    const std::string dir = resolve_out(out, "train");
    fs::create_directories(dir);
    TrainResult r = train(cfg, d.items, d.train, [&](const TraceRecord& rec, std::size_t total) {
      if (rec.step % 200 == 0 || rec.step + 1 == total) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "step %zu/%zu tau %.4f lr %.3g total %.5f ntp %.5f enc_grad %.4f", rec.step,
                      total, rec.tau, rec.lr, rec.loss.total, rec.loss.ntp, rec.enc_grad_norm);
        log_line(quiet, buf);
      }
    });
    const std::string ckpt = path_in(dir, "checkpoint.json"), trace = path_in(dir, "trace.csv");
    save_checkpoint(ckpt, r.model, cfg, r.vocab_size, r.steps);
    save_trace_csv(r.trace, trace);

    RunManifest m;
    m.command = "train";
    m.config = config_to_json(cfg);
    m.config["vocab_size"] = r.vocab_size;
    m.seed = cfg.seed;
    m.inputs = {{"items", path_in(data, "items.jsonl")}, {"train", path_in(data, "train.jsonl")}};
    m.outputs = {{"checkpoint", ckpt}, {"trace", trace}};
    m.duration_seconds = seconds_since(t0);
    write_manifest(path_in(dir, "manifest.json"), m);
    std::cout << "trained " << r.steps << " steps; checkpoint " << ckpt << "\n";
    return kExitOk;
  }
};

Checkpoint load_compatible(const std::string& path, const std::vector<ItemRecord>& items,
                           std::span<const Interaction> rows) {
  require_file(path, "checkpoint");
  Checkpoint ck = load_checkpoint(path);
  const std::size_t needed = infer_vocab_size(items, rows);
  if (needed > ck.vocab_size) {
    throw IncompatibleError("dataset uses token ids up to " + std::to_string(needed - 1) +
                            " but the checkpoint vocabulary has " + std::to_string(ck.vocab_size) + " entries");
  }
  return ck;
}

struct EvalCmd {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::size_t beam = 20;
  std::string out;

  void attach(CLI::App& app) {
    app.add_option("--checkpoint", checkpoint, "checkpoint.json from train")->required();
    app.add_option("--data", data, "corpus directory")->required();
    app.add_option("--split", split, "which split to query")->check(CLI::IsMember({"test", "train"}))
        ->capture_default_str();
    app.add_option("--beam", beam, "beam size")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--out", out, "output directory (default $DGI_OUT_ROOT/eval)");
  }

  int run() {
    const auto t0 = Clock::now();
    const DataFiles d = load_data(data, split == "test");
    const std::vector<Interaction>& queries = split == "test" ? d.test : d.train;
    Checkpoint ck = load_compatible(checkpoint, d.items, queries);
    const std::string dir = resolve_out(out, "eval");
    fs::create_directories(dir);
    const SidIndex index = build_index(ck.model, d.items);
    const EvalReport report = evaluate(ck.model, index, d.items, queries, d.train, beam);
    const std::string rpath = path_in(dir, "report.json"), bpath = path_in(dir, "buckets.csv"),
                      hpath = path_in(dir, "hubness.csv"), spath_h = path_in(dir, "hubness_summary.csv");
    write_file_atomic(rpath, report_to_json(report));
    write_bucket_csv(report, bpath);
    std::vector<ItemRecord> counted = d.items;
    count_train_frequency(counted, d.train);
    write_hubness_csv(index, counted, report.hubness, hpath);
    write_hubness_summary(report.hubness, queries.size(), spath_h);

    RunManifest m;
    m.command = "eval";
    m.config = {{"beam", beam}, {"split", split}, {"train_config", config_to_json(ck.config)}};
    m.seed = ck.config.seed;
    m.inputs = {{"checkpoint", checkpoint},
                {"items", path_in(data, "items.jsonl")},
                {"train", path_in(data, "train.jsonl")}};
    if (split == "test") m.inputs.emplace_back("test", path_in(data, "test.jsonl"));
    m.outputs = {{"report", rpath}, {"buckets", bpath}, {"hubness", hpath}, {"hubness_summary", spath_h}};
    m.duration_seconds = seconds_since(t0);
    write_manifest(path_in(dir, "manifest.json"), m);
    std::printf("queries %zu  H@1 %.4f  H@10 %.4f  N@10 %.4f\n", report.overall.queries, report.overall.hit.at(1),
                report.overall.hit.at(10), report.overall.ndcg.at(10));
    return kExitOk;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

struct AblateCmd {
  TrainFlags flags;
  std::string data;
  std::string seeds = "1,2,3";
  std::string variants;
  std::size_t beam = 20;
  std::string out;
  bool quiet = false;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "corpus directory")->required();
    app.add_option("--seeds", seeds, "comma-separated seeds")->capture_default_str();
    app.add_option("--variants", variants, "comma-separated variant names (default: all)");
    app.add_option("--beam", beam, "beam size")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--out", out, "output directory (default $DGI_OUT_ROOT/ablate)");
    app.add_flag("--quiet", quiet, "no progress output");
    flags.attach(app);
  }

  int run() {
    const auto t0 = Clock::now();
    const TrainConfig base = flags.resolve();
    std::vector<std::uint64_t> seed_list;
    for (const std::string& s : split_list(seeds)) {
      if (s.find_first_not_of("0123456789") != std::string::npos) throw ConfigError("invalid seed: " + s);
      seed_list.push_back(std::stoull(s));
    }
    std::vector<std::string> names = split_list(variants);
    if (names.empty()) {
      for (const Variant& v : ablation_variants()) names.push_back(v.name);
    }
    for (const std::string& n : names) find_variant(n);
    const DataFiles d = load_data(data, true);
    const Split split{d.train, d.test};
    const std::string dir = resolve_out(out, "ablate");
    fs::create_directories(dir);
    const AblationOutcome outcome =
        run_ablation(names, seed_list, base, d.items, split, beam, [&](const VariantResult& r) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "%s seed %llu: H@10 %.4f stability %.4f perplexity %.2f", r.variant.c_str(),
                        static_cast<unsigned long long>(r.seed), r.test.hit.at(10), r.grad_stability, r.perplexity);
          log_line(quiet, buf);
        });
    const std::string table = path_in(dir, "ablation.csv"), verdicts = path_in(dir, "verdicts.csv");
    write_ablation_csv(outcome, table);
    write_verdict_csv(outcome, verdicts);

    RunManifest m;
    m.command = "ablate";
    m.config = {{"seeds", seed_list}, {"variants", names}, {"beam", beam}, {"base", config_to_json(base)}};
    m.seed = base.seed;
    m.inputs = {{"items", path_in(data, "items.jsonl")},
                {"train", path_in(data, "train.jsonl")},
                {"test", path_in(data, "test.jsonl")}};
    m.outputs = {{"ablation", table}, {"verdicts", verdicts}};
    m.duration_seconds = seconds_since(t0);
    write_manifest(path_in(dir, "manifest.json"), m);
    for (const Comparison& c : outcome.comparisons) {
      std::cout << c.name << ": " << (c.majority() ? "holds" : "fails") << "\n";
    }
    return kExitOk;
  }
};

struct DiagnoseCmd {
  std::vector<std::string> traces;
  std::size_t window = 100;
  std::string checkpoint;
  std::string data;
  std::size_t queries = 1000;
  std::size_t beam = 20;
  std::string out;

  void attach(CLI::App& app) {
    app.add_option("--trace", traces, "trace.csv files; the first is the reference for ratios")->required();
    app.add_option("--window", window, "sliding window length")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--checkpoint", checkpoint, "checkpoint for embedding export and hubness");
    app.add_option("--data", data, "corpus directory (needed with --checkpoint)");
    app.add_option("--queries", queries, "test queries sampled for k-occurrence")->capture_default_str();
    app.add_option("--beam", beam, "beam size")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--out", out, "output directory (default $DGI_OUT_ROOT/diagnose)");
  }

  int run() {
    const auto t0 = Clock::now();
    const std::string dir = resolve_out(out, "diagnose");
    RunManifest m;
    m.command = "diagnose";
    m.config = {{"window", window}, {"queries", queries}, {"beam", beam}};

    std::vector<double> stats;
    for (const std::string& t : traces) {
      require_file(t, "trace");
      stats.push_back(sliding_window_stddev(load_trace_grad_norms(t), window));
      m.inputs.emplace_back("trace", t);
    }
    fs::create_directories(dir);
    const std::string spath = path_in(dir, "stability.csv");
    {
      std::ostringstream s;
      s << "trace,window,stability,ratio_to_first\n";
      for (std::size_t i = 0; i < traces.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", stats[i], stats[0] > 0.0 ? stats[i] / stats[0] : 0.0);
        s << traces[i] << ',' << window << ',' << buf << '\n';
        std::printf("%s: stability %.6g\n", traces[i].c_str(), stats[i]);
      }
      write_file_atomic(spath, s.str());
    }
    m.outputs.emplace_back("stability", spath);

    if (!checkpoint.empty()) {
      if (data.empty()) throw ConfigError("--checkpoint requires --data");
      const DataFiles d = load_data(data, true);
      Checkpoint ck = load_compatible(checkpoint, d.items, d.test);
      m.seed = ck.config.seed;
      std::vector<ItemRecord> counted = d.items;
      count_train_frequency(counted, d.train);
      const std::string epath = path_in(dir, "embeddings.csv"), hpath = path_in(dir, "hubness.csv"),
                        sumpath = path_in(dir, "hubness_summary.csv");
      export_embeddings(ck.model, d.items, epath);
      const SidIndex index = build_index(ck.model, d.items);
      const std::size_t n = std::min(queries, d.test.size());
      const auto ranked = retrieve(ck.model, index, d.items, std::span(d.test).first(n), beam, 10);
      const HubnessStats hub = hubness_stats(index, counted, ranked, 10);
      write_hubness_csv(index, counted, hub, hpath);
      write_hubness_summary(hub, n, sumpath);
      m.inputs.emplace_back("checkpoint", checkpoint);
      m.inputs.emplace_back("items", path_in(data, "items.jsonl"));
      m.inputs.emplace_back("train", path_in(data, "train.jsonl"));
      m.inputs.emplace_back("test", path_in(data, "test.jsonl"));
      m.outputs.emplace_back("embeddings", epath);
      m.outputs.emplace_back("hubness", hpath);
      m.outputs.emplace_back("hubness_summary", sumpath);
    }
    m.duration_seconds = seconds_since(t0);
    write_manifest(path_in(dir, "manifest.json"), m);
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Differentiable geometric indexing: corpus, training, retrieval and diagnostics"};
  app.require_subcommand(1);
  GenCorpusCmd gen;
  TrainCmd train_cmd;
  EvalCmd eval;
  AblateCmd ablate;
  DiagnoseCmd diagnose;
  gen.attach(*app.add_subcommand("gen-corpus", "generate a synthetic corpus and split it"));
  train_cmd.attach(*app.add_subcommand("train", "train a model"));
  eval.attach(*app.add_subcommand("eval", "evaluate a checkpoint"));
  ablate.attach(*app.add_subcommand("ablate", "run the ablation matrix"));
  diagnose.attach(*app.add_subcommand("diagnose", "gradient stability, embedding export, hubness"));

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand("gen-corpus")) return gen.run();
    if (app.got_subcommand("train")) return train_cmd.run();
    if (app.got_subcommand("eval")) return eval.run();
    if (app.got_subcommand("ablate")) return ablate.run();
    if (app.got_subcommand("diagnose")) return diagnose.run();
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IncompatibleError& e) {
    std::cerr << "incompatible: " << e.what() << "\n";
    return kExitData;
  } catch (const PreconditionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dgi::cli
