#include "dgi/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "dgi/errors.hpp"

namespace dgi {

Json config_to_json(const TrainConfig& c) {
  Json j;
  j["vocab_size"] = c.vocab_size;
  j["dim"] = c.dim;
  j["hidden"] = c.hidden;
  j["decoder_hidden"] = c.decoder_hidden;
  j["level_sizes"] = c.level_sizes;
  j["gamma_init"] = c.gamma_init;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["max_steps"] = c.max_steps;
  j["lr_backbone"] = c.lr_backbone;
  j["lr_quantizer"] = c.lr_quantizer;
  j["warmup_steps"] = c.warmup_steps;
  j["tau_start"] = c.tau_start;
  j["tau_end"] = c.tau_end;
  j["tau_cl"] = c.tau_cl;
  j["beta"] = c.beta;
  j["eps"] = c.eps;
  j["w_ntp"] = c.weights.ntp;
  j["w_global"] = c.weights.global;
  j["w_local"] = c.weights.local;
  j["w_infonce"] = c.weights.infonce;
  j["w_div"] = c.weights.diversity;
  j["grad_path"] = to_string(c.gradient_path);
  j["geometry"] = to_string(c.geometry);
  j["weight_sharing"] = to_string(c.weight_sharing);
  j["diversity"] = c.diversity ? "on" : "off";
  j["optimizer"] = to_string(c.optimizer);
  j["weight_decay"] = c.weight_decay;
  j["kmeans_iterations"] = c.kmeans_iterations;
  j["seed"] = c.seed;
  return j;
}

namespace {

bool parse_switch(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw ConfigError("expected on|off, got " + s);
}

}  // namespace

void apply_config_json(TrainConfig& c, const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const Json& v = it.value();
      if (k == "vocab_size") c.vocab_size = v.get<std::size_t>();
      else if (k == "dim") c.dim = v.get<std::size_t>();
      else if (k == "hidden") c.hidden = v.get<std::size_t>();
      else if (k == "decoder_hidden") c.decoder_hidden = v.get<std::size_t>();
      else if (k == "level_sizes") c.level_sizes = v.get<std::vector<std::size_t>>();
      else if (k == "gamma_init") c.gamma_init = v.get<double>();
      else if (k == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (k == "epochs") c.epochs = v.get<std::size_t>();
      else if (k == "max_steps") c.max_steps = v.get<std::size_t>();
      else if (k == "lr_backbone") c.lr_backbone = v.get<double>();
      else if (k == "lr_quantizer") c.lr_quantizer = v.get<double>();
      else if (k == "warmup_steps") c.warmup_steps = v.get<std::size_t>();
      else if (k == "tau_start") c.tau_start = v.get<double>();
      else if (k == "tau_end") c.tau_end = v.get<double>();
      else if (k == "tau_cl") c.tau_cl = v.get<double>();
      else if (k == "beta") c.beta = v.get<double>();
      else if (k == "eps") c.eps = v.get<double>();
      else if (k == "w_ntp") c.weights.ntp = v.get<double>();
      else if (k == "w_global") c.weights.global = v.get<double>();
      else if (k == "w_local") c.weights.local = v.get<double>();
      else if (k == "w_infonce") c.weights.infonce = v.get<double>();
      else if (k == "w_div") c.weights.diversity = v.get<double>();
      else if (k == "grad_path") c.gradient_path = parse_gradient_path(v.get<std::string>());
      else if (k == "geometry") c.geometry = parse_geometry(v.get<std::string>());
      else if (k == "weight_sharing") c.weight_sharing = parse_weight_sharing(v.get<std::string>());
      else if (k == "diversity") c.diversity = parse_switch(v.get<std::string>());
      else if (k == "optimizer") c.optimizer = parse_optimizer(v.get<std::string>());
      else if (k == "weight_decay") c.weight_decay = v.get<double>();
      else if (k == "kmeans_iterations") c.kmeans_iterations = v.get<std::size_t>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown config key: " + k);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

std::string checkpoint_to_string(Model& model, const TrainConfig& cfg, std::size_t vocab_size, std::size_t step) {
  Json j;
  j["format"] = "dgi-checkpoint-1";
  j["config"] = config_to_json(cfg);
  j["vocab_size"] = vocab_size;
  j["step"] = step;
  j["gamma"] = model.gamma();
  Json params = Json::array();
  for (const auto& p : model.params()) {
    Json e;
    e["name"] = p->name;
    e["shape"] = p->value.shape();
    e["values"] = p->value.values();
    params.push_back(std::move(e));
  }
  j["params"] = std::move(params);
  return j.dump() + "\n";
}

void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg, std::size_t vocab_size,
                     std::size_t step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out << checkpoint_to_string(model, cfg, vocab_size, step);
  if (!out) throw Error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  Json j;
  try {
    j = Json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what(), 0);
  }
  try {
    if (j.at("format") != "dgi-checkpoint-1") throw ParseError("unknown checkpoint format", 0);
    TrainConfig cfg;
    apply_config_json(cfg, j.at("config"));
    const auto vocab = j.at("vocab_size").get<std::size_t>();
    const auto step = j.at("step").get<std::size_t>();
    Checkpoint ck{cfg, vocab, step, Model(cfg.model_config(vocab), cfg.seed)};
    const Json& params = j.at("params");
    if (params.size() != ck.model.params().size()) throw ParseError("checkpoint parameter count mismatch", 0);
    for (const Json& e : params) {
      Parameter* p = ck.model.params().find(e.at("name").get<std::string>());
      if (p == nullptr) throw ParseError("unknown parameter " + e.at("name").get<std::string>(), 0);
      Tensor t(e.at("shape").get<std::vector<std::size_t>>(), e.at("values").get<std::vector<double>>());
      if (!t.same_shape(p->value)) throw ParseError("shape mismatch for " + p->name, 0);
      p->value = std::move(t);
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what(), 0);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("malformed checkpoint config: ") + e.what(), 0);
  }
}

}  // namespace dgi
