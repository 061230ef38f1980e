#include "arr/config.hpp"

#include <fstream>

#include "arr/templates.hpp"
#include "arr/util.hpp"

namespace arr {

using nlohmann::json;

namespace {

json default_tree() {
  json backend{{"kind", "oracle"},
               {"endpoint", ""},
               {"model", ""},
               {"retry_limit", 3},
               {"concurrency_bound", 4},
               {"temperature", 0.0},
               {"timeout_ms", 30000},
               {"oracle",
                {{"weight_vector", {1.0, 1.0}},
                 {"position_bias", 0.0},
                 {"noise_rate", 0.0}}}};

  return json{
      {"seed", 0},
      {"backend", backend},
      {"pipeline",
       {{"t_max", 5}, {"concurrency_bound", 1}, {"store_path", ""}}},
      {"eval",
       {{"orders", "forward_and_reverse"},
        {"cardinality_k", 5},
        {"bootstrap_resamples", 1000},
        {"concurrency", 1},
        {"cardinality_ks", {1, 2, 4}}}},
      {"bt", {{"learning_rate", 0.1}, {"epochs", 200}, {"l2", 0.0}}},
      {"rpo",
       {{"iterations", 500},
        {"batch_size", 32},
        {"lambda", 1.0},
        {"gamma", 0.1},
        {"clip_eps", 0.2},
        {"kl_beta", 0.01},
        {"learning_rate", 0.1},
        {"timesteps", 8},
        {"dim", 2},
        {"sigma", 0.5},
        {"grad_clip_norm", 1.0},
        {"regenerate_rubrics", false},
        {"judge", "oracle"},
        {"prompt_source", "fixed"},
        {"prompt_target", {5.0, -4.0}},
        {"prompt_scale", 1.0}}},
      {"paths",
       {{"dataset", ""},
        {"rubric_store", ""},
        {"structured_rubric", ""},
        {"provenance", ""},
        {"guide_exemplars", ""},
        {"report_dir", "."}}},
      {"gradcheck", {{"trials", 50}, {"tolerance", 1e-4}}},
  };
}

void merge_into(json& base, const json& overlay, const std::string& where) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (!base.contains(it.key()))
      throw ConfigError("unknown config key '" + where + it.key() + "'");
    if (base[it.key()].is_object() && it.value().is_object()) {
      merge_into(base[it.key()], it.value(), where + it.key() + ".");
    } else {
      base[it.key()] = it.value();
    }
  }
}

void apply_override(json& tree, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key.path=value, got '" + assignment + "'");
  std::string key_path = assignment.substr(0, eq);
  std::string value_text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // unquoted strings are fine
  }

  json* node = &tree;
  std::size_t pos = 0;
  while (true) {
    std::size_t dot = key_path.find('.', pos);
    std::string key = key_path.substr(pos, dot == std::string::npos ? std::string::npos
                                                                    : dot - pos);
    if (!node->contains(key))
      throw ConfigError("override names unknown config key '" + key_path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

BackendConfig backend_from_json(const json& j, uint64_t default_seed) {
  BackendConfig cfg;
  cfg.kind = j.value("kind", "oracle");
  if (cfg.kind != "oracle" && cfg.kind != "http")
    throw ConfigError("backend kind must be \"oracle\" or \"http\", got \"" + cfg.kind + "\"");
  cfg.endpoint = j.value("endpoint", "");
  cfg.model = j.value("model", "");
  cfg.retry_limit = j.value("retry_limit", 3);
  cfg.concurrency_bound = j.value("concurrency_bound", 4);
  cfg.temperature = j.value("temperature", 0.0);
  cfg.timeout_ms = j.value("timeout_ms", 30000);
  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    cfg.oracle.weight_vector = o.value("weight_vector", std::vector<double>{1.0, 1.0});
    cfg.oracle.position_bias = o.value("position_bias", 0.0);
    cfg.oracle.noise_rate = o.value("noise_rate", 0.0);
    cfg.oracle.seed = o.value("seed", default_seed);
  } else {
    cfg.oracle.seed = default_seed;
  }
  if (cfg.oracle.position_bias < 0.0 || cfg.oracle.position_bias > 1.0 ||
      cfg.oracle.noise_rate < 0.0 || cfg.oracle.noise_rate > 1.0)
    throw ConfigError("oracle position_bias and noise_rate must be in [0, 1]");
  if (cfg.oracle.weight_vector.empty())
    throw ConfigError("oracle weight_vector must be non-empty");
  return cfg;
}

}  // namespace

AppConfig load_config(const std::filesystem::path& file,
                      const std::vector<std::string>& overrides) {
  json tree = default_tree();

  if (!file.empty()) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + file.string());
    json loaded;
    try {
      in >> loaded;
    } catch (const json::exception& e) {
      throw ConfigError("config parse failure in " + file.string() + ": " + e.what());
    }
    // per-stage backend overrides start from the default backend section
    for (const char* section : {"pipeline_backend", "judge_backend"}) {
      if (loaded.contains(section)) {
        json merged = tree["backend"];
        merge_into(merged, loaded[section], std::string(section) + ".");
        tree[section] = merged;
        loaded.erase(section);
      }
    }
    merge_into(tree, loaded, "");
  }
  // a flag override may introduce a per-stage backend section on its own
  for (const char* section : {"pipeline_backend", "judge_backend"}) {
    if (tree.contains(section)) continue;
    std::string prefix = std::string(section) + ".";
    for (const auto& assignment : overrides) {
      if (assignment.rfind(prefix, 0) == 0) {
        tree[section] = tree["backend"];
        break;
      }
    }
  }
  for (const auto& assignment : overrides) apply_override(tree, assignment);

  AppConfig cfg;
  cfg.canonical = tree;
  cfg.seed = tree.at("seed").get<uint64_t>();
  cfg.backend = backend_from_json(tree.at("backend"), cfg.seed);
  if (tree.contains("pipeline_backend"))
    cfg.pipeline_backend = backend_from_json(tree["pipeline_backend"], cfg.seed);
  if (tree.contains("judge_backend"))
    cfg.judge_backend = backend_from_json(tree["judge_backend"], cfg.seed);

  const json& pipeline = tree.at("pipeline");
  cfg.t_max = pipeline.at("t_max").get<int>();
  cfg.pipeline_concurrency = pipeline.at("concurrency_bound").get<int>();
  cfg.store_path = pipeline.at("store_path").get<std::string>();
  if (cfg.t_max < 1) throw ConfigError("pipeline.t_max must be >= 1");

  const json& eval = tree.at("eval");
  cfg.eval_orders = eval.at("orders").get<std::string>();
  if (cfg.eval_orders != "forward_and_reverse" && cfg.eval_orders != "forward_only")
    throw ConfigError("eval.orders must be forward_and_reverse or forward_only");
  cfg.cardinality_k = eval.at("cardinality_k").get<int>();
  if (cfg.cardinality_k < 1) throw ConfigError("eval.cardinality_k must be >= 1");
  cfg.bootstrap_resamples = eval.at("bootstrap_resamples").get<int>();
  cfg.eval_concurrency = eval.at("concurrency").get<int>();
  cfg.cardinality_ks = eval.at("cardinality_ks").get<std::vector<int>>();

  const json& bt = tree.at("bt");
  cfg.bt.learning_rate = bt.at("learning_rate").get<double>();
  cfg.bt.epochs = bt.at("epochs").get<int>();
  cfg.bt.l2 = bt.at("l2").get<double>();
  cfg.bt.seed = cfg.seed;

  const json& rpo = tree.at("rpo");
  cfg.rpo.iterations = rpo.at("iterations").get<int>();
  cfg.rpo.batch_size = rpo.at("batch_size").get<int>();
  cfg.rpo.lambda = rpo.at("lambda").get<double>();
  cfg.rpo.gamma = rpo.at("gamma").get<double>();
  cfg.rpo.clip_eps = rpo.at("clip_eps").get<double>();
  cfg.rpo.kl_beta = rpo.at("kl_beta").get<double>();
  cfg.rpo.learning_rate = rpo.at("learning_rate").get<double>();
  cfg.rpo.timesteps = rpo.at("timesteps").get<int>();
  cfg.rpo.dim = rpo.at("dim").get<int>();
  cfg.rpo.sigma = rpo.at("sigma").get<double>();
  cfg.rpo.grad_clip_norm = rpo.at("grad_clip_norm").get<double>();
  cfg.rpo.regenerate_rubrics = rpo.at("regenerate_rubrics").get<bool>();
  cfg.rpo.seed = cfg.seed;
  cfg.rpo.validate();
  cfg.rpo_judge = rpo.at("judge").get<std::string>();
  if (cfg.rpo_judge != "oracle" && cfg.rpo_judge != "chat")
    throw ConfigError("rpo.judge must be oracle or chat");
  cfg.rpo_prompt_source = rpo.at("prompt_source").get<std::string>();
  if (cfg.rpo_prompt_source != "fixed" && cfg.rpo_prompt_source != "gaussian" &&
      cfg.rpo_prompt_source != "dataset")
    throw ConfigError("rpo.prompt_source must be fixed, gaussian or dataset");
  cfg.rpo_prompt_target = rpo.at("prompt_target").get<std::vector<double>>();
  cfg.rpo_prompt_scale = rpo.at("prompt_scale").get<double>();

  const json& paths = tree.at("paths");
  cfg.dataset_path = paths.at("dataset").get<std::string>();
  cfg.rubric_store_path = paths.at("rubric_store").get<std::string>();
  cfg.structured_rubric_path = paths.at("structured_rubric").get<std::string>();
  cfg.provenance_path = paths.at("provenance").get<std::string>();
  cfg.guide_exemplars_path = paths.at("guide_exemplars").get<std::string>();
  cfg.report_dir = paths.at("report_dir").get<std::string>();

  const json& gradcheck = tree.at("gradcheck");
  cfg.gradcheck_trials = gradcheck.at("trials").get<int>();
  cfg.gradcheck_tolerance = gradcheck.at("tolerance").get<double>();

  return cfg;
}

std::string config_hash(const AppConfig& cfg) { return to_hex(fnv1a64(cfg.canonical.dump())); }

std::unique_ptr<JudgeBackend> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == "oracle") return std::make_unique<OracleBackend>(cfg.oracle);
  HttpBackendConfig http;
  http.base_url = cfg.endpoint;
  http.model = cfg.model;
  http.timeout_ms = cfg.timeout_ms;
  http.concurrency_bound = cfg.concurrency_bound;
  http.default_temperature = cfg.temperature;
  if (http.base_url.empty())
    throw ConfigError("http backend requires a non-empty endpoint");
  return std::make_unique<HttpBackend>(http);
}

RetryPolicy make_retry(const BackendConfig& cfg, uint64_t seed) {
  RetryPolicy retry;
  retry.retry_limit = cfg.retry_limit;
  retry.jitter_seed = seed;
  return retry;
}

void write_manifest(const AppConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs,
                    const std::map<std::string, std::string>& backend_ids,
                    const std::filesystem::path& path) {
  json manifest{{"schema_version", 1},
                {"command", command},
                {"config_hash", config_hash(cfg)},
                {"seed", cfg.seed},
                {"template_hashes", templates::hashes()},
                {"backend_ids", backend_ids},
                {"outputs", outputs}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace arr
