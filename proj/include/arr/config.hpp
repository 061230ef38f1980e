#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arr/bt_model.hpp"
#include "arr/judge.hpp"
#include "arr/rpo.hpp"

namespace arr {

struct BackendConfig {
  std::string kind = "oracle";  // "oracle" | "http"
  // http
  std::string endpoint;
  std::string model;
  int retry_limit = 3;
  int concurrency_bound = 4;
  double temperature = 0.0;
  int timeout_ms = 30000;
  // oracle
  OracleConfig oracle{{1.0, 1.0}, 0.0, 0.0, 0};
};

// Declarative run configuration: one JSON file, flag overrides for every leaf
// key, precedence flags > file > defaults.
struct AppConfig {
  uint64_t seed = 0;

  BackendConfig backend;
  std::optional<BackendConfig> pipeline_backend;  // rubric provenance backend
  std::optional<BackendConfig> judge_backend;     // evaluation judge backend

  // pipeline
  int t_max = 5;
  int pipeline_concurrency = 1;
  std::string store_path;

  // eval
  std::string eval_orders = "forward_and_reverse";  // or "forward_only"
  int cardinality_k = 5;
  int bootstrap_resamples = 1000;
  int eval_concurrency = 1;
  std::vector<int> cardinality_ks = {1, 2, 4};

  BTTrainConfig bt;

  RPOConfig rpo;
  std::string rpo_judge = "oracle";         // "oracle" | "chat"
  std::string rpo_prompt_source = "fixed";  // "fixed" | "gaussian" | "dataset"
  std::vector<double> rpo_prompt_target = {5.0, -4.0};
  double rpo_prompt_scale = 1.0;

  // paths
  std::string dataset_path;
  std::string rubric_store_path;
  std::string structured_rubric_path;
  std::string provenance_path;
  std::string guide_exemplars_path;  // curated exemplars injected into templates
  std::string report_dir = ".";

  int gradcheck_trials = 50;
  double gradcheck_tolerance = 1e-4;

  nlohmann::json canonical;  // fully merged tree, for hashing and manifests
};

// Loads defaults <- optional file <- `key.path=value` overrides.
AppConfig load_config(const std::filesystem::path& file,
                      const std::vector<std::string>& overrides);

std::string config_hash(const AppConfig& cfg);

std::unique_ptr<JudgeBackend> make_backend(const BackendConfig& cfg);
RetryPolicy make_retry(const BackendConfig& cfg, uint64_t seed);

// Every run writes a manifest sufficient to re-run it next to its outputs.
void write_manifest(const AppConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs,
                    const std::map<std::string, std::string>& backend_ids,
                    const std::filesystem::path& path);

}  // namespace arr
