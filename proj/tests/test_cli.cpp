#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "arr/cli.hpp"
#include "arr/preference.hpp"
#include "fixtures.hpp"

using namespace arr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "arr_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// dataset whose labels match the 3-axis unit-weight oracle
fs::path write_aligned_dataset(const fs::path& dir, int n = 10) {
  fs::path path = dir / "dataset.jsonl";
  save_dataset(testfx::oracle_aligned_dataset(n, 3, 33), path);
  return path;
}

int run(std::vector<std::string> args) { return run_cli(args); }

}  // namespace

TEST_CASE("unknown subcommand exits with the usage code") {
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({}) == 2);
}

TEST_CASE("missing dataset path fails with the data exit code and names the path") {
  fs::path dir = fresh_dir("missing_ds");
  int rc = run({"eval", "--set", "paths.dataset=/nope/missing.jsonl",
                "paths.report_dir=" + dir.string()});
  CHECK(rc == 4);
}

TEST_CASE("unset dataset path is a config error") {
  fs::path dir = fresh_dir("unset_ds");
  CHECK(run({"eval", "--set", "paths.report_dir=" + dir.string()}) == 3);
}

TEST_CASE("unknown config override is rejected") {
  CHECK(run({"eval", "--set", "no.such.key=1"}) == 3);
}

TEST_CASE("bias-ablate with the forced-bias fixture reports delta 100.0") {
  fs::path dir = fresh_dir("bias");
  // all labels First; the fully position-biased oracle is right forward, wrong reversed
  PreferenceDataset ds;
  for (int i = 0; i < 10; ++i)
    ds.pairs.push_back(testfx::feature_pair("p" + std::to_string(i), {2.0, 0.0, 0.0},
                                            {1.0, 0.0, 0.0},
                                            PreferenceLabel::FirstPreferred));
  fs::path ds_path = dir / "biased.jsonl";
  save_dataset(ds, ds_path);

  int rc = run({"bias-ablate", "--set", "paths.dataset=" + ds_path.string(),
                "paths.report_dir=" + dir.string(),
                "backend.oracle.weight_vector=[1.0,1.0,1.0]",
                "backend.oracle.position_bias=1.0"});
  REQUIRE(rc == 0);

  json report = json::parse(read_file(dir / "bias_report.json"));
  CHECK(report["forward_acc"] == 100.0);
  CHECK(report["reverse_acc"] == 0.0);
  CHECK(report["delta"] == 100.0);
  CHECK(read_file(dir / "bias_table.txt").find("100.0") != std::string::npos);
}

TEST_CASE("gradcheck exits zero below tolerance and writes its report") {
  fs::path dir = fresh_dir("gradcheck");
  int rc = run({"gradcheck", "--set", "gradcheck.trials=5",
                "paths.report_dir=" + dir.string()});
  CHECK(rc == 0);
  json report = json::parse(read_file(dir / "gradcheck.json"));
  CHECK(report["max_relative_error"].get<double>() < 1e-4);
}

TEST_CASE("every run writes a manifest pinning config hash and template hashes") {
  fs::path dir = fresh_dir("manifest");
  fs::path ds = write_aligned_dataset(dir);
  int rc = run({"eval", "--set", "paths.dataset=" + ds.string(),
                "paths.report_dir=" + dir.string(),
                "backend.oracle.weight_vector=[1.0,1.0,1.0]", "seed=9"});
  REQUIRE(rc == 0);

  json manifest = json::parse(read_file(dir / "eval.manifest.json"));
  CHECK(manifest["command"] == "eval");
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["config_hash"].is_string());
  CHECK(manifest["template_hashes"].contains("evaluate"));
  CHECK(manifest["backend_ids"]["judge"] == "oracle");
  CHECK(manifest["outputs"][0] == "eval_report.jsonl");
}

TEST_CASE("flag overrides beat the config file") {
  fs::path dir = fresh_dir("precedence");
  fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"seed": 1, "gradcheck": {"trials": 3}, "paths": {"report_dir": ")"
        << dir.string() << R"("}})";
  }
  int rc = run({"gradcheck", "--config", cfg_path.string(), "--set", "seed=9"});
  REQUIRE(rc == 0);
  json manifest = json::parse(read_file(dir / "gradcheck.manifest.json"));
  CHECK(manifest["seed"] == 9);
}

TEST_CASE("rubric-gen produces a store, a rendered rubric and provenance") {
  fs::path dir = fresh_dir("rubric_gen");
  fs::path ds = write_aligned_dataset(dir);
  int rc = run({"rubric-gen", "--set", "paths.dataset=" + ds.string(),
                "paths.report_dir=" + dir.string(),
                "backend.oracle.weight_vector=[1.0,1.0,1.0]"});
  REQUIRE(rc == 0);
  CHECK(fs::exists(dir / "rubric_store.jsonl"));
  CHECK(fs::exists(dir / "structured_rubric.txt"));
  json sidecar = json::parse(read_file(dir / "structured_rubric.provenance.json"));
  CHECK(sidecar["provenance"].size() == 10);
}

TEST_CASE("eval conditioned on an exported rubric file") {
  fs::path dir = fresh_dir("eval_rubric");
  fs::path ds = write_aligned_dataset(dir);
  REQUIRE(run({"rubric-gen", "--set", "paths.dataset=" + ds.string(),
               "paths.report_dir=" + dir.string(),
               "backend.oracle.weight_vector=[1.0,1.0,1.0]"}) == 0);
  int rc = run({"eval", "--set", "paths.dataset=" + ds.string(),
                "paths.report_dir=" + dir.string(),
                "paths.structured_rubric=" + (dir / "structured_rubric.txt").string(),
                "backend.oracle.weight_vector=[1.0,1.0,1.0]"});
  REQUIRE(rc == 0);
  std::string report = read_file(dir / "eval_report.jsonl");
  CHECK(report.find("\"kind\":\"summary\"") != std::string::npos);
}

TEST_CASE("select requires enough verified rubrics") {
  fs::path dir = fresh_dir("select_few");
  fs::path ds = write_aligned_dataset(dir, 2);
  REQUIRE(run({"rubric-gen", "--set", "paths.dataset=" + ds.string(),
               "paths.report_dir=" + dir.string(),
               "backend.oracle.weight_vector=[1.0,1.0,1.0]"}) == 0);
  int rc = run({"select", "--set", "paths.dataset=" + ds.string(),
                "paths.rubric_store=" + (dir / "rubric_store.jsonl").string(),
                "paths.report_dir=" + dir.string(),
                "backend.oracle.weight_vector=[1.0,1.0,1.0]", "eval.cardinality_k=50"});
  CHECK(rc == 6);
}

TEST_CASE("bt-train and rpo-train write their outputs") {
  fs::path dir = fresh_dir("training");
  fs::path ds = write_aligned_dataset(dir, 20);
  REQUIRE(run({"bt-train", "--set", "paths.dataset=" + ds.string(),
               "paths.report_dir=" + dir.string(), "bt.epochs=20"}) == 0);
  CHECK(fs::exists(dir / "bt_model.json"));
  CHECK(fs::exists(dir / "bt_loss_curve.jsonl"));

  REQUIRE(run({"rpo-train", "--set", "paths.report_dir=" + dir.string(),
               "rpo.iterations=5", "rpo.batch_size=4"}) == 0);
  CHECK(fs::exists(dir / "rpo_metrics.jsonl"));
  CHECK(fs::exists(dir / "rpo_policy.json"));
}

TEST_CASE("rpo-train with inline rubric regeneration runs offline") {
  fs::path dir = fresh_dir("rpo_regen");
  int rc = run({"rpo-train", "--set", "paths.report_dir=" + dir.string(),
                "rpo.iterations=2", "rpo.batch_size=2", "rpo.regenerate_rubrics=true",
                "backend.oracle.weight_vector=[1.0,1.0]"});
  CHECK(rc == 0);
}

TEST_CASE("rpo-train's chat judge also runs against the synthetic oracle") {
  fs::path dir = fresh_dir("rpo_chat");
  int rc = run({"rpo-train", "--set", "paths.report_dir=" + dir.string(),
                "rpo.iterations=3", "rpo.batch_size=2", "rpo.judge=chat",
                "backend.oracle.weight_vector=[1.0,1.0]"});
  CHECK(rc == 0);
  CHECK(fs::exists(dir / "rpo_metrics.jsonl"));
}

TEST_CASE("guide exemplars flow into judging and generation") {
  fs::path dir = fresh_dir("guide");
  fs::path ds = write_aligned_dataset(dir);
  fs::path guide = dir / "guide.txt";
  {
    std::ofstream out(guide);
    out << "exemplar: prefer faithful renderings over embellished ones\n";
  }
  int rc = run({"eval", "--set", "paths.dataset=" + ds.string(),
                "paths.report_dir=" + dir.string(),
                "paths.guide_exemplars=" + guide.string(),
                "backend.oracle.weight_vector=[1.0,1.0,1.0]"});
  CHECK(rc == 0);
  rc = run({"rubric-gen", "--set", "paths.dataset=" + ds.string(),
            "paths.report_dir=" + dir.string(),
            "paths.guide_exemplars=" + guide.string(),
            "backend.oracle.weight_vector=[1.0,1.0,1.0]"});
  CHECK(rc == 0);
}

TEST_CASE("rpo chat judge conditions on a supplied structured rubric") {
  fs::path dir = fresh_dir("rpo_conditioned");
  fs::path ds = write_aligned_dataset(dir, 4);
  REQUIRE(run({"rubric-gen", "--set", "paths.dataset=" + ds.string(),
               "paths.report_dir=" + dir.string(),
               "backend.oracle.weight_vector=[1.0,1.0,1.0]"}) == 0);
  int rc = run({"rpo-train", "--set", "paths.report_dir=" + dir.string(),
                "paths.structured_rubric=" + (dir / "structured_rubric.txt").string(),
                "rpo.iterations=3", "rpo.batch_size=2", "rpo.judge=chat", "rpo.dim=3",
                "rpo.prompt_target=[1.0,2.0,3.0]",
                "backend.oracle.weight_vector=[1.0,1.0,1.0]"});
  CHECK(rc == 0);
}

TEST_CASE("an unreachable http backend exits with the backend code") {
  fs::path dir = fresh_dir("backend_err");
  fs::path ds = write_aligned_dataset(dir, 2);
  int rc = run({"eval", "--set", "paths.dataset=" + ds.string(),
                "paths.report_dir=" + dir.string(), "backend.kind=http",
                "backend.endpoint=http://127.0.0.1:1/v1", "backend.model=m",
                "backend.retry_limit=0", "backend.timeout_ms=300"});
  CHECK(rc == 5);
}

TEST_CASE("rubric provenance and judge backends are independent settings") {
  // cross-model transfer shape: rubrics come from one oracle, judging from
  // another with different weights
  fs::path dir = fresh_dir("cross_model");
  fs::path ds = write_aligned_dataset(dir);
  fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    json cfg{{"paths",
              {{"dataset", ds.string()}, {"report_dir", dir.string()}}},
             {"backend", {{"oracle", {{"weight_vector", {1.0, 1.0, 1.0}}}}}},
             {"pipeline_backend",
              {{"oracle", {{"weight_vector", {1.0, 1.0, 1.0}}}}}},
             {"judge_backend",
              {{"oracle", {{"weight_vector", {2.0, 0.5, 1.0}}}}}}};
    out << cfg.dump();
  }
  REQUIRE(run({"rubric-gen", "--config", cfg_path.string()}) == 0);
  REQUIRE(run({"eval", "--config", cfg_path.string(), "--set",
               "paths.structured_rubric=" + (dir / "structured_rubric.txt").string()}) == 0);

  json manifest = json::parse(read_file(dir / "rubric-gen.manifest.json"));
  CHECK(manifest["backend_ids"]["pipeline"] == "oracle");
}

TEST_CASE("two identical runs produce byte-identical reports") {
  fs::path dir = fresh_dir("determinism");
  fs::path ds = write_aligned_dataset(dir);
  std::vector<std::string> args{"eval", "--set", "paths.dataset=" + ds.string(),
                                "paths.report_dir=" + dir.string(),
                                "backend.oracle.weight_vector=[1.0,1.0,1.0]",
                                "backend.oracle.noise_rate=0.25", "seed=21"};
  REQUIRE(run(args) == 0);
  std::string first_report = read_file(dir / "eval_report.jsonl");
  std::string first_manifest = read_file(dir / "eval.manifest.json");
  REQUIRE(run(args) == 0);
  CHECK(read_file(dir / "eval_report.jsonl") == first_report);
  CHECK(read_file(dir / "eval.manifest.json") == first_manifest);
}
