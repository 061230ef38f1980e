#include "arr/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "arr/config.hpp"
#include "arr/evaluator.hpp"
#include "arr/rpo.hpp"
#include "arr/rubric_pipeline.hpp"

namespace arr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommandContext {
  AppConfig cfg;
  std::unique_ptr<JudgeBackend> default_backend;
  std::unique_ptr<JudgeBackend> pipeline_backend_owned;
  std::unique_ptr<JudgeBackend> judge_backend_owned;

  JudgeBackend& pipeline_backend() {
    return pipeline_backend_owned ? *pipeline_backend_owned : *default_backend;
  }
  JudgeBackend& judge_backend() {
    return judge_backend_owned ? *judge_backend_owned : *default_backend;
  }
  const BackendConfig& pipeline_backend_cfg() const {
    return cfg.pipeline_backend ? *cfg.pipeline_backend : cfg.backend;
  }
  const BackendConfig& judge_backend_cfg() const {
    return cfg.judge_backend ? *cfg.judge_backend : cfg.backend;
  }
};

CommandContext make_context(AppConfig cfg) {
  CommandContext ctx;
  ctx.cfg = std::move(cfg);
  ctx.default_backend = make_backend(ctx.cfg.backend);
  if (ctx.cfg.pipeline_backend)
    ctx.pipeline_backend_owned = make_backend(*ctx.cfg.pipeline_backend);
  if (ctx.cfg.judge_backend) ctx.judge_backend_owned = make_backend(*ctx.cfg.judge_backend);
  fs::create_directories(ctx.cfg.report_dir);
  return ctx;
}

PreferenceDataset require_dataset(const AppConfig& cfg) {
  if (cfg.dataset_path.empty()) throw ConfigError("paths.dataset is required for this command");
  return load_dataset(cfg.dataset_path);
}

RubricStore require_store(const AppConfig& cfg) {
  if (cfg.rubric_store_path.empty())
    throw ConfigError("paths.rubric_store is required for this command");
  return load_store(cfg.rubric_store_path);
}

EvalProtocol make_protocol(const AppConfig& cfg) {
  EvalProtocol protocol;
  protocol.orders = cfg.eval_orders == "forward_only" ? OrderPolicy::ForwardOnly
                                                      : OrderPolicy::ForwardAndReverse;
  protocol.cardinality_k = cfg.cardinality_k;
  protocol.bootstrap_resamples = cfg.bootstrap_resamples;
  protocol.seed = cfg.seed;
  protocol.concurrency = cfg.eval_concurrency;
  return protocol;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

StructuredRubric optional_rubric(const AppConfig& cfg) {
  StructuredRubric rubric;
  if (!cfg.structured_rubric_path.empty()) {
    fs::path provenance =
        cfg.provenance_path.empty() ? fs::path() : fs::path(cfg.provenance_path);
    rubric = load_structured(cfg.structured_rubric_path, provenance);
  }
  // curated exemplars ride along in the judge conditioning block
  if (!cfg.guide_exemplars_path.empty()) {
    rubric.rendered += (rubric.rendered.empty() ? "" : "\n") +
                       std::string("GUIDE EXEMPLARS\n") +
                       read_text_file(cfg.guide_exemplars_path);
  }
  return rubric;
}

void finish(CommandContext& ctx, const std::string& command,
            const std::vector<std::string>& outputs,
            const std::map<std::string, std::string>& backend_ids) {
  fs::path manifest = fs::path(ctx.cfg.report_dir) / (command + ".manifest.json");
  write_manifest(ctx.cfg, command, outputs, backend_ids, manifest);
}

// --- subcommands -----------------------------------------------------------

int cmd_rubric_gen(CommandContext& ctx) {
  PreferenceDataset dataset = require_dataset(ctx.cfg);

  PipelineConfig pipeline;
  pipeline.t_max = ctx.cfg.t_max;
  pipeline.concurrency_bound = ctx.cfg.pipeline_concurrency;
  pipeline.store_path = ctx.cfg.store_path.empty()
                            ? fs::path(ctx.cfg.report_dir) / "rubric_store.jsonl"
                            : fs::path(ctx.cfg.store_path);
  if (!ctx.cfg.guide_exemplars_path.empty())
    pipeline.guide_text = read_text_file(ctx.cfg.guide_exemplars_path);
  RetryPolicy retry = make_retry(ctx.pipeline_backend_cfg(), ctx.cfg.seed);

  RubricStore store = run_pipeline(dataset, pipeline, ctx.pipeline_backend(), retry);
  StructuredRubric rubric = structure_rubrics(store, ctx.pipeline_backend(), retry);

  fs::path rendered = fs::path(ctx.cfg.report_dir) / "structured_rubric.txt";
  fs::path provenance = fs::path(ctx.cfg.report_dir) / "structured_rubric.provenance.json";
  export_structured(rubric, rendered, provenance);

  std::cout << "rubric-gen: " << store.stats.generated << " generated, "
            << store.stats.verified_first_try + store.stats.refined_then_verified
            << " verified, " << store.stats.discarded << " discarded\n";
  finish(ctx, "rubric-gen",
         {pipeline.store_path.filename().string(), rendered.filename().string(),
          provenance.filename().string()},
         {{"pipeline", ctx.pipeline_backend().id()}});
  return 0;
}

int cmd_eval(CommandContext& ctx) {
  PreferenceDataset dataset = require_dataset(ctx.cfg);
  StructuredRubric rubric = optional_rubric(ctx.cfg);
  RetryPolicy retry = make_retry(ctx.judge_backend_cfg(), ctx.cfg.seed);

  EvalReport report =
      evaluate_dataset(dataset, rubric, make_protocol(ctx.cfg), ctx.judge_backend(), retry);

  fs::path out = fs::path(ctx.cfg.report_dir) / "eval_report.jsonl";
  export_eval_report(report, out);
  std::cout << "eval: accuracy " << format_fixed(100.0 * report.accuracy, 1) << "% +/- "
            << format_fixed(100.0 * report.accuracy_std, 1) << " (" << report.judged
            << " judged, " << report.errored << " errored)\n";
  finish(ctx, "eval", {out.filename().string()}, {{"judge", ctx.judge_backend().id()}});
  return 0;
}

int cmd_bias_ablate(CommandContext& ctx) {
  PreferenceDataset dataset = require_dataset(ctx.cfg);
  StructuredRubric rubric = optional_rubric(ctx.cfg);
  RetryPolicy retry = make_retry(ctx.judge_backend_cfg(), ctx.cfg.seed);

  BiasReport report =
      bias_ablation(dataset, rubric, ctx.judge_backend(), make_protocol(ctx.cfg), retry);

  fs::path out = fs::path(ctx.cfg.report_dir) / "bias_report.json";
  {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw DataError("cannot write bias report: " + out.string());
    f << json{{"forward_acc", report.forward_acc},
              {"reverse_acc", report.reverse_acc},
              {"avg", report.avg},
              {"delta", report.delta}}
             .dump()
      << '\n';
  }
  fs::path table = fs::path(ctx.cfg.report_dir) / "bias_table.txt";
  {
    std::ofstream f(table, std::ios::binary);
    f << format_bias_table(report);
  }
  std::cout << format_bias_table(report);
  finish(ctx, "bias-ablate", {out.filename().string(), table.filename().string()},
         {{"judge", ctx.judge_backend().id()}});
  return 0;
}

int cmd_cardinality(CommandContext& ctx) {
  PreferenceDataset dataset = require_dataset(ctx.cfg);
  RubricStore store = require_store(ctx.cfg);
  RetryPolicy retry = make_retry(ctx.judge_backend_cfg(), ctx.cfg.seed);

  std::vector<SweepPoint> points = cardinality_sweep(
      dataset, store, ctx.cfg.cardinality_ks, ctx.judge_backend(), make_protocol(ctx.cfg), retry);

  fs::path out = fs::path(ctx.cfg.report_dir) / "cardinality.jsonl";
  {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw DataError("cannot write sweep report: " + out.string());
    for (const auto& p : points)
      f << json{{"k", p.k}, {"accuracy", p.accuracy}}.dump() << '\n';
  }
  fs::path table = fs::path(ctx.cfg.report_dir) / "cardinality_table.txt";
  {
    std::ofstream f(table, std::ios::binary);
    f << format_sweep_table(points);
  }
  std::cout << format_sweep_table(points);
  finish(ctx, "cardinality", {out.filename().string(), table.filename().string()},
         {{"judge", ctx.judge_backend().id()}});
  return 0;
}

int cmd_select(CommandContext& ctx) {
  PreferenceDataset dataset = require_dataset(ctx.cfg);
  RubricStore store = require_store(ctx.cfg);
  RetryPolicy retry = make_retry(ctx.judge_backend_cfg(), ctx.cfg.seed);

  StructuredRubric rubric = select_rubric_subset(store, dataset, ctx.cfg.cardinality_k,
                                                 ctx.judge_backend(), retry);

  fs::path rendered = fs::path(ctx.cfg.report_dir) / "selected_rubric.txt";
  fs::path provenance = fs::path(ctx.cfg.report_dir) / "selected_rubric.provenance.json";
  export_structured(rubric, rendered, provenance);
  std::cout << "select: " << rubric.provenance.size() << " rubrics selected\n";
  finish(ctx, "select", {rendered.filename().string(), provenance.filename().string()},
         {{"judge", ctx.judge_backend().id()}});
  return 0;
}

int cmd_bt_train(CommandContext& ctx) {
  PreferenceDataset dataset = require_dataset(ctx.cfg);
  BTTrainResult result = train_bt(dataset, ctx.cfg.bt);

  fs::path model_path = fs::path(ctx.cfg.report_dir) / "bt_model.json";
  fs::path curve_path = fs::path(ctx.cfg.report_dir) / "bt_loss_curve.jsonl";
  save_bt_model(result.model, ctx.cfg.bt, model_path);
  save_loss_curve(result.loss_curve, curve_path);

  std::cout << "bt-train: final loss " << result.loss_curve.back() << ", training accuracy "
            << format_fixed(100.0 * bt_accuracy(result.model, dataset), 1) << "%\n";
  finish(ctx, "bt-train", {model_path.filename().string(), curve_path.filename().string()}, {});
  return 0;
}

RubricProvider make_rubric_provider(CommandContext& ctx, TrajectoryJudge& labeling_judge,
                                    const RetryPolicy& retry) {
  // Invokes the rubric pipeline inline once per prompt-output pair: label the
  // pair with an unconditioned pass, then generate/verify/refine.
  auto counter = std::make_shared<uint64_t>(0);
  return [&ctx, &labeling_judge, retry, counter](const Vector& g, const Trajectory& a,
                                                 const Trajectory& b) -> StructuredRubric {
    labeling_judge.condition_on(nullptr);
    Side label = labeling_judge.prefer(g, a, b);

    PreferencePair pair;
    pair.id = "rpo-" + std::to_string((*counter)++);
    pair.prompt = "target " + render_feature_anchor("TARGET", g);
    pair.first = Candidate::features("traj-a", a.final_state());
    pair.second = Candidate::features("traj-b", b.final_state());
    pair.label = label == Side::First ? PreferenceLabel::FirstPreferred
                                      : PreferenceLabel::SecondPreferred;

    RubricRecord record = generate_rubric(pair, ctx.pipeline_backend(), retry);
    for (;;) {
      VerifyOutcome outcome = verify_rubric(pair, record, ctx.pipeline_backend(), retry);
      if (outcome.verdict) {
        record.status = RubricStatus::Verified;
        break;
      }
      if (record.attempts == ctx.cfg.t_max) {
        record.status = RubricStatus::Discarded;
        break;
      }
      record = refine_rubric(pair, record, outcome.critique, ctx.pipeline_backend(),
                             ctx.cfg.t_max, retry);
    }
    if (record.status != RubricStatus::Verified) return {};
    return flat_structure({record});
  };
}

int cmd_rpo_train(CommandContext& ctx) {
  std::unique_ptr<PromptSource> prompts;
  if (ctx.cfg.rpo_prompt_source == "fixed") {
    Vector target = ctx.cfg.rpo_prompt_target;
    if (static_cast<int>(target.size()) != ctx.cfg.rpo.dim)
      throw ConfigError("rpo.prompt_target dimension must equal rpo.dim");
    prompts = std::make_unique<FixedPromptSource>(target);
  } else if (ctx.cfg.rpo_prompt_source == "gaussian") {
    prompts = std::make_unique<GaussianPromptSource>(ctx.cfg.rpo.dim, ctx.cfg.rpo_prompt_scale);
  } else {
    PreferenceDataset dataset = require_dataset(ctx.cfg);
    prompts = std::make_unique<DatasetPromptSource>(dataset, ctx.cfg.rpo.dim,
                                                    ctx.cfg.rpo_prompt_scale, ctx.cfg.seed);
  }

  RetryPolicy judge_retry = make_retry(ctx.judge_backend_cfg(), ctx.cfg.seed);
  std::unique_ptr<TrajectoryJudge> judge;
  if (ctx.cfg.rpo_judge == "oracle") {
    judge = std::make_unique<CloseToTargetJudge>();
  } else {
    judge = std::make_unique<ChatTrajectoryJudge>(ctx.judge_backend(), judge_retry);
  }

  // a frozen judge conditioned on an explicit rubric, when one is supplied
  StructuredRubric conditioning = optional_rubric(ctx.cfg);
  if (!conditioning.empty()) judge->condition_on(&conditioning);

  RubricProvider provider;
  if (ctx.cfg.rpo.regenerate_rubrics) {
    RetryPolicy pipeline_retry = make_retry(ctx.pipeline_backend_cfg(), ctx.cfg.seed);
    provider = make_rubric_provider(ctx, *judge, pipeline_retry);
  }

  TrainerState state = rpo_train(ctx.cfg.rpo, *prompts, *judge, provider);

  fs::path metrics_path = fs::path(ctx.cfg.report_dir) / "rpo_metrics.jsonl";
  fs::path policy_path = fs::path(ctx.cfg.report_dir) / "rpo_policy.json";
  write_metrics(state.metrics, metrics_path);
  save_policy(state.policy, ctx.cfg.seed, policy_path);

  if (!state.metrics.empty()) {
    const auto& first = state.metrics.front();
    const auto& last = state.metrics.back();
    std::cout << "rpo-train: mean_final_distance " << format_fixed(first.mean_final_distance, 3)
              << " -> " << format_fixed(last.mean_final_distance, 3) << ", win_rate_vs_ref "
              << format_fixed(last.win_rate_vs_ref, 2) << "\n";
  }
  finish(ctx, "rpo-train", {metrics_path.filename().string(), policy_path.filename().string()},
         {{"judge", judge->id()}});
  return 0;
}

int cmd_gradcheck(CommandContext& ctx) {
  double worst = finite_diff_check(ctx.cfg.gradcheck_trials, ctx.cfg.seed);
  fs::path out = fs::path(ctx.cfg.report_dir) / "gradcheck.json";
  {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw DataError("cannot write gradcheck report: " + out.string());
    f << json{{"max_relative_error", worst},
              {"trials", ctx.cfg.gradcheck_trials},
              {"tolerance", ctx.cfg.gradcheck_tolerance}}
             .dump()
      << '\n';
  }
  std::cout << "gradcheck: max relative error " << worst << " over " << ctx.cfg.gradcheck_trials
            << " trials (tolerance " << ctx.cfg.gradcheck_tolerance << ")\n";
  finish(ctx, "gradcheck", {out.filename().string()}, {});
  return worst < ctx.cfg.gradcheck_tolerance ? 0 : 1;
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Config: return 3;
    case ErrorCategory::Data: return 4;
    case ErrorCategory::Backend: return 5;
    case ErrorCategory::Precondition: return 6;
    case ErrorCategory::Internal: return 1;
  }
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"rubric-as-reward engine"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> overrides;
  app.add_option("--config", config_file, "JSON config file");
  app.add_option("--set", overrides, "override a config leaf: key.path=value")
      ->take_all()
      ->expected(0, -1);

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(CommandContext&);
  };
  const Sub subs[] = {
      {"rubric-gen", "generate, verify, refine and structure rubrics", cmd_rubric_gen},
      {"eval", "rubric-conditioned pairwise evaluation", cmd_eval},
      {"bias-ablate", "forward/reverse position-bias ablation", cmd_bias_ablate},
      {"cardinality", "rubric cardinality sweep", cmd_cardinality},
      {"select", "greedy rubric subset selection", cmd_select},
      {"bt-train", "train the Bradley-Terry baseline", cmd_bt_train},
      {"rpo-train", "rubric policy optimization on the Gaussian chain policy", cmd_rpo_train},
      {"gradcheck", "finite-difference verification of analytic gradients", cmd_gradcheck},
  };

  int (*selected)(CommandContext&) = nullptr;
  std::string selected_name;
  for (const auto& sub : subs) {
    CLI::App* s = app.add_subcommand(sub.name, sub.help);
    s->callback([&selected, &selected_name, &sub] {
      selected = sub.fn;
      selected_name = sub.name;
    });
  }

  std::vector<const char*> argv;
  argv.push_back("arr");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    CommandContext ctx = make_context(load_config(config_file, overrides));
    return selected(ctx);
  } catch (const Error& e) {
    std::cerr << "error (" << selected_name << "): " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error (" << selected_name << "): " << e.what() << "\n";
    return 1;
  }
}

}  // namespace arr
