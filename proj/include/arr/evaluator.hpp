#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arr/judge.hpp"
#include "arr/preference.hpp"
#include "arr/rubric_pipeline.hpp"

namespace arr {

enum class OrderPolicy { ForwardOnly, ForwardAndReverse };

struct EvalProtocol {
  OrderPolicy orders = OrderPolicy::ForwardAndReverse;
  int cardinality_k = 5;
  int bootstrap_resamples = 1000;
  uint64_t seed = 0;
  int concurrency = 1;
};

struct PairJudgment {
  std::string pair_id;
  Order order = Order::Forward;
  std::optional<Side> verdict;  // canonical coordinates; nullopt when errored
  bool correct = false;
  std::string error;
};

// accuracy = correct / judged; judged + errored = attempted judgments
struct EvalReport {
  double accuracy = 0.0;
  double accuracy_std = 0.0;
  std::vector<PairJudgment> per_pair;
  int judged = 0;
  int errored = 0;
};

// Forward/reverse accuracies in percentage points, matching the published
// Fwd/Rev/Avg/Delta table layout. avg = (fwd+rev)/2, delta = fwd-rev.
struct BiasReport {
  double forward_acc = 0.0;
  double reverse_acc = 0.0;
  double avg = 0.0;
  double delta = 0.0;
};

BiasReport make_bias_report(double forward_acc_pct, double reverse_acc_pct);

// Judges the pair as presented in `order`, conditioned on the rubric's
// rendered block; the returned verdict is mapped back to canonical
// (pre-swap) coordinates so callers compare against labels directly.
Verdict judge_pair(const PreferencePair& pair, const StructuredRubric& rubric, Order order,
                   JudgeBackend& backend, const RetryPolicy& retry = {});

// Judges every labeled pair under each configured order. Errored judgments
// are excluded from the accuracy denominator and reported separately; throws
// only if every judgment errored. accuracy_std comes from a seeded pair-level
// percentile bootstrap when bootstrap_resamples > 0.
EvalReport evaluate_dataset(const PreferenceDataset& dataset, const StructuredRubric& rubric,
                            const EvalProtocol& protocol, JudgeBackend& backend,
                            const RetryPolicy& retry = {});

BiasReport bias_ablation(const PreferenceDataset& dataset, const StructuredRubric& rubric,
                         JudgeBackend& backend, const EvalProtocol& protocol = {},
                         const RetryPolicy& retry = {});

// Greedy forward selection of K verified rubrics maximizing correct judgments
// on the tuning set; ties break toward the lower rubric_id. The winners are
// structured via the backend.
StructuredRubric select_rubric_subset(const RubricStore& candidates,
                                      const PreferenceDataset& tuning_set, int k,
                                      JudgeBackend& backend, const RetryPolicy& retry = {});

// Greedy step trace for the selection above (probe objective per step).
struct SelectionTrace {
  std::vector<std::string> chosen_ids;
  std::vector<int> objective_values;  // correct count after each step
};
SelectionTrace select_rubric_subset_trace(const RubricStore& candidates,
                                          const PreferenceDataset& tuning_set, int k,
                                          JudgeBackend& backend, const RetryPolicy& retry = {});

struct SweepPoint {
  int k = 0;
  double accuracy = 0.0;  // fraction in [0,1], forward/reverse averaged
};

std::vector<SweepPoint> cardinality_sweep(const PreferenceDataset& dataset,
                                          const RubricStore& store, const std::vector<int>& ks,
                                          JudgeBackend& backend, const EvalProtocol& protocol = {},
                                          const RetryPolicy& retry = {});

// plain-text tables (percent, one decimal)
std::string format_bias_table(const BiasReport& report);
std::string format_sweep_table(const std::vector<SweepPoint>& points);

// newline-delimited per-pair records plus a trailing summary record
void export_eval_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace arr
