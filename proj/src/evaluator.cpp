#include "arr/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "arr/templates.hpp"
#include "arr/util.hpp"

namespace arr {

using nlohmann::json;

namespace {

void append_presented_candidate(std::vector<UserPart>& parts, const Candidate& candidate,
                                const std::string& slot, const std::string& anchor) {
  if (const auto* t = std::get_if<TextContent>(&candidate.content)) {
    parts.push_back(UserPart::text("Candidate " + slot + ":\n" + t->value));
  } else if (const auto* m = std::get_if<MediaUri>(&candidate.content)) {
    parts.push_back(UserPart::text("Candidate " + slot + " (image):"));
    parts.push_back(UserPart::image(m->value));
  } else {
    const auto& fv = std::get<FeatureVector>(candidate.content).values;
    parts.push_back(
        UserPart::text("Candidate " + slot + ":\n" + render_feature_anchor(anchor, fv)));
  }
}

}  // namespace

Verdict judge_pair(const PreferencePair& pair, const StructuredRubric& rubric, Order order,
                   JudgeBackend& backend, const RetryPolicy& retry) {
  const PreferencePair presented = order == Order::Forward ? pair : swap_pair(pair);

  JudgeRequest req;
  req.system_text = templates::kEvaluate;
  if (!rubric.rendered.empty()) req.system_text += "\n\n" + rubric.rendered;
  req.user_parts.push_back(UserPart::text("PROMPT: " + presented.prompt));
  append_presented_candidate(req.user_parts, presented.first, "FIRST", "FEATURES_A");
  append_presented_candidate(req.user_parts, presented.second, "SECOND", "FEATURES_B");
  req.request_tag = "eval:" + pair.id + ":" + order_name(order);

  JudgeResponse resp = chat_complete(backend, req, retry);
  Verdict verdict = parse_verdict(resp.text);

  // map back to canonical (pre-swap) coordinates
  if (order == Order::Reverse) verdict.preferred = flip(verdict.preferred);
  return verdict;
}

namespace {

struct JudgmentPlan {
  std::size_t pair_index;
  Order order;
};

std::vector<PairJudgment> run_judgments(const PreferenceDataset& dataset,
                                        const StructuredRubric& rubric,
                                        const std::vector<Order>& orders,
                                        JudgeBackend& backend, const RetryPolicy& retry,
                                        int concurrency) {
  for (const auto& pair : dataset.pairs) {
    if (!pair.label)
      throw PreconditionError("evaluation requires labeled pairs; pair '" + pair.id +
                              "' is unlabeled");
  }
  if (dataset.pairs.empty()) throw PreconditionError("evaluation requires a non-empty dataset");

  std::vector<JudgmentPlan> plan;
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i)
    for (Order order : orders) plan.push_back({i, order});

  std::vector<PairJudgment> results(plan.size());
  parallel_for(plan.size(), concurrency, [&](std::size_t j) {
    const PreferencePair& pair = dataset.pairs[plan[j].pair_index];
    PairJudgment out;
    out.pair_id = pair.id;
    out.order = plan[j].order;
    try {
      Verdict v = judge_pair(pair, rubric, plan[j].order, backend, retry);
      out.verdict = v.preferred;
      out.correct = v.preferred == side_of(*pair.label);
    } catch (const Error& e) {
      out.error = e.what();
    }
    results[j] = std::move(out);
  });
  return results;
}

double bootstrap_std(const std::vector<PairJudgment>& judgments, int resamples, uint64_t seed) {
  if (resamples <= 1) return 0.0;

  // group judgment outcomes by pair so resampling stays pair-level
  std::vector<std::pair<int, int>> pair_counts;  // (correct, judged)
  {
    std::map<std::string, std::size_t> index;
    for (const auto& j : judgments) {
      if (!index.count(j.pair_id)) {
        index[j.pair_id] = pair_counts.size();
        pair_counts.emplace_back(0, 0);
      }
      if (!j.verdict) continue;
      auto& [correct, judged] = pair_counts[index[j.pair_id]];
      correct += j.correct ? 1 : 0;
      judged += 1;
    }
  }

  Rng rng(mix_seed({seed, fnv1a64("bootstrap")}));
  std::vector<double> accs;
  accs.reserve(resamples);
  for (int r = 0; r < resamples; ++r) {
    long correct = 0, judged = 0;
    for (std::size_t i = 0; i < pair_counts.size(); ++i) {
      const auto& [c, n] = pair_counts[rng.below(pair_counts.size())];
      correct += c;
      judged += n;
    }
    if (judged > 0) accs.push_back(static_cast<double>(correct) / judged);
  }
  if (accs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double a : accs) mean += a;
  mean /= accs.size();
  double var = 0.0;
  for (double a : accs) var += (a - mean) * (a - mean);
  var /= (accs.size() - 1);
  return std::sqrt(var);
}

}  // namespace

EvalReport evaluate_dataset(const PreferenceDataset& dataset, const StructuredRubric& rubric,
                            const EvalProtocol& protocol, JudgeBackend& backend,
                            const RetryPolicy& retry) {
  std::vector<Order> orders{Order::Forward};
  if (protocol.orders == OrderPolicy::ForwardAndReverse) orders.push_back(Order::Reverse);

  EvalReport report;
  report.per_pair = run_judgments(dataset, rubric, orders, backend, retry, protocol.concurrency);

  int correct = 0;
  for (const auto& j : report.per_pair) {
    if (j.verdict) {
      ++report.judged;
      correct += j.correct ? 1 : 0;
    } else {
      ++report.errored;
    }
  }
  if (report.judged == 0)
    throw BackendError(BackendErrorKind::ExhaustedRetries, "evaluate",
                       "every judgment errored; no accuracy to report");
  report.accuracy = static_cast<double>(correct) / report.judged;
  report.accuracy_std =
      bootstrap_std(report.per_pair, protocol.bootstrap_resamples, protocol.seed);
  return report;
}

BiasReport make_bias_report(double forward_acc_pct, double reverse_acc_pct) {
  BiasReport report;
  report.forward_acc = forward_acc_pct;
  report.reverse_acc = reverse_acc_pct;
  report.avg = (forward_acc_pct + reverse_acc_pct) / 2.0;
  report.delta = forward_acc_pct - reverse_acc_pct;
  return report;
}

BiasReport bias_ablation(const PreferenceDataset& dataset, const StructuredRubric& rubric,
                         JudgeBackend& backend, const EvalProtocol& protocol,
                         const RetryPolicy& retry) {
  auto accuracy_pct = [&](Order order) {
    auto judgments =
        run_judgments(dataset, rubric, {order}, backend, retry, protocol.concurrency);
    long correct = 0, judged = 0;
    for (const auto& j : judgments) {
      if (!j.verdict) continue;
      ++judged;
      correct += j.correct ? 1 : 0;
    }
    if (judged == 0)
      throw BackendError(BackendErrorKind::ExhaustedRetries, "bias-ablate",
                         "every judgment errored in one presentation order");
    return 100.0 * static_cast<double>(correct) / static_cast<double>(judged);
  };

  return make_bias_report(accuracy_pct(Order::Forward), accuracy_pct(Order::Reverse));
}

// ---------------------------------------------------------------------------
// Greedy subset selection

namespace {

int probe_objective(const std::vector<RubricRecord>& subset, const PreferenceDataset& tuning,
                    JudgeBackend& backend, const RetryPolicy& retry, int concurrency) {
  StructuredRubric probe = flat_structure(subset);
  std::vector<int> correct(tuning.pairs.size(), 0);
  parallel_for(tuning.pairs.size(), concurrency, [&](std::size_t i) {
    const PreferencePair& pair = tuning.pairs[i];
    try {
      Verdict v = judge_pair(pair, probe, Order::Forward, backend, retry);
      correct[i] = v.preferred == side_of(*pair.label) ? 1 : 0;
    } catch (const Error&) {
      correct[i] = 0;  // an errored probe judgment never counts as correct
    }
  });
  int total = 0;
  for (int c : correct) total += c;
  return total;
}

SelectionTrace greedy_select(const RubricStore& candidates, const PreferenceDataset& tuning,
                             int k, JudgeBackend& backend, const RetryPolicy& retry) {
  if (k < 1) throw PreconditionError("subset selection requires K >= 1");
  for (const auto& pair : tuning.pairs) {
    if (!pair.label)
      throw PreconditionError("subset selection requires a labeled tuning set");
  }

  std::vector<RubricRecord> pool = candidates.verified_records();
  std::sort(pool.begin(), pool.end(),
            [](const RubricRecord& a, const RubricRecord& b) { return a.rubric_id < b.rubric_id; });
  if (static_cast<int>(pool.size()) < k)
    throw PreconditionError("subset selection needs at least " + std::to_string(k) +
                            " verified rubrics, store has " + std::to_string(pool.size()));

  SelectionTrace trace;
  std::vector<RubricRecord> selected;
  std::vector<bool> used(pool.size(), false);

  for (int step = 0; step < k; ++step) {
    int best_index = -1;
    int best_objective = -1;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (used[c]) continue;
      std::vector<RubricRecord> candidate_set = selected;
      candidate_set.push_back(pool[c]);
      int objective =
          probe_objective(candidate_set, tuning, backend, retry, /*concurrency=*/1);
      // strict > keeps the first (lowest rubric_id) on ties
      if (objective > best_objective) {
        best_objective = objective;
        best_index = static_cast<int>(c);
      }
    }
    used[best_index] = true;
    selected.push_back(pool[best_index]);
    trace.chosen_ids.push_back(pool[best_index].rubric_id);
    trace.objective_values.push_back(best_objective);
  }
  return trace;
}

}  // namespace

SelectionTrace select_rubric_subset_trace(const RubricStore& candidates,
                                          const PreferenceDataset& tuning_set, int k,
                                          JudgeBackend& backend, const RetryPolicy& retry) {
  return greedy_select(candidates, tuning_set, k, backend, retry);
}

StructuredRubric select_rubric_subset(const RubricStore& candidates,
                                      const PreferenceDataset& tuning_set, int k,
                                      JudgeBackend& backend, const RetryPolicy& retry) {
  SelectionTrace trace = greedy_select(candidates, tuning_set, k, backend, retry);

  std::set<std::string> chosen(trace.chosen_ids.begin(), trace.chosen_ids.end());
  RubricStore winners;
  winners.template_hashes = candidates.template_hashes;
  for (const auto& r : candidates.records) {
    if (chosen.count(r.rubric_id)) winners.records.push_back(r);
  }
  return structure_rubrics(winners, backend, retry);
}

std::vector<SweepPoint> cardinality_sweep(const PreferenceDataset& dataset,
                                          const RubricStore& store, const std::vector<int>& ks,
                                          JudgeBackend& backend, const EvalProtocol& protocol,
                                          const RetryPolicy& retry) {
  int verified = static_cast<int>(store.verified_records().size());
  for (int k : ks) {
    if (k > verified)
      throw PreconditionError("cardinality sweep needs at least " + std::to_string(k) +
                              " verified rubrics, store has " + std::to_string(verified));
  }

  std::vector<SweepPoint> points;
  for (int k : ks) {
    StructuredRubric rubric = select_rubric_subset(store, dataset, k, backend, retry);
    EvalProtocol sweep_protocol = protocol;
    sweep_protocol.orders = OrderPolicy::ForwardAndReverse;
    sweep_protocol.bootstrap_resamples = 0;
    EvalReport report = evaluate_dataset(dataset, rubric, sweep_protocol, backend, retry);
    points.push_back(SweepPoint{k, report.accuracy});
  }
  return points;
}

// ---------------------------------------------------------------------------
// Report formatting and export

std::string format_bias_table(const BiasReport& report) {
  std::ostringstream out;
  out << "Fwd    Rev    Avg    Delta\n";
  out << format_fixed(report.forward_acc, 1) << "  " << format_fixed(report.reverse_acc, 1)
      << "  " << format_fixed(report.avg, 1) << "  " << format_fixed(report.delta, 1) << "\n";
  return out.str();
}

std::string format_sweep_table(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "K      Accuracy\n";
  for (const auto& p : points)
    out << p.k << (p.k < 10 ? "      " : "     ") << format_fixed(100.0 * p.accuracy, 1) << "\n";
  return out.str();
}

void export_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write eval report: " + path.string());
  for (const auto& j : report.per_pair) {
    json record{{"kind", "judgment"},
                {"pair_id", j.pair_id},
                {"order", order_name(j.order)}};
    if (j.verdict) {
      record["verdict"] = *j.verdict == Side::First ? "first" : "second";
      record["correct"] = j.correct;
    } else {
      record["error"] = j.error;
    }
    out << record.dump() << '\n';
  }
  json summary{{"kind", "summary"},
               {"accuracy", report.accuracy},
               {"accuracy_std", report.accuracy_std},
               {"judged", report.judged},
               {"errored", report.errored}};
  out << summary.dump() << '\n';
}

}  // namespace arr
