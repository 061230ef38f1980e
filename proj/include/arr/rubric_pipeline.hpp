#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "arr/judge.hpp"
#include "arr/preference.hpp"

namespace arr {

enum class RubricStatus { Pending, Verified, Discarded };

const char* rubric_status_name(RubricStatus status);

struct RefinementStep {
  std::string attempt_text;       // the revised rubric produced by this attempt
  std::string verifier_critique;  // the critique that triggered it
  bool operator==(const RefinementStep&) const = default;
};

// One per-instance rubric with its verification state and refinement history.
// Invariants: Verified => attempts <= T_max; Discarded => attempts == T_max;
// history.size() == attempts.
struct RubricRecord {
  std::string rubric_id;
  std::string source_pair_id;
  std::string text;
  RubricStatus status = RubricStatus::Pending;
  int attempts = 0;
  std::vector<RefinementStep> history;
  bool operator==(const RubricRecord&) const = default;
};

struct PipelineStats {
  int generated = 0;
  int verified_first_try = 0;
  int refined_then_verified = 0;
  int discarded = 0;
  bool operator==(const PipelineStats&) const = default;
};

struct RubricStore {
  std::vector<RubricRecord> records;
  PipelineStats stats;
  bool complete = true;
  std::map<std::string, std::string> template_hashes;

  std::vector<RubricRecord> verified_records() const;
  bool operator==(const RubricStore&) const = default;
};

struct RubricCriterion {
  std::string text;
  std::string source_id;  // provenance rubric_id
  bool operator==(const RubricCriterion&) const = default;
};

struct RubricDimension {
  std::string name;
  std::string operationalization;
  std::vector<RubricCriterion> criteria;
  bool operator==(const RubricDimension&) const = default;
};

// Verified per-instance rubrics consolidated into named dimensions; `rendered`
// is the judge conditioning block and is a pure function of `dimensions`.
struct StructuredRubric {
  std::vector<RubricDimension> dimensions;
  std::string rendered;
  std::vector<std::string> provenance;

  bool empty() const { return dimensions.empty() && rendered.empty(); }
};

struct PipelineConfig {
  int t_max = 5;
  int concurrency_bound = 1;
  std::filesystem::path store_path;
  // optional curated preference exemplars appended to the generation
  // meta-prompt (the guided variant); plain text, injected verbatim
  std::string guide_text;
};

struct VerifyOutcome {
  bool verdict = false;
  std::string critique;
};

// Prompts the backend to decompose the labeled preference into independent,
// verifiable quality axes. Requires pair.label. `guide_text`, when non-empty,
// is appended to the meta-prompt as in-context exemplars.
RubricRecord generate_rubric(const PreferencePair& pair, JudgeBackend& backend,
                             const RetryPolicy& retry = {}, const std::string& guide_text = {});

// Fresh judgment of the pair with the candidate rubric as the only
// conditioning context; true iff it reproduces pair.label.
VerifyOutcome verify_rubric(const PreferencePair& pair, const RubricRecord& record,
                            JudgeBackend& backend, const RetryPolicy& retry = {});

// One refinement round; appends to history and bumps attempts. Requires
// status == Pending and attempts < t_max.
RubricRecord refine_rubric(const PreferencePair& pair, const RubricRecord& record,
                           const std::string& critique, JudgeBackend& backend, int t_max,
                           const RetryPolicy& retry = {});

// generate -> verify -> (refine -> verify)* for every pair; a failure once the
// t_max-th refinement is spent discards the rubric. Persists the store to
// cfg.store_path; on backend exhaustion the partial store is flushed marked
// incomplete and the error rethrown.
RubricStore run_pipeline(const PreferenceDataset& dataset, const PipelineConfig& cfg,
                         JudgeBackend& backend, const RetryPolicy& retry = {});

// Consolidates verified records into a hierarchical rubric via the backend's
// structuring call. Only Verified records contribute.
StructuredRubric structure_rubrics(const RubricStore& store, JudgeBackend& backend,
                                   const RetryPolicy& retry = {});

// Deterministic single-dimension structuring used for subset-selection probes;
// no backend involved.
StructuredRubric flat_structure(const std::vector<RubricRecord>& verified);

std::string render_structured(const std::vector<RubricDimension>& dimensions);

void persist_store(const RubricStore& store, const std::filesystem::path& path);
RubricStore load_store(const std::filesystem::path& path);

// rendered block -> text file; provenance -> JSON sidecar
void export_structured(const StructuredRubric& rubric, const std::filesystem::path& rendered_path,
                       const std::filesystem::path& provenance_path);

// Rebuilds a conditioning rubric from an exported rendered block (dimensions
// are not recovered; judging only needs `rendered`).
StructuredRubric load_structured(const std::filesystem::path& rendered_path,
                                 const std::filesystem::path& provenance_path = {});

}  // namespace arr
