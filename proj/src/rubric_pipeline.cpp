#include "arr/rubric_pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "arr/templates.hpp"
#include "arr/util.hpp"

namespace arr {

using nlohmann::json;

const char* rubric_status_name(RubricStatus status) {
  switch (status) {
    case RubricStatus::Pending: return "pending";
    case RubricStatus::Verified: return "verified";
    case RubricStatus::Discarded: return "discarded";
  }
  return "pending";
}

std::vector<RubricRecord> RubricStore::verified_records() const {
  std::vector<RubricRecord> out;
  for (const auto& r : records)
    if (r.status == RubricStatus::Verified) out.push_back(r);
  return out;
}

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void append_candidate(std::vector<UserPart>& parts, const Candidate& candidate,
                      const std::string& role_label, const std::string& anchor_name) {
  if (const auto* t = std::get_if<TextContent>(&candidate.content)) {
    parts.push_back(UserPart::text(role_label + ":\n" + t->value));
  } else if (const auto* m = std::get_if<MediaUri>(&candidate.content)) {
    parts.push_back(UserPart::text(role_label + " (image):"));
    parts.push_back(UserPart::image(m->value));
  } else {
    const auto& fv = std::get<FeatureVector>(candidate.content).values;
    parts.push_back(UserPart::text(role_label + ":\n" + render_feature_anchor(anchor_name, fv)));
  }
}

void append_labeled_pair(std::vector<UserPart>& parts, const PreferencePair& pair) {
  const bool first_preferred = *pair.label == PreferenceLabel::FirstPreferred;
  const Candidate& preferred = first_preferred ? pair.first : pair.second;
  const Candidate& dispreferred = first_preferred ? pair.second : pair.first;
  parts.push_back(UserPart::text("PROMPT: " + pair.prompt));
  append_candidate(parts, preferred, "PREFERRED output", "FEATURES_PREFERRED");
  append_candidate(parts, dispreferred, "DISPREFERRED output", "FEATURES_DISPREFERRED");
}

}  // namespace

RubricRecord generate_rubric(const PreferencePair& pair, JudgeBackend& backend,
                             const RetryPolicy& retry, const std::string& guide_text) {
  if (!pair.label)
    throw PreconditionError("rubric generation requires a labeled pair (pair '" + pair.id + "')");

  JudgeRequest req;
  req.system_text = templates::kGenerate;
  if (!guide_text.empty())
    req.system_text += "\n\nCurated preference exemplars to anchor your criteria:\n" + guide_text;
  append_labeled_pair(req.user_parts, pair);
  req.request_tag = "gen:" + pair.id;

  JudgeResponse resp = chat_complete(backend, req, retry);
  if (trim_copy(resp.text).empty())
    throw DataError("empty model output for rubric generation on pair '" + pair.id + "'");

  RubricRecord record;
  record.rubric_id = "r-" + pair.id;
  record.source_pair_id = pair.id;
  record.text = resp.text;
  record.status = RubricStatus::Pending;
  record.attempts = 0;
  return record;
}

VerifyOutcome verify_rubric(const PreferencePair& pair, const RubricRecord& record,
                            JudgeBackend& backend, const RetryPolicy& retry) {
  if (trim_copy(record.text).empty())
    throw PreconditionError("cannot verify an empty rubric (pair '" + pair.id + "')");
  if (!pair.label)
    throw PreconditionError("verification requires a labeled pair (pair '" + pair.id + "')");

  // Fresh call conditioned on the candidate rubric alone; the generator's
  // rationale never reaches the verifier.
  JudgeRequest req;
  req.system_text = templates::kVerify;
  req.user_parts.push_back(
      UserPart::text("RUBRIC (sole evaluation protocol):\n" + record.text));
  req.user_parts.push_back(UserPart::text("PROMPT: " + pair.prompt));
  append_candidate(req.user_parts, pair.first, "Candidate FIRST", "FEATURES_A");
  append_candidate(req.user_parts, pair.second, "Candidate SECOND", "FEATURES_B");
  req.request_tag = "verify:" + pair.id + ":" + std::to_string(record.attempts);

  JudgeResponse resp = chat_complete(backend, req, retry);
  Verdict verdict = parse_verdict(resp.text);

  VerifyOutcome outcome;
  outcome.verdict = verdict.preferred == side_of(*pair.label);
  outcome.critique = verdict.rationale.empty()
                         ? std::string("verifier preferred the ") +
                               (verdict.preferred == Side::First ? "first" : "second") +
                               " candidate"
                         : verdict.rationale;
  return outcome;
}

RubricRecord refine_rubric(const PreferencePair& pair, const RubricRecord& record,
                           const std::string& critique, JudgeBackend& backend, int t_max,
                           const RetryPolicy& retry) {
  if (record.status != RubricStatus::Pending)
    throw PreconditionError("can only refine a pending rubric ('" + record.rubric_id + "')");
  if (record.attempts >= t_max)
    throw PreconditionError("refinement budget exhausted for rubric '" + record.rubric_id +
                            "' (attempts=" + std::to_string(record.attempts) + ")");
  if (!pair.label)
    throw PreconditionError("refinement requires a labeled pair (pair '" + pair.id + "')");

  JudgeRequest req;
  req.system_text = templates::kRefine;
  append_labeled_pair(req.user_parts, pair);
  req.user_parts.push_back(UserPart::text("CURRENT RUBRIC:\n" + record.text));
  req.user_parts.push_back(UserPart::text("VERIFIER CRITIQUE:\n" + critique));
  req.request_tag = "refine:" + pair.id + ":" + std::to_string(record.attempts);

  JudgeResponse resp = chat_complete(backend, req, retry);
  if (trim_copy(resp.text).empty())
    throw DataError("empty model output for rubric refinement on pair '" + pair.id + "'");

  RubricRecord refined = record;
  refined.text = resp.text;
  refined.attempts = record.attempts + 1;
  refined.history.push_back(RefinementStep{resp.text, critique});
  return refined;
}

RubricStore run_pipeline(const PreferenceDataset& dataset, const PipelineConfig& cfg,
                         JudgeBackend& backend, const RetryPolicy& retry) {
  if (cfg.t_max < 1) throw ConfigError("pipeline t_max must be >= 1");
  for (const auto& pair : dataset.pairs) {
    if (!pair.label)
      throw PreconditionError("pipeline requires labeled pairs; pair '" + pair.id +
                              "' is unlabeled");
  }

  std::vector<std::optional<RubricRecord>> slots(dataset.pairs.size());

  auto process_pair = [&](std::size_t i) {
    const PreferencePair& pair = dataset.pairs[i];
    RubricRecord record = generate_rubric(pair, backend, retry, cfg.guide_text);
    for (;;) {
      VerifyOutcome outcome = verify_rubric(pair, record, backend, retry);
      if (outcome.verdict) {
        record.status = RubricStatus::Verified;
        break;
      }
      record = refine_rubric(pair, record, outcome.critique, backend, cfg.t_max, retry);
      // the t_max-th refinement exhausts the budget: discard
      if (record.attempts == cfg.t_max) {
        record.status = RubricStatus::Discarded;
        break;
      }
    }
    slots[i] = std::move(record);
  };

  auto build_store = [&](bool complete) {
    RubricStore store;
    store.complete = complete;
    store.template_hashes = templates::hashes();
    for (auto& slot : slots) {
      if (!slot) continue;
      const RubricRecord& r = *slot;
      ++store.stats.generated;
      if (r.status == RubricStatus::Verified) {
        if (r.attempts == 0) {
          ++store.stats.verified_first_try;
        } else {
          ++store.stats.refined_then_verified;
        }
      } else {
        ++store.stats.discarded;
      }
      store.records.push_back(r);
    }
    return store;
  };

  try {
    parallel_for(dataset.pairs.size(), cfg.concurrency_bound, process_pair);
  } catch (const BackendError&) {
    RubricStore partial = build_store(/*complete=*/false);
    if (!cfg.store_path.empty()) persist_store(partial, cfg.store_path);
    throw;
  }

  RubricStore store = build_store(/*complete=*/true);
  if (!cfg.store_path.empty()) persist_store(store, cfg.store_path);
  return store;
}

// ---------------------------------------------------------------------------
// Structuring

namespace {

// first fenced block, ```json or bare ```
std::optional<std::string> extract_fenced_block(const std::string& text) {
  std::size_t open = text.find("```");
  if (open == std::string::npos) return std::nullopt;
  std::size_t body_start = text.find('\n', open);
  if (body_start == std::string::npos) return std::nullopt;
  ++body_start;
  std::size_t close = text.find("```", body_start);
  if (close == std::string::npos) return std::nullopt;
  return text.substr(body_start, close - body_start);
}

std::vector<RubricDimension> parse_structure_block(const std::string& reply,
                                                   const std::set<std::string>& verified_ids) {
  auto block = extract_fenced_block(reply);
  if (!block)
    throw DataError("structuring output unparseable: no fenced block found");

  json j;
  try {
    j = json::parse(*block);
  } catch (const json::exception& e) {
    throw DataError(std::string("structuring output unparseable: ") + e.what());
  }
  if (!j.contains("dimensions") || !j["dimensions"].is_array() || j["dimensions"].empty())
    throw DataError("structuring output unparseable: missing non-empty 'dimensions' array");

  std::vector<RubricDimension> dims;
  for (const auto& dj : j["dimensions"]) {
    RubricDimension dim;
    dim.name = dj.value("name", "");
    dim.operationalization = dj.value("operationalization", "");
    if (dim.name.empty())
      throw DataError("structuring output unparseable: dimension without a name");
    if (!dj.contains("criteria") || !dj["criteria"].is_array())
      throw DataError("structuring output unparseable: dimension '" + dim.name +
                      "' has no criteria array");
    for (const auto& cj : dj["criteria"]) {
      RubricCriterion criterion;
      criterion.text = cj.value("text", "");
      criterion.source_id = cj.value("source_id", "");
      if (criterion.text.empty())
        throw DataError("structuring output unparseable: empty criterion text in '" +
                        dim.name + "'");
      if (!verified_ids.count(criterion.source_id))
        throw DataError("structuring output names unknown source_id '" + criterion.source_id +
                        "'");
      dim.criteria.push_back(std::move(criterion));
    }
    dims.push_back(std::move(dim));
  }
  return dims;
}

}  // namespace

std::string render_structured(const std::vector<RubricDimension>& dimensions) {
  std::ostringstream out;
  out << "EVALUATION RUBRIC\n";
  int n = 0;
  for (const auto& dim : dimensions) {
    out << ++n << ". " << dim.name << "\n";
    if (!dim.operationalization.empty()) out << "   Focus: " << dim.operationalization << "\n";
    for (const auto& criterion : dim.criteria) out << "   - " << criterion.text << "\n";
  }
  return out.str();
}

StructuredRubric structure_rubrics(const RubricStore& store, JudgeBackend& backend,
                                   const RetryPolicy& retry) {
  std::vector<RubricRecord> verified = store.verified_records();
  if (verified.empty())
    throw PreconditionError("cannot structure an empty verified rubric set");

  std::set<std::string> ids;
  json anchor = json::array();
  std::ostringstream listing;
  listing << "Verified rubrics:\n";
  for (const auto& r : verified) {
    ids.insert(r.rubric_id);
    listing << "- [" << r.rubric_id << "] " << trim_copy(r.text) << "\n";
    anchor.push_back({{"id", r.rubric_id}, {"text", r.text}});
  }

  JudgeRequest req;
  req.system_text = templates::kStructure;
  req.user_parts.push_back(UserPart::text(listing.str()));
  req.user_parts.push_back(UserPart::text("RUBRICS_JSON: " + anchor.dump()));
  req.request_tag = "struct:" + std::to_string(verified.size());

  JudgeResponse resp = chat_complete(backend, req, retry);

  StructuredRubric result;
  result.dimensions = parse_structure_block(resp.text, ids);
  result.rendered = render_structured(result.dimensions);
  result.provenance.assign(ids.begin(), ids.end());
  return result;
}

StructuredRubric flat_structure(const std::vector<RubricRecord>& verified) {
  StructuredRubric result;
  if (verified.empty()) return result;

  RubricDimension dim;
  dim.name = "Selected criteria";
  dim.operationalization = "Criteria selected for judge conditioning.";
  std::set<std::string> ids;
  for (const auto& r : verified) {
    dim.criteria.push_back(RubricCriterion{trim_copy(r.text), r.rubric_id});
    ids.insert(r.rubric_id);
  }
  result.dimensions.push_back(std::move(dim));
  result.rendered = render_structured(result.dimensions);
  result.provenance.assign(ids.begin(), ids.end());
  return result;
}

// ---------------------------------------------------------------------------
// Store persistence

namespace {

constexpr int kStoreSchemaVersion = 1;

json record_to_json(const RubricRecord& r) {
  json h = json::array();
  for (const auto& step : r.history)
    h.push_back({{"attempt_text", step.attempt_text},
                 {"verifier_critique", step.verifier_critique}});
  return json{{"kind", "rubric"},
              {"rubric_id", r.rubric_id},
              {"source_pair_id", r.source_pair_id},
              {"text", r.text},
              {"status", rubric_status_name(r.status)},
              {"attempts", r.attempts},
              {"history", std::move(h)}};
}

RubricStatus status_from_name(const std::string& name, const std::string& where) {
  if (name == "pending") return RubricStatus::Pending;
  if (name == "verified") return RubricStatus::Verified;
  if (name == "discarded") return RubricStatus::Discarded;
  throw DataError(where + ": unknown rubric status '" + name + "'");
}

}  // namespace

void persist_store(const RubricStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write rubric store: " + path.string());
  for (const auto& r : store.records) out << record_to_json(r).dump() << '\n';

  json stats{{"kind", "stats"},
             {"schema_version", kStoreSchemaVersion},
             {"count", static_cast<int>(store.records.size())},
             {"complete", store.complete},
             {"stats",
              {{"generated", store.stats.generated},
               {"verified_first_try", store.stats.verified_first_try},
               {"refined_then_verified", store.stats.refined_then_verified},
               {"discarded", store.stats.discarded}}},
             {"template_hashes", store.template_hashes}};
  out << stats.dump() << '\n';
}

RubricStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open rubric store: " + path.string());

  RubricStore store;
  bool saw_stats = false;
  std::size_t offset = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    if (saw_stats)
      throw DataError("rubric store has records after the stats line (byte offset " +
                      std::to_string(line_start) + ")");

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("rubric store parse failure (byte offset " + std::to_string(line_start) +
                      "): " + e.what());
    }
    std::string where = "byte offset " + std::to_string(line_start);
    std::string kind = j.value("kind", "");
    if (kind == "rubric") {
      RubricRecord r;
      r.rubric_id = j.at("rubric_id").get<std::string>();
      r.source_pair_id = j.at("source_pair_id").get<std::string>();
      r.text = j.at("text").get<std::string>();
      r.status = status_from_name(j.at("status").get<std::string>(), where);
      r.attempts = j.at("attempts").get<int>();
      for (const auto& hj : j.at("history")) {
        r.history.push_back(RefinementStep{hj.at("attempt_text").get<std::string>(),
                                           hj.at("verifier_critique").get<std::string>()});
      }
      if (static_cast<int>(r.history.size()) != r.attempts)
        throw DataError(where + ": history length " + std::to_string(r.history.size()) +
                        " does not match attempts " + std::to_string(r.attempts));
      store.records.push_back(std::move(r));
    } else if (kind == "stats") {
      int version = j.value("schema_version", -1);
      if (version != kStoreSchemaVersion)
        throw DataError(where + ": unsupported store schema_version " +
                        std::to_string(version));
      int count = j.value("count", -1);
      if (count != static_cast<int>(store.records.size()))
        throw DataError("truncated rubric store: stats expected " + std::to_string(count) +
                        " records, found " + std::to_string(store.records.size()) +
                        " (byte offset " + std::to_string(line_start) + ")");
      store.complete = j.value("complete", true);
      const json& s = j.at("stats");
      store.stats.generated = s.value("generated", 0);
      store.stats.verified_first_try = s.value("verified_first_try", 0);
      store.stats.refined_then_verified = s.value("refined_then_verified", 0);
      store.stats.discarded = s.value("discarded", 0);
      if (j.contains("template_hashes")) {
        for (auto it = j["template_hashes"].begin(); it != j["template_hashes"].end(); ++it)
          store.template_hashes[it.key()] = it.value().get<std::string>();
      }
      saw_stats = true;
    } else {
      throw DataError(where + ": unknown record kind '" + kind + "'");
    }
  }

  if (!saw_stats)
    throw DataError("truncated rubric store: missing trailing stats record (byte offset " +
                    std::to_string(offset) + ")");
  return store;
}

void export_structured(const StructuredRubric& rubric, const std::filesystem::path& rendered_path,
                       const std::filesystem::path& provenance_path) {
  std::ofstream rendered(rendered_path, std::ios::binary);
  if (!rendered) throw DataError("cannot write structured rubric: " + rendered_path.string());
  rendered << rubric.rendered;

  json criteria = json::array();
  for (const auto& dim : rubric.dimensions) {
    for (const auto& c : dim.criteria)
      criteria.push_back(
          {{"dimension", dim.name}, {"text", c.text}, {"source_id", c.source_id}});
  }
  json sidecar{{"provenance", rubric.provenance}, {"criteria", std::move(criteria)}};
  std::ofstream prov(provenance_path, std::ios::binary);
  if (!prov) throw DataError("cannot write provenance sidecar: " + provenance_path.string());
  prov << sidecar.dump(2) << '\n';
}

StructuredRubric load_structured(const std::filesystem::path& rendered_path,
                                 const std::filesystem::path& provenance_path) {
  std::ifstream rendered(rendered_path, std::ios::binary);
  if (!rendered) throw DataError("cannot open structured rubric: " + rendered_path.string());
  std::ostringstream buf;
  buf << rendered.rdbuf();

  StructuredRubric rubric;
  rubric.rendered = buf.str();
  if (!provenance_path.empty()) {
    std::ifstream prov(provenance_path, std::ios::binary);
    if (!prov) throw DataError("cannot open provenance sidecar: " + provenance_path.string());
    json j;
    try {
      prov >> j;
    } catch (const json::exception& e) {
      throw DataError("provenance sidecar parse failure: " + std::string(e.what()));
    }
    for (const auto& id : j.value("provenance", json::array()))
      rubric.provenance.push_back(id.get<std::string>());
  }
  return rubric;
}

}  // namespace arr
