#include "arr/preference.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "arr/util.hpp"

namespace arr {

using nlohmann::json;

Candidate Candidate::text(std::string id, std::string value) {
  return Candidate{std::move(id), TextContent{std::move(value)}};
}

Candidate Candidate::media(std::string id, std::string uri) {
  return Candidate{std::move(id), MediaUri{std::move(uri)}};
}

Candidate Candidate::features(std::string id, std::vector<double> values) {
  return Candidate{std::move(id), FeatureVector{std::move(values)}};
}

const std::vector<double>* Candidate::feature_vector() const {
  if (const auto* fv = std::get_if<FeatureVector>(&content)) return &fv->values;
  return nullptr;
}

PreferenceLabel flip(PreferenceLabel label) {
  return label == PreferenceLabel::FirstPreferred ? PreferenceLabel::SecondPreferred
                                                  : PreferenceLabel::FirstPreferred;
}

PreferencePair swap_pair(const PreferencePair& pair) {
  PreferencePair swapped;
  swapped.id = pair.id;
  swapped.prompt = pair.prompt;
  swapped.first = pair.second;
  swapped.second = pair.first;
  if (pair.label) swapped.label = flip(*pair.label);
  return swapped;
}

namespace {

void validate_candidate(const Candidate& candidate, const char* side) {
  if (const auto* fv = candidate.feature_vector()) {
    if (fv->empty())
      throw DataError(std::string("empty feature_vector on ") + side + " candidate");
    for (double v : *fv) {
      if (!std::isfinite(v))
        throw DataError(std::string("non-finite feature on ") + side + " candidate");
    }
  }
}

json candidate_content_to_json(const Candidate& candidate) {
  json j = json::object();
  if (const auto* t = std::get_if<TextContent>(&candidate.content)) {
    j["text"] = t->value;
  } else if (const auto* m = std::get_if<MediaUri>(&candidate.content)) {
    j["media_uri"] = m->value;
  } else {
    j["feature_vector"] = std::get<FeatureVector>(candidate.content).values;
  }
  return j;
}

// Content-addressed id: the file schema carries no candidate ids, so ids are
// derived from content and survive swaps and round-trips.
std::string content_id(const json& content) {
  return "c:" + to_hex(fnv1a64(content.dump()));
}

Candidate candidate_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw DataError(where + ": candidate must be an object");
  int variants = static_cast<int>(j.contains("text")) +
                 static_cast<int>(j.contains("media_uri")) +
                 static_cast<int>(j.contains("feature_vector"));
  if (variants != 1)
    throw DataError(where + ": candidate must carry exactly one of text, media_uri, feature_vector");

  Candidate c;
  c.id = content_id(j);
  if (j.contains("text")) {
    if (!j["text"].is_string()) throw DataError(where + ": text must be a string");
    c.content = TextContent{j["text"].get<std::string>()};
  } else if (j.contains("media_uri")) {
    if (!j["media_uri"].is_string()) throw DataError(where + ": media_uri must be a string");
    c.content = MediaUri{j["media_uri"].get<std::string>()};
  } else {
    if (!j["feature_vector"].is_array())
      throw DataError(where + ": feature_vector must be an array");
    FeatureVector fv;
    for (const auto& v : j["feature_vector"]) {
      if (!v.is_number()) throw DataError(where + ": feature_vector entries must be numbers");
      fv.values.push_back(v.get<double>());
    }
    c.content = std::move(fv);
  }
  return c;
}

json pair_to_json(const PreferencePair& pair) {
  json j = json::object();
  j["id"] = pair.id;
  j["prompt"] = pair.prompt;
  j["first"] = candidate_content_to_json(pair.first);
  j["second"] = candidate_content_to_json(pair.second);
  if (pair.label) {
    j["label"] = *pair.label == PreferenceLabel::FirstPreferred ? "first" : "second";
  }
  return j;
}

PreferencePair pair_from_json(const json& j, const std::string& where) {
  for (const char* key : {"id", "prompt", "first", "second"}) {
    if (!j.contains(key))
      throw DataError(where + ": record missing '" + key + "'");
  }
  PreferencePair pair;
  if (!j["id"].is_string()) throw DataError(where + ": id must be a string");
  pair.id = j["id"].get<std::string>();
  if (!j["prompt"].is_string()) throw DataError(where + ": prompt must be a string");
  pair.prompt = j["prompt"].get<std::string>();
  pair.first = candidate_from_json(j["first"], where + " (first)");
  pair.second = candidate_from_json(j["second"], where + " (second)");
  if (j.contains("label")) {
    std::string label = j["label"].is_string() ? j["label"].get<std::string>() : "";
    if (label == "first") {
      pair.label = PreferenceLabel::FirstPreferred;
    } else if (label == "second") {
      pair.label = PreferenceLabel::SecondPreferred;
    } else {
      // Ties are rejected rather than guessed at.
      throw DataError(where + ": label must be \"first\" or \"second\", got \"" + label + "\"");
    }
  }
  return pair;
}

}  // namespace

void validate_pair(const PreferencePair& pair) {
  if (pair.first.id == pair.second.id)
    throw DataError("duplicate candidate id in pair '" + pair.id + "'");
  validate_candidate(pair.first, "first");
  validate_candidate(pair.second, "second");
}

PreferenceDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path.string());

  PreferenceDataset dataset;
  dataset.name = path.stem().string();

  std::set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = path.filename().string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": parse failure: " + e.what());
    }
    PreferencePair pair = pair_from_json(j, where);
    if (!seen_ids.insert(pair.id).second)
      throw DataError(where + ": duplicate pair id '" + pair.id + "'");
    validate_pair(pair);
    dataset.pairs.push_back(std::move(pair));
  }
  return dataset;
}

std::string serialize_dataset(const PreferenceDataset& dataset) {
  std::ostringstream out;
  for (const auto& pair : dataset.pairs) out << pair_to_json(pair).dump() << '\n';
  return out.str();
}

void save_dataset(const PreferenceDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  out << serialize_dataset(dataset);
}

}  // namespace arr
