#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "arr/errors.hpp"

namespace arr {

struct TextContent {
  std::string value;
  bool operator==(const TextContent&) const = default;
};

struct MediaUri {
  std::string value;
  bool operator==(const MediaUri&) const = default;
};

struct FeatureVector {
  std::vector<double> values;
  bool operator==(const FeatureVector&) const = default;
};

// Exactly one content variant by construction. Images travel as URIs and
// synthetic test candidates as feature vectors; nothing in the core ever
// inspects pixels.
using CandidateContent = std::variant<TextContent, MediaUri, FeatureVector>;

struct Candidate {
  std::string id;
  CandidateContent content;

  static Candidate text(std::string id, std::string value);
  static Candidate media(std::string id, std::string uri);
  static Candidate features(std::string id, std::vector<double> values);

  // nullptr unless the feature-vector variant is populated
  const std::vector<double>* feature_vector() const;

  bool operator==(const Candidate&) const = default;
};

enum class PreferenceLabel { FirstPreferred, SecondPreferred };

PreferenceLabel flip(PreferenceLabel label);

struct PreferencePair {
  std::string id;
  std::string prompt;
  Candidate first;
  Candidate second;
  std::optional<PreferenceLabel> label;

  bool operator==(const PreferencePair&) const = default;
};

struct PreferenceDataset {
  std::string name;
  std::vector<PreferencePair> pairs;

  bool operator==(const PreferenceDataset&) const = default;
};

// Exchanges the candidates and flips the label when present; id preserved.
// Involution: swap_pair(swap_pair(p)) == p.
PreferencePair swap_pair(const PreferencePair& pair);

// Throws DataError naming the first violated invariant.
void validate_pair(const PreferencePair& pair);

// Newline-delimited records, one JSON object per line (UTF-8, LF). Candidate
// ids are content-addressed on load, so load/serialize round-trips are
// byte-identical and stable under swapping.
PreferenceDataset load_dataset(const std::filesystem::path& path);

std::string serialize_dataset(const PreferenceDataset& dataset);
void save_dataset(const PreferenceDataset& dataset, const std::filesystem::path& path);

}  // namespace arr
