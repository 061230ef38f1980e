#pragma once

// Shared synthetic fixtures for the test suites.

#include <string>
#include <vector>

#include "arr/judge.hpp"
#include "arr/preference.hpp"
#include "arr/rubric_pipeline.hpp"
#include "arr/util.hpp"

namespace arr::testfx {

inline PreferencePair feature_pair(const std::string& id, std::vector<double> f1,
                                   std::vector<double> f2,
                                   std::optional<PreferenceLabel> label = std::nullopt) {
  PreferencePair pair;
  pair.id = id;
  pair.prompt = "prompt " + id;
  pair.first = Candidate::features(id + "/a", std::move(f1));
  pair.second = Candidate::features(id + "/b", std::move(f2));
  pair.label = label;
  return pair;
}

// Random mixed-content dataset for round-trip properties.
inline PreferenceDataset random_dataset(int n, uint64_t seed, bool labeled = true) {
  Rng rng(mix_seed({seed, fnv1a64("dataset-fixture")}));
  PreferenceDataset ds;
  ds.name = "fixture";
  for (int i = 0; i < n; ++i) {
    PreferencePair pair;
    pair.id = "p" + std::to_string(i);
    pair.prompt = "prompt number " + std::to_string(i);
    auto make_candidate = [&](const std::string& cid) {
      double pick = rng.uniform01();
      if (pick < 0.34) return Candidate::text(cid, "text payload " + std::to_string(rng.next_u64() % 1000));
      if (pick < 0.67) return Candidate::media(cid, "file:///img/" + std::to_string(rng.next_u64() % 1000) + ".png");
      std::vector<double> f;
      for (int k = 0; k < 3; ++k) f.push_back(-2.0 + 4.0 * rng.uniform01());
      return Candidate::features(cid, std::move(f));
    };
    pair.first = make_candidate(pair.id + "/a");
    pair.second = make_candidate(pair.id + "/b");
    while (pair.second.content == pair.first.content)
      pair.second = make_candidate(pair.id + "/b");
    if (labeled)
      pair.label = rng.bernoulli(0.5) ? PreferenceLabel::FirstPreferred
                                      : PreferenceLabel::SecondPreferred;
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

// Labeled feature dataset whose labels equal the unit-weight oracle decision,
// so a noiseless faithful oracle scores 100%.
inline PreferenceDataset oracle_aligned_dataset(int n, int dim, uint64_t seed) {
  Rng rng(mix_seed({seed, fnv1a64("aligned-fixture")}));
  PreferenceDataset ds;
  ds.name = "aligned";
  for (int i = 0; i < n; ++i) {
    std::vector<double> f1(dim), f2(dim);
    double s1 = 0.0, s2 = 0.0;
    do {
      s1 = s2 = 0.0;
      for (int k = 0; k < dim; ++k) {
        f1[k] = -2.0 + 4.0 * rng.uniform01();
        f2[k] = -2.0 + 4.0 * rng.uniform01();
        s1 += f1[k];
        s2 += f2[k];
      }
    } while (s1 == s2);
    auto label = s1 > s2 ? PreferenceLabel::FirstPreferred : PreferenceLabel::SecondPreferred;
    ds.pairs.push_back(feature_pair("p" + std::to_string(i), f1, f2, label));
  }
  return ds;
}

inline OracleConfig unit_oracle(int dim, uint64_t seed = 0) {
  OracleConfig cfg;
  cfg.weight_vector.assign(dim, 1.0);
  cfg.seed = seed;
  return cfg;
}

// --- orthogonal-axes world ---------------------------------------------------
//
// Each pair is decided by exactly one axis: the candidates differ only on that
// coordinate (by +/-1), so a rubric restricted to other axes sees a tie. This
// makes the selection objective modular: correct(S) = const + sum of per-axis
// gains, which is what makes greedy provably match exhaustive search.

struct AxisPairSpec {
  int axis;           // deciding axis
  bool vote_correct;  // whether that axis's vote matches the label
};

inline PreferenceDataset axis_dataset(const std::vector<AxisPairSpec>& specs, int dim,
                                      uint64_t seed) {
  Rng rng(mix_seed({seed, fnv1a64("axis-fixture")}));
  PreferenceDataset ds;
  ds.name = "axes";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    bool first_preferred = rng.bernoulli(0.5);
    std::vector<double> f1(dim, 0.0), f2(dim, 0.0);
    // axis vote: sign of (f1-f2) on the deciding axis decides the restricted
    // judgment; make it agree with the label iff vote_correct
    double diff = first_preferred == specs[i].vote_correct ? 1.0 : -1.0;
    f1[specs[i].axis] = diff / 2.0;
    f2[specs[i].axis] = -diff / 2.0;
    ds.pairs.push_back(feature_pair(
        "p" + std::to_string(i), f1, f2,
        first_preferred ? PreferenceLabel::FirstPreferred : PreferenceLabel::SecondPreferred));
  }
  return ds;
}

inline RubricRecord axis_rubric(int axis) {
  RubricRecord r;
  r.rubric_id = "r-axis" + std::to_string(axis);
  r.source_pair_id = "axis" + std::to_string(axis);
  r.text = "- axis=" + std::to_string(axis) + ": prefer the stronger candidate on axis " +
           std::to_string(axis);
  r.status = RubricStatus::Verified;
  return r;
}

inline RubricStore axis_store(int axes) {
  RubricStore store;
  for (int a = 0; a < axes; ++a) store.records.push_back(axis_rubric(a));
  store.stats.generated = axes;
  store.stats.verified_first_try = axes;
  return store;
}

inline std::string verdict_text(Side side, const std::string& rationale = "because") {
  return rationale + "\n" + (side == Side::First ? "VERDICT: FIRST" : "VERDICT: SECOND") + "\n";
}

}  // namespace arr::testfx
