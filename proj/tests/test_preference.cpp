#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "arr/preference.hpp"
#include "arr/util.hpp"
#include "fixtures.hpp"

using namespace arr;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "arr_pref_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("two-line text dataset round-trips with labels preserved") {
  fs::path path = temp_file("two_line.jsonl");
  write_file(path,
             R"({"id":"a","prompt":"draw a cat","first":{"text":"tabby"},"second":{"text":"siamese"},"label":"first"})"
             "\n"
             R"({"id":"b","prompt":"draw a dog","first":{"text":"husky"},"second":{"text":"corgi"},"label":"second"})"
             "\n");

  PreferenceDataset ds = load_dataset(path);
  REQUIRE(ds.pairs.size() == 2);
  CHECK(ds.pairs[0].id == "a");
  CHECK(ds.pairs[1].id == "b");
  CHECK(ds.pairs[0].label == PreferenceLabel::FirstPreferred);
  CHECK(ds.pairs[1].label == PreferenceLabel::SecondPreferred);
  CHECK(std::get<TextContent>(ds.pairs[0].first.content).value == "tabby");
  CHECK(ds.pairs[0].prompt == "draw a cat");
}

TEST_CASE("record missing 'second' names the line") {
  fs::path path = temp_file("missing_second.jsonl");
  write_file(path,
             R"({"id":"a","prompt":"p","first":{"text":"x"},"second":{"text":"y"}})"
             "\n"
             R"({"id":"b","prompt":"p","first":{"text":"x"}})"
             "\n");
  try {
    load_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(msg.find("second") != std::string::npos);
  }
}

TEST_CASE("parse failure names the line") {
  fs::path path = temp_file("bad_json.jsonl");
  write_file(path, "{not json}\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("parse failure"), DataError);
}

TEST_CASE("duplicate pair id rejected") {
  fs::path path = temp_file("dup_id.jsonl");
  std::string rec = R"({"id":"a","prompt":"p","first":{"text":"x"},"second":{"text":"y"}})";
  write_file(path, rec + "\n" + rec + "\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("duplicate pair id"), DataError);
}

TEST_CASE("tie labels are rejected, not guessed") {
  fs::path path = temp_file("tie.jsonl");
  write_file(path,
             R"({"id":"a","prompt":"p","first":{"text":"x"},"second":{"text":"y"},"label":"tie"})"
             "\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("label"), DataError);
}

TEST_CASE("candidate must carry exactly one content variant") {
  fs::path both = temp_file("both_variants.jsonl");
  write_file(both,
             R"({"id":"a","prompt":"p","first":{"text":"x","feature_vector":[1]},"second":{"text":"y"}})"
             "\n");
  CHECK_THROWS_WITH_AS(load_dataset(both), doctest::Contains("exactly one"), DataError);

  fs::path neither = temp_file("no_variant.jsonl");
  write_file(neither, R"({"id":"a","prompt":"p","first":{},"second":{"text":"y"}})"
                      "\n");
  CHECK_THROWS_AS(load_dataset(neither), DataError);
}

TEST_CASE("validate_pair distinguishes each invariant violation") {
  PreferencePair ok = testfx::feature_pair("a", {1.0}, {2.0});
  CHECK_NOTHROW(validate_pair(ok));

  PreferencePair dup = ok;
  dup.second.id = dup.first.id;
  CHECK_THROWS_WITH_AS(validate_pair(dup), doctest::Contains("duplicate candidate id"),
                       DataError);

  PreferencePair empty = ok;
  empty.first = Candidate::features("a/a", {});
  CHECK_THROWS_WITH_AS(validate_pair(empty), doctest::Contains("empty feature_vector"),
                       DataError);

  PreferencePair nonfinite = testfx::feature_pair("b", {1.0, std::nan("")}, {0.0, 0.0});
  CHECK_THROWS_WITH_AS(validate_pair(nonfinite), doctest::Contains("non-finite feature"),
                       DataError);
}

TEST_CASE("swap_pair: definition, involution, absent label") {
  PreferencePair pair = testfx::feature_pair("p", {1.0}, {2.0}, PreferenceLabel::FirstPreferred);
  PreferencePair swapped = swap_pair(pair);
  CHECK(swapped.id == pair.id);
  CHECK(swapped.first == pair.second);
  CHECK(swapped.second == pair.first);
  CHECK(swapped.label == PreferenceLabel::SecondPreferred);
  CHECK(swap_pair(swapped) == pair);

  PreferencePair unlabeled = testfx::feature_pair("q", {1.0}, {2.0});
  CHECK_FALSE(swap_pair(unlabeled).label.has_value());

  PreferenceDataset ds = testfx::random_dataset(100, 11, true);
  for (const auto& p : ds.pairs) CHECK(swap_pair(swap_pair(p)) == p);
}

TEST_CASE("200-record generated file: byte-identical re-serialization") {
  PreferenceDataset ds = testfx::random_dataset(200, 42, true);
  fs::path path = temp_file("gen200.jsonl");
  save_dataset(ds, path);

  PreferenceDataset loaded = load_dataset(path);
  REQUIRE(loaded.pairs.size() == 200);
  CHECK(serialize_dataset(loaded) == read_file(path));

  fs::path path2 = temp_file("gen200_again.jsonl");
  save_dataset(loaded, path2);
  PreferenceDataset loaded2 = load_dataset(path2);
  loaded2.name = loaded.name;
  CHECK(loaded2 == loaded);
}

TEST_CASE("swap_pair commutes with serialization") {
  PreferenceDataset ds = testfx::random_dataset(40, 17, true);
  fs::path path = temp_file("swap_comm.jsonl");
  save_dataset(ds, path);
  PreferenceDataset loaded = load_dataset(path);

  PreferenceDataset swapped_mem;
  swapped_mem.name = loaded.name;
  for (const auto& p : loaded.pairs) swapped_mem.pairs.push_back(swap_pair(p));

  fs::path swapped_path = temp_file("swap_comm2.jsonl");
  save_dataset(swapped_mem, swapped_path);
  PreferenceDataset swapped_loaded = load_dataset(swapped_path);
  swapped_loaded.name = swapped_mem.name;
  CHECK(swapped_loaded == swapped_mem);
}

TEST_CASE("every pair accepted by load_dataset passes validate_pair") {
  PreferenceDataset ds = testfx::random_dataset(60, 23, false);
  fs::path path = temp_file("validated.jsonl");
  save_dataset(ds, path);
  for (const auto& p : load_dataset(path).pairs) CHECK_NOTHROW(validate_pair(p));
}

TEST_CASE("content-addressed candidate ids are distinct and stable across loads") {
  fs::path path = temp_file("ids.jsonl");
  write_file(path,
             R"({"id":"a","prompt":"p","first":{"text":"x"},"second":{"text":"y"}})"
             "\n");
  PreferenceDataset ds = load_dataset(path);
  CHECK(ds.pairs[0].first.id != ds.pairs[0].second.id);
  CHECK(ds.pairs[0].first.id == load_dataset(path).pairs[0].first.id);
}

TEST_CASE("identical candidate contents collapse to a duplicate id error") {
  fs::path path = temp_file("same_content.jsonl");
  write_file(path,
             R"({"id":"a","prompt":"p","first":{"text":"x"},"second":{"text":"x"}})"
             "\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("duplicate candidate id"),
                       DataError);
}

TEST_CASE("missing dataset file names the path") {
  CHECK_THROWS_WITH_AS(load_dataset("/nonexistent/nowhere.jsonl"),
                       doctest::Contains("/nonexistent/nowhere.jsonl"), DataError);
}
