// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <set>

#include "spotkit/dataset_format.hpp"
#include "spotkit/error.hpp"
#include "spotkit/rng.hpp"
#include "test_support.hpp"

using namespace spotkit;
using nlohmann::json;

namespace {

Errc error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected spotkit::Error");
  return Errc::InvalidArgument;
}

DatasetManifest small_manifest() {
  DatasetManifest m;
  m.dataset_name = "small";
  m.classes = {"Goal", "Card"};
  VideoEntry v;
  v.path = "a.mkv";
  v.duration_ms = 60000;
  v.annotations.push_back({"Goal", 1000, std::nullopt, json::object()});
  v.annotations.push_back({"Card", 59000, std::nullopt, json::object()});
  m.videos.push_back(v);
  return m;
}

std::string random_name(Rng& rng) {
  static const std::vector<std::string> pieces = {"goal", "Kick-off", "carton jaune", "Tor", "ゴール", "шайба", "é", "x y", "\"q\"", "tab\t"};
  std::string s = pieces[rng.below(pieces.size())];
  s += "_" + std::to_string(rng.below(1000));
  return s;
}

json random_metadata(Rng& rng) {
  json j = json::object();
  const auto n = rng.below(3);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string key = "k" + std::to_string(rng.below(50));
    switch (rng.below(4)) {
      case 0: j[key] = static_cast<std::int64_t>(rng.below(100000)) - 50000; break;
      case 1: j[key] = rng.uniform(-10, 10); break;
      case 2: j[key] = random_name(rng); break;
      default: j[key] = json::array({1, "two", nullptr, true});
    }
  }
  return j;
}

DatasetManifest random_manifest(Rng& rng) {
  DatasetManifest m;
  m.dataset_name = random_name(rng);
  std::set<std::string> names;
  const auto c = rng.below(6);
  while (names.size() < c) names.insert(random_name(rng));
  m.classes.assign(names.begin(), names.end());
  rng.shuffle(m.classes);
  m.metadata = random_metadata(rng);
  const auto videos = rng.below(5);
  for (std::uint64_t i = 0; i < videos; ++i) {
    VideoEntry v;
    const auto media = rng.below(3);
    if (media != 1) v.path = "videos/" + std::to_string(i) + "_" + random_name(rng) + ".mkv";
    if (media != 0) v.features_path = "features/" + std::to_string(i) + ".osfeat";
    v.duration_ms = 1 + static_cast<std::int64_t>(rng.below(10'000'000));
    v.fps = rng.uniform(0.5, 60.0);
    v.split = static_cast<Split>(rng.below(4));
    v.metadata = random_metadata(rng);
    const bool predictions = rng.below(2) == 0;
    if (!m.classes.empty()) {
      const auto n = rng.below(8);
      for (std::uint64_t k = 0; k < n; ++k) {
        Annotation a;
        a.label = m.classes[rng.below(m.classes.size())];
        a.position_ms = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(v.duration_ms) + 1));
        if (predictions) a.confidence = rng.uniform();
        a.metadata = random_metadata(rng);
        v.annotations.push_back(a);
      }
    }
    m.videos.push_back(v);
  }
  return m;
}

}  // namespace

TEST_CASE("parse: seventeen-class manifest") {
  json doc = {{"format_version", "1.0"}, {"dataset_name", "soccer"}, {"classes", json::array()}, {"videos", json::array()}};
  for (int i = 0; i < 17; ++i) doc["classes"].push_back("class " + std::to_string(i));
  doc["videos"].push_back({{"path", "m/1.mkv"},
                           {"duration_ms", 2700000},
                           {"fps", 25.0},
                           {"split", "train"},
                           {"annotations",
                            {{{"label", "class 0"}, {"position_ms", 1000}},
                             {{"label", "class 4"}, {"position_ms", 2000}},
                             {{"label", "class 16"}, {"position_ms", 3000}}}}});
  const DatasetManifest m = parse_manifest(doc.dump());
  CHECK(m.classes.size() == 17);
  REQUIRE(m.videos.size() == 1);
  CHECK(m.videos[0].annotations.size() == 3);
  CHECK(m.videos[0].annotations[2].label == "class 16");
}

TEST_CASE("parse: empty manifest") {
  const DatasetManifest m = parse_manifest(R"({"format_version":"1.0","dataset_name":"empty","classes":[],"videos":[]})");
  CHECK(m.dataset_name == "empty");
  CHECK(m.classes.empty());
  CHECK(m.videos.empty());
}

TEST_CASE("parse: error codes") {
  CHECK(error_code_of([] { parse_manifest("{not json"); }) == Errc::MalformedDocument);
  CHECK(error_code_of([] { parse_manifest(R"({"format_version":"1.0","classes":[],"videos":[]})"); }) ==
        Errc::SchemaViolation);
  CHECK(error_code_of([] { parse_manifest(R"({"format_version":"7.3","dataset_name":"x","classes":[],"videos":[]})"); }) ==
        Errc::UnknownVersion);
  CHECK(error_code_of([] {
          parse_manifest(R"({"format_version":"1.0","dataset_name":"x","classes":"Goal","videos":[]})");
        }) == Errc::SchemaViolation);
  const std::string unknown_label = R"({"format_version":"1.0","dataset_name":"x","classes":["Card"],"videos":[
      {"path":"a.mkv","duration_ms":10000,"fps":25,"split":"test","annotations":[{"label":"Goal","position_ms":5}]}]})";
  CHECK(error_code_of([&] { parse_manifest(unknown_label); }) == Errc::SchemaViolation);
  ParseOptions lenient;
  lenient.strict = false;
  CHECK_NOTHROW(parse_manifest(unknown_label, lenient));
}

TEST_CASE("parse: unknown top-level keys land in metadata") {
  const DatasetManifest m = parse_manifest(
      R"({"format_version":"1.0","dataset_name":"x","classes":[],"videos":[],"licence":"cc-by","metadata":{"a":1}})");
  CHECK(m.metadata.at("licence") == "cc-by");
  CHECK(m.metadata.at("a") == 1);
}

TEST_CASE("validate: well-formed manifest") {
  const ValidationReport r = validate_manifest(small_manifest(), true);
  CHECK(r.is_valid());
  CHECK(r.errors.empty());
}

TEST_CASE("validate: position out of range is an error when strict and a warning otherwise") {
  DatasetManifest m = small_manifest();
  m.videos[0].annotations[1].position_ms = 61000;
  const ValidationReport strict = validate_manifest(m, true);
  CHECK_FALSE(strict.is_valid());
  CHECK(strict.has_error(codes::kPositionOutOfRange));
  const ValidationReport lenient = validate_manifest(m, false);
  CHECK(lenient.is_valid());
  CHECK(lenient.has_warning(codes::kPositionOutOfRange));
}

TEST_CASE("validate: stable codes for each invariant") {
  DatasetManifest dup = small_manifest();
  dup.videos.push_back(dup.videos[0]);
  CHECK(validate_manifest(dup, true).has_error(codes::kDuplicateVideo));

  DatasetManifest classes = small_manifest();
  classes.classes.push_back("Goal");
  classes.classes.push_back("");
  const auto rc = validate_manifest(classes, true);
  CHECK(rc.has_error(codes::kDuplicateClass));
  CHECK(rc.has_error(codes::kEmptyClassName));

  DatasetManifest label = small_manifest();
  label.videos[0].annotations[0].label = "Offside";
  CHECK(validate_manifest(label, true).has_error(codes::kUnknownLabel));

  DatasetManifest media = small_manifest();
  media.videos[0].path.reset();
  CHECK(validate_manifest(media, true).has_error(codes::kMissingMedia));

  DatasetManifest conf = small_manifest();
  conf.videos[0].annotations[0].confidence = 1.5;
  CHECK(validate_manifest(conf, true).has_error(codes::kConfidenceOutOfRange));

  ValidateOptions needs_conf;
  needs_conf.require_confidence = true;
  CHECK(validate_manifest(small_manifest(), needs_conf).has_error(codes::kMissingConfidence));

  DatasetManifest dur = small_manifest();
  dur.videos[0].duration_ms = 0;
  CHECK(validate_manifest(dur, true).has_error(codes::kNonPositiveDuration));

  testing::TempDir dir;
  ValidateOptions files;
  files.media_root = dir.path();
  CHECK(validate_manifest(small_manifest(), files).has_error(codes::kMissingFile));
  files.strict = false;
  const auto lenient = validate_manifest(small_manifest(), files);
  CHECK(lenient.is_valid());
  CHECK(lenient.has_warning(codes::kMissingFile));
}

TEST_CASE("validate: a valid report implies every type invariant") {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    DatasetManifest m = random_manifest(rng);
    // Perturb some manifests so both outcomes are exercised.
    if (rng.below(3) == 0 && !m.videos.empty()) m.videos.push_back(m.videos[0]);
    if (rng.below(3) == 0 && !m.videos.empty() && !m.videos[0].annotations.empty()) {
      m.videos[0].annotations[0].position_ms = m.videos[0].duration_ms + 1;
    }
    if (!validate_manifest(m, true).is_valid()) continue;
    std::set<std::string> names(m.classes.begin(), m.classes.end());
    REQUIRE(names.size() == m.classes.size());
    REQUIRE_FALSE(names.contains(""));
    std::set<std::string> ids;
    for (const auto& v : m.videos) {
      REQUIRE((v.path || v.features_path));
      REQUIRE(ids.insert(v.id()).second);
      if (!v.annotations.empty()) REQUIRE(v.duration_ms > 0);
      for (const auto& a : v.annotations) {
        REQUIRE(names.contains(a.label));
        REQUIRE(a.position_ms >= 0);
        REQUIRE(a.position_ms <= v.duration_ms);
        if (a.confidence) REQUIRE((*a.confidence >= 0.0 && *a.confidence <= 1.0));
      }
    }
  }
}

TEST_CASE("serialize: empty manifest golden string") {
  DatasetManifest m;
  m.dataset_name = "empty";
  CHECK(serialize_manifest(m) ==
        "{\n  \"format_version\": \"1.0\",\n  \"dataset_name\": \"empty\",\n  \"classes\": [],\n  \"videos\": [],\n"
        "  \"metadata\": {}\n}\n");
}

TEST_CASE("serialize: invalid manifest is rejected") {
  DatasetManifest m = small_manifest();
  m.videos[0].annotations[0].label = "Offside";
  try {
    serialize_manifest(m);
    FAIL("expected InvalidManifest");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidManifest);
  }
}

TEST_CASE("serialize: round trip over 500 generated manifests") {
  Rng rng(2024);
  for (int i = 0; i < 500; ++i) {
    const DatasetManifest m = random_manifest(rng);
    REQUIRE(validate_manifest(m, true).is_valid());
    const std::string text = serialize_manifest(m);
    const DatasetManifest back = parse_manifest(text);
    REQUIRE(back == m);
    REQUIRE(serialize_manifest(back) == text);
  }
}

TEST_CASE("serialize: non-ASCII names are stable after one pass") {
  DatasetManifest m = small_manifest();
  m.classes = {"But ⚽", "Carton jaune", "黄牌"};
  m.dataset_name = "Ligue Ü";
  m.videos[0].annotations[0].label = "黄牌";
  m.videos[0].annotations[1].label = "But ⚽";
  const std::string once = serialize_manifest(parse_manifest(serialize_manifest(m)));
  CHECK(serialize_manifest(parse_manifest(once)) == once);
  CHECK(once.find("黄牌") != std::string::npos);
  CHECK(parse_manifest(once) == m);
}

TEST_CASE("filter_split: selection, empty split and idempotence") {
  DatasetManifest m = small_manifest();
  m.videos.clear();
  for (int i = 0; i < 5; ++i) {
    VideoEntry v;
    v.path = "v" + std::to_string(i);
    v.duration_ms = 1000;
    v.split = i < 3 ? Split::train : Split::test;
    m.videos.push_back(v);
  }
  const DatasetManifest test = filter_split(m, Split::test);
  CHECK(test.videos.size() == 2);
  CHECK(test.classes == m.classes);
  const DatasetManifest none = filter_split(m, Split::challenge);
  CHECK(none.videos.empty());
  CHECK(none.classes == m.classes);
  CHECK(filter_split(test, Split::test) == test);
}

TEST_CASE("filter_split: splits partition the video set") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const DatasetManifest m = random_manifest(rng);
    std::multiset<std::string> all;
    for (Split s : {Split::train, Split::valid, Split::test, Split::challenge}) {
      for (const auto& v : filter_split(m, s).videos) {
        REQUIRE(v.split == s);
        all.insert(v.id());
      }
    }
    std::multiset<std::string> original;
    for (const auto& v : m.videos) original.insert(v.id());
    REQUIRE(all == original);
  }
}

TEST_CASE("convert_legacy: fixture matches the golden manifest byte for byte") {
  const auto dir = testing::fixture_dir() / "legacy";
  const auto mapping = parse_legacy_mapping(json::parse(testing::read_file(dir / "mapping.json")));
  const ConversionResult r = convert_legacy(dir / "root", mapping);
  CHECK(serialize_manifest(r.manifest) == testing::read_file(dir / "golden_manifest.json"));
  CHECK(r.annotations_read == 8);
  CHECK(r.unknown_labels == 0);
  bool warned_empty = false;
  for (const auto& w : r.warnings) warned_empty |= w.find("no annotations") != std::string::npos;
  CHECK(warned_empty);
}

TEST_CASE("convert_legacy: single annotation example") {
  testing::TempDir dir;
  testing::write_file(dir / "m/Labels-v2.json",
                      R"({"annotations":[{"half":1,"gameTime":"1 - 05:32","position":"332000","label":"Goal"}]})");
  const ConversionResult r = convert_legacy(dir.path(), LegacyMappingConfig{});
  REQUIRE(r.manifest.videos.size() == 2);
  REQUIRE(r.manifest.videos[0].annotations.size() == 1);
  CHECK(r.manifest.videos[0].annotations[0].label == "Goal");
  CHECK(r.manifest.videos[0].annotations[0].position_ms == 332000);
  CHECK(r.manifest.videos[1].annotations.empty());
}

TEST_CASE("convert_legacy: empty match directory warns") {
  testing::TempDir dir;
  testing::write_file(dir / "m/Labels-v2.json", R"({"annotations":[]})");
  const ConversionResult r = convert_legacy(dir.path(), LegacyMappingConfig{});
  CHECK(r.annotations_read == 0);
  for (const auto& v : r.manifest.videos) CHECK(v.annotations.empty());
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("convert_legacy: error codes") {
  testing::TempDir dir;
  LegacyMappingConfig mapping;
  mapping.matches = {"absent"};
  CHECK(error_code_of([&] { convert_legacy(dir.path(), mapping); }) == Errc::MissingLabelFile);

  testing::write_file(dir / "bad/Labels-v2.json", R"({"annotations":[{"gameTime":"first half","label":"Goal"}]})");
  CHECK(error_code_of([&] { convert_legacy(dir.path(), LegacyMappingConfig{}); }) == Errc::UnparseableGameTime);

  testing::TempDir other;
  testing::write_file(other / "m/Labels-v2.json",
                      R"({"annotations":[{"gameTime":"1 - 00:10","position":"10000","label":"Offside"},
                                          {"gameTime":"1 - 00:20","position":"20000","label":"Goal"}]})");
  LegacyMappingConfig strict;
  strict.classes = {"Goal"};
  CHECK(error_code_of([&] { convert_legacy(other.path(), strict); }) == Errc::UnknownLegacyLabel);
  strict.strict = false;
  const ConversionResult r = convert_legacy(other.path(), strict);
  std::size_t emitted = 0;
  for (const auto& v : r.manifest.videos) emitted += v.annotations.size();
  // Conservation: read == emitted + unknown.
  CHECK(r.annotations_read == emitted + r.unknown_labels);
  CHECK(r.unknown_labels == 1);
}

TEST_CASE("convert_legacy: full SoccerNet-v2 label tree (optional)") {
  const char* root = std::getenv("SPOTKIT_SOCCERNET_ROOT");
  if (root == nullptr) SKIP("SPOTKIT_SOCCERNET_ROOT not set");
  LegacyMappingConfig mapping;
  const ConversionResult r = convert_legacy(root, mapping);
  std::size_t total = 0;
  for (const auto& v : r.manifest.videos) total += v.annotations.size();
  CHECK(total == 110458);
  CHECK(r.manifest.classes.size() == 17);
}
