#include <gtest/gtest.h>

#include "longcode/error.hpp"
#include "longcode/manifest.hpp"
#include "test_util.hpp"

using namespace longcode;
using testutil::make_manifest;
using testutil::make_suite;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Manifest, SuiteRoundTrip) {
  testutil::TempDir dir("suite");
  const PromptSuite s = make_suite(13);
  save_prompt_suite(s, dir / "s.json");
  const PromptSuite back = load_prompt_suite(dir / "s.json");
  EXPECT_EQ(back, s);
  EXPECT_EQ(back.size(), 13u);
}

TEST(Manifest, IndexGapIsNamed) {
  PromptSuite s = make_suite(3);
  s.shots[2].index = 3;
  EXPECT_NE(error_of([&] { validate(s); }).find("index gap at 2"), std::string::npos);
}

TEST(Manifest, SuiteValidationRules) {
  PromptSuite s = make_suite(3);
  s.shots[1].description.clear();
  EXPECT_THROW(validate(s), ValidationError);
  s = make_suite(3);
  s.shots[0].duration_s = 0;
  EXPECT_THROW(validate(s), ValidationError);
  EXPECT_THROW(validate(make_suite(1)), ValidationError);
}

TEST(Manifest, DatasetBounds) {
  const PromptSuite s = make_suite(18);
  EXPECT_DOUBLE_EQ(s.total_duration(), 90.0);
  EXPECT_NO_THROW(validate_dataset_bounds(s));
  EXPECT_THROW(validate_dataset_bounds(make_suite(11)), ValidationError);
  EXPECT_THROW(validate_dataset_bounds(make_suite(25)), ValidationError);
}

TEST(Manifest, ManifestRoundTripPreservesProvenance) {
  testutil::TempDir dir("manifest");
  ShotManifest m = make_manifest(13);
  m.shots[3].provenance = Provenance::replaced;
  m.shots[4].provenance = Provenance::synthesized;
  m.metadata = {{"fps", 24}, {"resolution", "1280x720"}};
  save_manifest(m, dir / "m.json");
  EXPECT_EQ(load_manifest(dir / "m.json"), m);
  save_manifest(load_manifest(dir / "m.json"), dir / "m2.json");
  EXPECT_EQ(read_text_file(dir / "m.json"), read_text_file(dir / "m2.json"));
}

TEST(Manifest, ShotCountMismatchAgainstSuite) {
  testutil::TempDir dir("link");
  save_manifest(make_manifest(12), dir / "m.json");
  const PromptSuite suite = make_suite(13);
  EXPECT_NE(error_of([&] { load_manifest(dir / "m.json", suite); }).find("shot count mismatch"), std::string::npos);
  save_manifest(make_manifest(13), dir / "ok.json");
  EXPECT_EQ(load_manifest(dir / "ok.json", suite).size(), 13u);
}

TEST(Manifest, IndicesMustFormPermutation) {
  ShotManifest m = make_manifest(4);
  std::swap(m.shots[0], m.shots[3]);
  EXPECT_NO_THROW(validate(m));
  m.shots[1].index = 3;
  EXPECT_THROW(validate(m), ValidationError);
}

TEST(Manifest, FileErrors) {
  testutil::TempDir dir("errors");
  EXPECT_THROW(load_manifest(dir / "absent.json"), IoError);
  write_text_file(dir / "bad.json", "{not json");
  EXPECT_THROW(load_manifest(dir / "bad.json"), ParseError);
  write_text_file(dir / "schema.json", R"({"video_id": "v"})");
  EXPECT_THROW(load_manifest(dir / "schema.json"), ParseError);
  EXPECT_THROW(save_manifest(make_manifest(3), "/proc/longcode/forbidden.json"), IoError);
}

TEST(Manifest, ProvenanceStrings) {
  for (auto p : {Provenance::original, Provenance::shuffled, Provenance::replaced, Provenance::edited,
                 Provenance::synthesized}) {
    EXPECT_EQ(provenance_from_string(to_string(p)), p);
  }
  EXPECT_THROW(provenance_from_string("mangled"), ParseError);
}
