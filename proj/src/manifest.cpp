#include "longcode/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "longcode/error.hpp"

namespace longcode {

using nlohmann::json;

double PromptSuite::total_duration() const {
  return std::accumulate(shots.begin(), shots.end(), 0.0,
                         [](double acc, const ShotPrompt& s) { return acc + s.duration_s; });
}

double ShotManifest::total_duration() const {
  return std::accumulate(shots.begin(), shots.end(), 0.0,
                         [](double acc, const Shot& s) { return acc + s.duration_s; });
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::shuffled: return "shuffled";
    case Provenance::replaced: return "replaced";
    case Provenance::edited: return "edited";
    case Provenance::synthesized: return "synthesized";
  }
  return "original";
}

Provenance provenance_from_string(std::string_view s) {
  for (auto p : {Provenance::original, Provenance::shuffled, Provenance::replaced,
                 Provenance::edited, Provenance::synthesized}) {
    if (to_string(p) == s) return p;
  }
  throw ParseError("unknown provenance '" + std::string(s) + "'");
}

namespace {

// Shot indices must be exactly {0..K-1}. For suites they must also be in
// order; manifests may carry any permutation.
void check_index_set(std::vector<std::size_t> indices, const std::string& what) {
  std::sort(indices.begin(), indices.end());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] == i) continue;
    if (indices[i] < i) throw ValidationError(what + ": duplicate shot index " + std::to_string(indices[i]));
    throw ValidationError(what + ": index gap at " + std::to_string(i));
  }
}

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

void validate(const PromptSuite& suite) {
  const std::string where = "suite '" + suite.suite_id + "'";
  if (suite.shots.size() < 2) {
    throw ValidationError(where + ": needs at least 2 shots, has " + std::to_string(suite.shots.size()));
  }
  std::vector<std::size_t> indices;
  for (const auto& s : suite.shots) {
    if (s.description.empty()) {
      throw ValidationError(where + ": empty description at shot " + std::to_string(s.index));
    }
    if (!(s.duration_s > 0.0) || !std::isfinite(s.duration_s)) {
      throw ValidationError(where + ": non-positive duration at shot " + std::to_string(s.index));
    }
    indices.push_back(s.index);
  }
  check_index_set(indices, where);
  for (std::size_t i = 0; i < suite.shots.size(); ++i) {
    if (suite.shots[i].index != i) {
      throw ValidationError(where + ": shots out of index order at position " + std::to_string(i));
    }
  }
}

void validate(const ShotManifest& manifest) {
  const std::string where = "manifest '" + manifest.video_id + "'";
  if (manifest.shots.empty()) throw ValidationError(where + ": no shots");
  std::vector<std::size_t> indices;
  for (const auto& s : manifest.shots) {
    if (!(s.duration_s > 0.0) || !std::isfinite(s.duration_s)) {
      throw ValidationError(where + ": non-positive duration at shot " + std::to_string(s.index));
    }
    if (s.embedding_ref.empty()) {
      throw ValidationError(where + ": empty embedding_ref at shot " + std::to_string(s.index));
    }
    indices.push_back(s.index);
  }
  check_index_set(indices, where);
}

void validate_link(const PromptSuite& suite, const ShotManifest& manifest) {
  if (manifest.suite_id != suite.suite_id) {
    throw ValidationError("manifest '" + manifest.video_id + "' links suite '" + manifest.suite_id +
                          "', got '" + suite.suite_id + "'");
  }
  if (manifest.shots.size() != suite.shots.size()) {
    throw ValidationError("manifest '" + manifest.video_id + "': shot count mismatch (" +
                          std::to_string(manifest.shots.size()) + " shots, suite has " +
                          std::to_string(suite.shots.size()) + ")");
  }
}

void validate_dataset_bounds(const PromptSuite& suite) {
  const std::size_t k = suite.shots.size();
  if (k < kDatasetMinShots || k > kDatasetMaxShots) {
    throw ValidationError("suite '" + suite.suite_id + "': " + std::to_string(k) +
                          " shots outside [12, 24]");
  }
  const double total = suite.total_duration();
  if (total < kDatasetMinSeconds - 1e-9 || total > kDatasetMaxSeconds + 1e-9) {
    std::ostringstream os;
    os << "suite '" << suite.suite_id << "': total duration " << total << " s outside [60, 120]";
    throw ValidationError(os.str());
  }
}

json to_json(const PromptSuite& suite) {
  json shots = json::array();
  for (const auto& s : suite.shots) {
    shots.push_back({{"index", s.index},
                     {"description", s.description},
                     {"duration_s", s.duration_s},
                     {"cut_type", s.cut_type}});
  }
  return {{"suite_id", suite.suite_id},
          {"storyline", suite.storyline},
          {"target_total_s", suite.target_total_s},
          {"shots", std::move(shots)}};
}

json to_json(const ShotManifest& manifest) {
  json shots = json::array();
  for (const auto& s : manifest.shots) {
    shots.push_back({{"index", s.index},
                     {"duration_s", s.duration_s},
                     {"keyframes", s.keyframes},
                     {"embedding_ref", s.embedding_ref},
                     {"provenance", to_string(s.provenance)}});
  }
  return {{"video_id", manifest.video_id},
          {"model_id", manifest.model_id},
          {"suite_id", manifest.suite_id},
          {"shots", std::move(shots)},
          {"metadata", manifest.metadata}};
}

PromptSuite suite_from_json(const json& j) {
  PromptSuite suite;
  suite.suite_id = get_field<std::string>(j, "suite_id", "suite");
  const std::string where = "suite '" + suite.suite_id + "'";
  suite.storyline = get_field<std::string>(j, "storyline", where);
  const auto shots = get_field<json>(j, "shots", where);
  if (!shots.is_array()) throw ParseError(where + ": 'shots' must be an array");
  for (const auto& s : shots) {
    ShotPrompt p;
    p.index = get_field<std::size_t>(s, "index", where);
    p.description = get_field<std::string>(s, "description", where);
    p.duration_s = get_field<double>(s, "duration_s", where);
    p.cut_type = s.value("cut_type", std::string("cut"));
    suite.shots.push_back(std::move(p));
  }
  suite.target_total_s = j.contains("target_total_s") ? get_field<double>(j, "target_total_s", where)
                                                      : suite.total_duration();
  return suite;
}

ShotManifest manifest_from_json(const json& j) {
  ShotManifest m;
  m.video_id = get_field<std::string>(j, "video_id", "manifest");
  const std::string where = "manifest '" + m.video_id + "'";
  m.model_id = get_field<std::string>(j, "model_id", where);
  m.suite_id = get_field<std::string>(j, "suite_id", where);
  const auto shots = get_field<json>(j, "shots", where);
  if (!shots.is_array()) throw ParseError(where + ": 'shots' must be an array");
  for (const auto& s : shots) {
    Shot shot;
    shot.index = get_field<std::size_t>(s, "index", where);
    shot.duration_s = get_field<double>(s, "duration_s", where);
    shot.keyframes = s.value("keyframes", std::vector<std::string>{});
    shot.embedding_ref = get_field<std::string>(s, "embedding_ref", where);
    shot.provenance = provenance_from_string(s.value("provenance", std::string("original")));
    m.shots.push_back(std::move(shot));
  }
  m.metadata = j.value("metadata", json::object());
  if (!m.metadata.is_object()) throw ParseError(where + ": 'metadata' must be an object");
  return m;
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

PromptSuite load_prompt_suite(const std::filesystem::path& path) {
  PromptSuite suite = suite_from_json(read_json_file(path));
  validate(suite);
  return suite;
}

void save_prompt_suite(const PromptSuite& suite, const std::filesystem::path& path) {
  validate(suite);
  write_text_file(path, to_json(suite).dump(2) + "\n");
}

ShotManifest load_manifest(const std::filesystem::path& path) {
  ShotManifest m = manifest_from_json(read_json_file(path));
  validate(m);
  return m;
}

ShotManifest load_manifest(const std::filesystem::path& path, const PromptSuite& suite) {
  ShotManifest m = load_manifest(path);
  validate_link(suite, m);
  return m;
}

void save_manifest(const ShotManifest& manifest, const std::filesystem::path& path) {
  validate(manifest);
  write_text_file(path, to_json(manifest).dump(2) + "\n");
}

}  // namespace longcode
