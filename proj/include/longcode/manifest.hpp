#pragma once

// Shot-manifest data model: prompt suites (the intended shot sequence) and
// manifests (the realized long video as an ordered list of shots).

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace longcode {

inline constexpr double kCanonicalShotSeconds = 5.0;
inline constexpr std::size_t kDatasetMinShots = 12;
inline constexpr std::size_t kDatasetMaxShots = 24;
inline constexpr double kDatasetMinSeconds = 60.0;
inline constexpr double kDatasetMaxSeconds = 120.0;

struct ShotPrompt {
  std::size_t index = 0;
  std::string description;
  double duration_s = kCanonicalShotSeconds;
  std::string cut_type = "cut";

  bool operator==(const ShotPrompt&) const = default;
};

struct PromptSuite {
  std::string suite_id;
  std::string storyline;
  std::vector<ShotPrompt> shots;
  double target_total_s = 0.0;

  std::size_t size() const { return shots.size(); }
  double total_duration() const;

  bool operator==(const PromptSuite&) const = default;
};

enum class Provenance { original, shuffled, replaced, edited, synthesized };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct Shot {
  std::size_t index = 0;
  double duration_s = kCanonicalShotSeconds;
  std::vector<std::string> keyframes;
  std::string embedding_ref;
  Provenance provenance = Provenance::original;

  bool operator==(const Shot&) const = default;
};

struct ShotManifest {
  std::string video_id;
  std::string model_id;
  std::string suite_id;
  std::vector<Shot> shots;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return shots.size(); }
  double total_duration() const;

  bool operator==(const ShotManifest&) const = default;
};

// Validation. Each throws ValidationError naming the violated rule.
void validate(const PromptSuite& suite);
void validate(const ShotManifest& manifest);
void validate_link(const PromptSuite& suite, const ShotManifest& manifest);
/// Bounds that the dataset builder guarantees: 12..24 shots, 60..120 s.
void validate_dataset_bounds(const PromptSuite& suite);

// JSON conversion (throws ParseError on schema mismatch).
nlohmann::json to_json(const PromptSuite& suite);
nlohmann::json to_json(const ShotManifest& manifest);
PromptSuite suite_from_json(const nlohmann::json& j);
ShotManifest manifest_from_json(const nlohmann::json& j);

PromptSuite load_prompt_suite(const std::filesystem::path& path);
void save_prompt_suite(const PromptSuite& suite, const std::filesystem::path& path);

ShotManifest load_manifest(const std::filesystem::path& path);
/// Loads and checks the link against `suite` (suite id and shot count).
ShotManifest load_manifest(const std::filesystem::path& path, const PromptSuite& suite);
void save_manifest(const ShotManifest& manifest, const std::filesystem::path& path);

// Shared file helpers.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace longcode
