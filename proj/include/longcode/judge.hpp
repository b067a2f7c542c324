#pragma once

// Three-stage MLLM-as-judge pipeline: per-shot captions, a structural
// "thinking" summary, then n scoring rounds conditioned on human-scored
// reference videos.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "longcode/chat.hpp"
#include "longcode/manifest.hpp"

namespace longcode {

struct JudgeConfig {
  std::string endpoint;
  std::string model_name = "judge";
  std::size_t rounds = 3;
  std::vector<double> temperatures{0.3, 0.4, 0.5};
  std::size_t refs_per_round = 3;
  std::size_t frames_per_shot = 4;
  std::uint64_t seed = 0;
  std::size_t max_in_flight = 4;

  /// Throws ValidationError when temperatures.size() != rounds, counts are
  /// zero, or refs_per_round exceeds `bank_size` (when given).
  void validate(std::optional<std::size_t> bank_size = std::nullopt) const;
};

struct ReferenceEntry {
  std::string video_id;
  std::vector<std::string> keyframes;
  double human_score = 3.0;
  std::string rationale;
};

struct ReferenceBank {
  std::vector<ReferenceEntry> entries;

  std::size_t size() const { return entries.size(); }
};

void validate(const ReferenceBank& bank);
ReferenceBank load_reference_bank(const std::filesystem::path& path);
nlohmann::json to_json(const ReferenceBank& bank);

struct RoundRecord {
  std::size_t round = 0;
  double temperature = 0.0;
  std::vector<std::string> reference_ids;
  std::string raw_response;
  std::optional<double> parsed_score;
  bool reprompted = false;
  std::string error;
};

struct JudgeTranscript {
  std::vector<std::string> captions;
  std::string summary;
  std::vector<RoundRecord> rounds;
  double m_mllm = 0.0;
  bool partial = false;  // some rounds failed; m_mllm averages the rest
  std::string prompt_version;
};

nlohmann::json to_json(const JudgeTranscript& transcript);

/// Prompt wording. Placeholders in braces are filled per request.
struct PromptTemplates {
  std::string version;
  std::string caption;
  std::string think;
  std::string score;
  std::string reprompt;
  std::string rewrite;
  std::string outline;
  std::string decompose;
  std::string decompose_retry;
};

PromptTemplates default_prompt_templates();
/// Defaults overridden by <name>.txt files found in `dir` (caption.txt,
/// think.txt, ...). A VERSION file, if present, replaces the version tag.
PromptTemplates load_prompt_templates(const std::filesystem::path& dir);

/// Extracts a 1-5 score: a JSON "score" field first, else the last
/// in-range number following the word "score". Throws ParseError.
double parse_score(std::string_view text);

/// (s - 1) / 4.
double normalize_judge_score(double score);

/// Reference indices for one round: a pure function of the seed, the round
/// index and the bank's video ids (independent of bank file order).
std::vector<std::size_t> sample_references(std::uint64_t seed, std::size_t round,
                                           const ReferenceBank& bank, std::size_t count);

/// Evenly spaced subset of at most `count` keyframes, first and last kept.
std::vector<std::string> sample_frames(std::span<const std::string> keyframes, std::size_t count);

class Judge {
 public:
  Judge(std::shared_ptr<ChatClient> client, JudgeConfig cfg,
        PromptTemplates templates = default_prompt_templates());

  const JudgeConfig& config() const { return cfg_; }
  const PromptTemplates& templates() const { return templates_; }

  /// Stage (a): one caption per shot, order-aligned with the manifest.
  std::vector<std::string> caption_shots(const ShotManifest& manifest) const;
  std::string caption_shot(const Shot& shot, std::size_t position, std::size_t shot_count) const;

  /// Stage (b): structural analysis of intended vs observed shots.
  std::string think(const PromptSuite& suite, std::span<const std::string> captions) const;

  /// Stage (c): one scoring round. Reprompts once on an unparseable reply;
  /// throws ParseError if the second reply fails too.
  double score_round(const ShotManifest& manifest, const PromptSuite& suite,
                     std::string_view summary, std::span<const ReferenceEntry> refs,
                     double temperature, std::size_t round, RoundRecord* record = nullptr) const;

  JudgeTranscript judge_score(const ShotManifest& manifest, const PromptSuite& suite,
                              const ReferenceBank& bank) const;

 private:
  std::string ask(nlohmann::json messages, double temperature, std::uint64_t salt) const;

  std::shared_ptr<ChatClient> client_;
  JudgeConfig cfg_;
  PromptTemplates templates_;
};

}  // namespace longcode
