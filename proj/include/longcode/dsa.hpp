#pragma once

// Dynamic Structure Alignment: rank agreement between prompt-prompt and
// prompt-video similarity vectors, and its fusion with the judge score.

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "longcode/embedder.hpp"
#include "longcode/manifest.hpp"

namespace longcode {

inline constexpr double kDefaultAlpha = 0.5;

enum class SimilarityKind { prompt_prompt, prompt_video };

struct SimilarityVector {
  std::vector<double> values;
  SimilarityKind kind = SimilarityKind::prompt_prompt;

  std::size_t size() const { return values.size(); }
};

/// Caches s^c per (suite, embedder); it does not depend on the video.
class PromptSimilarityCache {
 public:
  std::optional<SimilarityVector> find(const std::string& key) const;
  SimilarityVector insert(const std::string& key, SimilarityVector v);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, SimilarityVector> entries_;
};

/// s^c_i = cos(f_t(c_i), f_t(C)) for every shot prompt.
SimilarityVector prompt_similarity(const PromptSuite& suite, const EmbeddingProvider& provider);

/// Returns (s^c, s^v). `cache`, when given, memoizes s^c.
std::pair<SimilarityVector, SimilarityVector> similarity_vectors(
    const PromptSuite& suite, const ShotManifest& manifest, const EmbeddingProvider& provider,
    VideoEmbedMode mode = VideoEmbedMode::positional_pool,
    PromptSimilarityCache* cache = nullptr);

/// Spearman correlation of the two vectors. All-tied input raises
/// UndefinedError ("undefined DSA"), never a silent value.
double dsa_score(const SimilarityVector& s_c, const SimilarityVector& s_v);

/// (r + 1) / 2.
double normalize_dsa(double raw_spearman);

struct LongCodeScore {
  double raw_spearman = 0.0;
  double m_dsa = 0.0;
  double m_mllm = 0.0;
  double alpha = kDefaultAlpha;
  double fused = 0.0;
};

/// fused = alpha * m_dsa + (1 - alpha) * m_mllm; raw_spearman is back-derived
/// from m_dsa.
LongCodeScore fuse(double m_dsa, double m_mllm, double alpha = kDefaultAlpha);

/// One scored video as emitted to disk. Judge fields are absent for
/// DSA-only runs.
struct ScoreRecord {
  std::string video_id;
  std::string model_id;
  double raw_spearman = 0.0;
  double m_dsa = 0.0;
  std::optional<double> m_mllm;
  double alpha = kDefaultAlpha;
  std::optional<double> fused;
  VideoEmbedMode embed_mode = VideoEmbedMode::positional_pool;
};

/// Full DSA pipeline for one video.
ScoreRecord score_dsa(const PromptSuite& suite, const ShotManifest& manifest,
                      const EmbeddingProvider& provider, VideoEmbedMode mode,
                      PromptSimilarityCache* cache = nullptr);
/// Adds the judge score and the fused value to a DSA record.
void attach_judge(ScoreRecord& record, double m_mllm, double alpha);

nlohmann::json to_json(const ScoreRecord& record);

}  // namespace longcode
