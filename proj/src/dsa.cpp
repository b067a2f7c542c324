#include "longcode/dsa.hpp"

#include <cmath>

#include "longcode/error.hpp"
#include "longcode/random.hpp"
#include "longcode/stats.hpp"

namespace longcode {

using nlohmann::json;

std::optional<SimilarityVector> PromptSimilarityCache::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

SimilarityVector PromptSimilarityCache::insert(const std::string& key, SimilarityVector v) {
  std::lock_guard lock(mu_);
  return entries_.try_emplace(key, std::move(v)).first->second;
}

std::size_t PromptSimilarityCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

namespace {

std::vector<Embedding> shot_prompt_embeddings(const PromptSuite& suite, const EmbeddingProvider& provider) {
  std::vector<Embedding> out;
  out.reserve(suite.shots.size());
  for (const auto& s : suite.shots) out.push_back(embed_text(s.description, provider));
  return out;
}

SimilarityVector against(const std::vector<Embedding>& prompts, const Embedding& global,
                         SimilarityKind kind) {
  SimilarityVector v;
  v.kind = kind;
  v.values.reserve(prompts.size());
  for (const auto& p : prompts) v.values.push_back(stats::cosine(p, global));
  return v;
}

std::string cache_key(const PromptSuite& suite, const EmbeddingProvider& provider) {
  return suite.suite_id + "|" + provider.id() + "|" + std::to_string(hash_string(prompt_global_text(suite)));
}

}  // namespace

SimilarityVector prompt_similarity(const PromptSuite& suite, const EmbeddingProvider& provider) {
  const auto prompts = shot_prompt_embeddings(suite, provider);
  return against(prompts, embed_prompt_global(suite, provider), SimilarityKind::prompt_prompt);
}

std::pair<SimilarityVector, SimilarityVector> similarity_vectors(
    const PromptSuite& suite, const ShotManifest& manifest, const EmbeddingProvider& provider,
    VideoEmbedMode mode, PromptSimilarityCache* cache) {
  validate_link(suite, manifest);
  const auto prompts = shot_prompt_embeddings(suite, provider);

  SimilarityVector s_c;
  const std::string key = cache ? cache_key(suite, provider) : std::string();
  if (auto hit = cache ? cache->find(key) : std::nullopt) {
    s_c = std::move(*hit);
  } else {
    s_c = against(prompts, embed_prompt_global(suite, provider), SimilarityKind::prompt_prompt);
    if (cache) s_c = cache->insert(key, std::move(s_c));
  }

  const Embedding video = embed_video_global(manifest, provider, mode);
  if (video.dim() != prompts.front().dim()) {
    throw ValidationError("video embedding dim " + std::to_string(video.dim()) +
                          " differs from text embedding dim " + std::to_string(prompts.front().dim()));
  }
  return {std::move(s_c), against(prompts, video, SimilarityKind::prompt_video)};
}

double dsa_score(const SimilarityVector& s_c, const SimilarityVector& s_v) {
  if (s_c.size() != s_v.size()) {
    throw ValidationError("dsa_score: similarity vectors differ in length");
  }
  if (s_c.size() < 3) throw ValidationError("dsa_score: needs K >= 3");
  try {
    return stats::spearman(s_c.values, s_v.values);
  } catch (const UndefinedError&) {
    throw UndefinedError("undefined DSA: a similarity vector has all entries tied");
  }
}

double normalize_dsa(double raw_spearman) {
  if (!(raw_spearman >= -1.0 && raw_spearman <= 1.0)) {
    throw ValidationError("normalize_dsa: input outside [-1, 1]");
  }
  return (raw_spearman + 1.0) / 2.0;
}

LongCodeScore fuse(double m_dsa, double m_mllm, double alpha) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(m_dsa) || !in_unit(m_mllm) || !in_unit(alpha)) {
    throw ValidationError("fuse: inputs must lie in [0, 1]");
  }
  LongCodeScore s;
  s.m_dsa = m_dsa;
  s.m_mllm = m_mllm;
  s.alpha = alpha;
  // lerp is exact when the two scores agree and never leaves their range.
  s.fused = std::lerp(m_mllm, m_dsa, alpha);
  s.raw_spearman = 2.0 * m_dsa - 1.0;
  return s;
}

ScoreRecord score_dsa(const PromptSuite& suite, const ShotManifest& manifest,
                      const EmbeddingProvider& provider, VideoEmbedMode mode,
                      PromptSimilarityCache* cache) {
  const auto [s_c, s_v] = similarity_vectors(suite, manifest, provider, mode, cache);
  ScoreRecord r;
  r.video_id = manifest.video_id;
  r.model_id = manifest.model_id;
  r.raw_spearman = dsa_score(s_c, s_v);
  r.m_dsa = normalize_dsa(r.raw_spearman);
  r.embed_mode = mode;
  return r;
}

void attach_judge(ScoreRecord& record, double m_mllm, double alpha) {
  const LongCodeScore s = fuse(record.m_dsa, m_mllm, alpha);
  record.m_mllm = s.m_mllm;
  record.alpha = s.alpha;
  record.fused = s.fused;
}

json to_json(const ScoreRecord& r) {
  json j = {{"video_id", r.video_id},
            {"model_id", r.model_id},
            {"raw_spearman", r.raw_spearman},
            {"m_dsa", r.m_dsa},
            {"alpha", r.alpha},
            {"embed_mode", to_string(r.embed_mode)},
            {"dsa_normalization", "(r+1)/2"}};
  if (r.m_mllm) j["m_mllm"] = *r.m_mllm;
  if (r.fused) j["fused"] = *r.fused;
  return j;
}

}  // namespace longcode
