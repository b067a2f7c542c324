#pragma once

// Text and video embeddings behind a provider interface, plus the
// order-sensitive global-video aggregation used by DSA.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "longcode/manifest.hpp"

namespace longcode {

class HttpTransport;

inline constexpr double kUnitNormTolerance = 1e-6;

/// Unit-norm real vector tagged with the embedder that produced it.
class Embedding {
 public:
  Embedding() = default;
  /// Validates finiteness and unit norm (within kUnitNormTolerance).
  Embedding(std::vector<double> values, std::string embedder_id);

  /// Scales `raw` to unit length. Throws ValidationError on zero or
  /// non-finite input.
  static Embedding normalized(std::vector<double> raw, std::string embedder_id);

  std::span<const double> values() const { return values_; }
  std::size_t dim() const { return values_.size(); }
  const std::string& embedder_id() const { return embedder_id_; }

  bool operator==(const Embedding&) const = default;

 private:
  std::vector<double> values_;
  std::string embedder_id_;
};

/// Keeps vectors that are already unit length bit for bit (so stored
/// embeddings round-trip exactly); rescales anything else.
Embedding accept_vector(std::vector<double> values, std::string embedder_id);

using EmbeddingMap = std::map<std::string, Embedding, std::less<>>;

enum class VideoEmbedMode { positional_pool, whole_video };

std::string_view to_string(VideoEmbedMode mode);
VideoEmbedMode video_embed_mode_from_string(std::string_view s);

/// Provider contract. Implementations must be safe for concurrent calls and
/// must return unit-norm vectors.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual Embedding embed_text(std::string_view text) const = 0;
  virtual Embedding embed_shot(const Shot& shot) const = 0;
  /// Whole-video encoding; providers that cannot do it throw ServiceError.
  virtual Embedding embed_video(const ShotManifest& manifest) const;
  /// Image encoding, used by external-command transformers.
  virtual std::vector<Embedding> embed_images(std::span<const std::string> paths) const;
};

// Module-level operations.
Embedding embed_text(std::string_view text, const EmbeddingProvider& provider);
Embedding embed_shot(const Shot& shot, const EmbeddingProvider& provider);
/// Storyline followed by every shot description in index order, one per line.
std::string prompt_global_text(const PromptSuite& suite);
Embedding embed_prompt_global(const PromptSuite& suite, const EmbeddingProvider& provider);
Embedding embed_video_global(const ShotManifest& manifest, const EmbeddingProvider& provider,
                             VideoEmbedMode mode = VideoEmbedMode::positional_pool);

/// Linear-decay weights w_k = 2(K-k+1)/(K(K+1)) for 1-based k; they sum to 1.
std::vector<double> positional_weights(std::size_t count);
/// normalize(sum_k w_k e_k). Throws on empty input or mismatched dims.
Embedding positional_pool(std::span<const Embedding> items, std::string embedder_id);

/// Deterministic mock. Each newline-separated segment of a text (and each
/// shot reference) maps to a hash-seeded direction on the unit sphere;
/// multi-segment texts are positional-pooled over their segments.
class MockProvider : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 256;
  static constexpr std::uint64_t kDefaultSeed = 0x4C6F6E67434F4445ull;

  explicit MockProvider(std::size_t dim = kDefaultDim, std::uint64_t seed = kDefaultSeed);

  std::string id() const override;
  std::size_t dim() const override { return dim_; }
  Embedding embed_text(std::string_view text) const override;
  Embedding embed_shot(const Shot& shot) const override;
  Embedding embed_video(const ShotManifest& manifest) const override;
  std::vector<Embedding> embed_images(std::span<const std::string> paths) const override;

  /// Raw hash-seeded direction for an arbitrary key.
  Embedding direction(std::string_view key) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Precomputed vectors keyed by shot reference or by text key.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::string embedder_id, std::size_t dim);

  const std::string& embedder_id() const { return embedder_id_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  const EmbeddingMap& entries() const { return entries_; }

  /// Inserts or overwrites. Throws ValidationError on dim/id mismatch.
  void put(std::string key, Embedding e);
  const Embedding* find(std::string_view key) const;

  /// Key under which a text embedding is stored.
  static std::string text_key(std::string_view text);

  bool operator==(const EmbeddingStore&) const = default;

 private:
  std::string embedder_id_;
  std::size_t dim_ = 0;
  EmbeddingMap entries_;
};

nlohmann::json to_json(const EmbeddingStore& store);
EmbeddingStore store_from_json(const nlohmann::json& j);
/// JSON or binary, chosen by the file extension (.bin = binary).
EmbeddingStore load_embedding_store(const std::filesystem::path& path);
void save_embedding_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_embedding_store_binary(const std::filesystem::path& path);
void save_embedding_store_binary(const EmbeddingStore& store, const std::filesystem::path& path);

/// Serves shots (and optionally texts) from a store; text lookups that miss
/// fall back to `text_fallback` when one is given.
class StoreProvider : public EmbeddingProvider {
 public:
  StoreProvider(std::shared_ptr<const EmbeddingStore> store,
                std::shared_ptr<const EmbeddingProvider> text_fallback = nullptr);

  std::string id() const override { return store_->embedder_id(); }
  std::size_t dim() const override { return store_->dim(); }
  Embedding embed_text(std::string_view text) const override;
  Embedding embed_shot(const Shot& shot) const override;
  Embedding embed_video(const ShotManifest& manifest) const override;
  std::vector<Embedding> embed_images(std::span<const std::string> paths) const override;

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  std::shared_ptr<const EmbeddingProvider> text_fallback_;
};

/// Shot references found in `overlay` shadow the base provider. Corruption
/// operators return their new embeddings in such an overlay.
class OverlayProvider : public EmbeddingProvider {
 public:
  OverlayProvider(std::shared_ptr<const EmbeddingProvider> base,
                  EmbeddingMap overlay);

  std::string id() const override { return base_->id(); }
  std::size_t dim() const override { return base_->dim(); }
  Embedding embed_text(std::string_view text) const override { return base_->embed_text(text); }
  Embedding embed_shot(const Shot& shot) const override;
  Embedding embed_video(const ShotManifest& manifest) const override;
  std::vector<Embedding> embed_images(std::span<const std::string> paths) const override {
    return base_->embed_images(paths);
  }

 private:
  std::shared_ptr<const EmbeddingProvider> base_;
  EmbeddingMap overlay_;
};

/// Memoizes embed_text of the wrapped provider.
class CachedTextProvider : public EmbeddingProvider {
 public:
  explicit CachedTextProvider(std::shared_ptr<const EmbeddingProvider> inner);

  std::string id() const override { return inner_->id(); }
  std::size_t dim() const override { return inner_->dim(); }
  Embedding embed_text(std::string_view text) const override;
  Embedding embed_shot(const Shot& shot) const override { return inner_->embed_shot(shot); }
  Embedding embed_video(const ShotManifest& m) const override { return inner_->embed_video(m); }
  std::vector<Embedding> embed_images(std::span<const std::string> paths) const override {
    return inner_->embed_images(paths);
  }

  std::size_t cache_size() const;
  std::size_t inner_calls() const;

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, Embedding> cache_;
  mutable std::size_t inner_calls_ = 0;
};

struct RemoteEmbedderConfig {
  std::string endpoint;             // full URL, e.g. http://host:8080/embed
  std::string token_env = "LONGCODE_EMBED_TOKEN";
  std::string embedder_id = "remote";
  std::size_t dim = 0;              // 0 = accept whatever the service returns
  std::size_t max_in_flight = 4;
  int max_attempts = 4;
  int base_delay_ms = 250;
};

/// HTTP provider: POST {texts:[...]} or {image_paths:[...]} and read
/// {vectors:[[...]]}. Returned vectors are re-normalized.
class RemoteProvider : public EmbeddingProvider {
 public:
  explicit RemoteProvider(RemoteEmbedderConfig cfg);
  ~RemoteProvider() override;

  std::string id() const override { return cfg_.embedder_id; }
  std::size_t dim() const override { return cfg_.dim; }
  Embedding embed_text(std::string_view text) const override;
  Embedding embed_shot(const Shot& shot) const override;
  Embedding embed_video(const ShotManifest& manifest) const override;
  std::vector<Embedding> embed_images(std::span<const std::string> paths) const override;

  std::vector<Embedding> embed_texts(std::span<const std::string> texts) const;

 private:
  std::vector<Embedding> post(const nlohmann::json& body, std::size_t expected) const;

  RemoteEmbedderConfig cfg_;
  std::unique_ptr<HttpTransport> http_;
};

}  // namespace longcode
