#include "longcode/embedder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "longcode/error.hpp"
#include "longcode/http.hpp"
#include "longcode/random.hpp"

namespace longcode {

using nlohmann::json;

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

Embedding accept_vector(std::vector<double> values, std::string embedder_id) {
  const double n = l2_norm(values);
  if (std::isfinite(n) && std::abs(n - 1.0) <= kUnitNormTolerance) {
    return Embedding(std::move(values), std::move(embedder_id));
  }
  return Embedding::normalized(std::move(values), std::move(embedder_id));
}

Embedding::Embedding(std::vector<double> values, std::string embedder_id)
    : values_(std::move(values)), embedder_id_(std::move(embedder_id)) {
  if (values_.empty()) throw ValidationError("embedding has no components");
  for (double x : values_) {
    if (!std::isfinite(x)) throw ValidationError("embedding has a non-finite component");
  }
  const double n = l2_norm(values_);
  if (std::abs(n - 1.0) > kUnitNormTolerance) {
    std::ostringstream os;
    os << "embedding norm " << n << " is not 1";
    throw ValidationError(os.str());
  }
}

Embedding Embedding::normalized(std::vector<double> raw, std::string embedder_id) {
  const double n = l2_norm(raw);
  if (!std::isfinite(n) || n == 0.0) {
    throw ValidationError("cannot normalize a zero or non-finite vector");
  }
  for (double& x : raw) x /= n;
  return Embedding(std::move(raw), std::move(embedder_id));
}

std::string_view to_string(VideoEmbedMode mode) {
  return mode == VideoEmbedMode::positional_pool ? "positional-pool" : "whole-video";
}

VideoEmbedMode video_embed_mode_from_string(std::string_view s) {
  if (s == "positional-pool") return VideoEmbedMode::positional_pool;
  if (s == "whole-video") return VideoEmbedMode::whole_video;
  throw UsageError("unknown embed mode '" + std::string(s) + "' (positional-pool|whole-video)");
}

Embedding EmbeddingProvider::embed_video(const ShotManifest&) const {
  throw ServiceError("embedder '" + id() + "' cannot encode whole videos");
}

std::vector<Embedding> EmbeddingProvider::embed_images(std::span<const std::string>) const {
  throw ServiceError("embedder '" + id() + "' cannot encode images");
}

Embedding embed_text(std::string_view text, const EmbeddingProvider& provider) {
  if (text.empty()) throw ValidationError("cannot embed empty text");
  return provider.embed_text(text);
}

Embedding embed_shot(const Shot& shot, const EmbeddingProvider& provider) {
  return provider.embed_shot(shot);
}

std::string prompt_global_text(const PromptSuite& suite) {
  std::string text = suite.storyline;
  for (const auto& s : suite.shots) {
    if (!text.empty()) text += '\n';
    text += s.description;
  }
  return text;
}

Embedding embed_prompt_global(const PromptSuite& suite, const EmbeddingProvider& provider) {
  if (suite.shots.size() < 2) throw ValidationError("global prompt embedding needs K >= 2");
  return embed_text(prompt_global_text(suite), provider);
}

std::vector<double> positional_weights(std::size_t count) {
  std::vector<double> w(count);
  const double denom = static_cast<double>(count) * static_cast<double>(count + 1);
  for (std::size_t k = 1; k <= count; ++k) {
    w[k - 1] = 2.0 * static_cast<double>(count - k + 1) / denom;
  }
  return w;
}

Embedding positional_pool(std::span<const Embedding> items, std::string embedder_id) {
  if (items.empty()) throw ValidationError("positional pool of zero embeddings");
  const std::size_t dim = items.front().dim();
  const auto w = positional_weights(items.size());
  std::vector<double> acc(dim, 0.0);
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (items[k].dim() != dim) throw ValidationError("dimension mismatch in positional pool");
    const auto v = items[k].values();
    for (std::size_t d = 0; d < dim; ++d) acc[d] += w[k] * v[d];
  }
  return Embedding::normalized(std::move(acc), std::move(embedder_id));
}

Embedding embed_video_global(const ShotManifest& manifest, const EmbeddingProvider& provider,
                             VideoEmbedMode mode) {
  if (mode == VideoEmbedMode::whole_video) return provider.embed_video(manifest);
  std::vector<Embedding> shots;
  shots.reserve(manifest.shots.size());
  for (const auto& s : manifest.shots) shots.push_back(provider.embed_shot(s));
  return positional_pool(shots, provider.id());
}

// ---------------------------------------------------------------- mock

MockProvider::MockProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ValidationError("mock embedder dimension must be positive");
}

std::string MockProvider::id() const {
  return "mock-" + std::to_string(dim_) + "-" + hex64(seed_);
}

Embedding MockProvider::direction(std::string_view key) const {
  Rng rng(hash_string(key, seed_));
  std::vector<double> v(dim_);
  for (double& x : v) x = rng.normal();
  return Embedding::normalized(std::move(v), id());
}

Embedding MockProvider::embed_text(std::string_view text) const {
  if (text.empty()) throw ValidationError("cannot embed empty text");
  std::vector<Embedding> segments;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto seg = text.substr(start, end - start);
    if (!seg.empty()) segments.push_back(direction(std::string("text:") + std::string(seg)));
    start = end + 1;
  }
  if (segments.empty()) throw ValidationError("cannot embed whitespace-only text");
  if (segments.size() == 1) return segments.front();
  return positional_pool(segments, id());
}

Embedding MockProvider::embed_shot(const Shot& shot) const {
  return direction("shot:" + shot.embedding_ref);
}

Embedding MockProvider::embed_video(const ShotManifest& manifest) const {
  std::string key = "video:";
  for (const auto& s : manifest.shots) {
    key += s.embedding_ref;
    key += '\x1f';
  }
  return direction(key);
}

std::vector<Embedding> MockProvider::embed_images(std::span<const std::string> paths) const {
  std::vector<Embedding> out;
  for (const auto& p : paths) out.push_back(direction("image:" + p));
  return out;
}

// ---------------------------------------------------------------- store

EmbeddingStore::EmbeddingStore(std::string embedder_id, std::size_t dim)
    : embedder_id_(std::move(embedder_id)), dim_(dim) {}

void EmbeddingStore::put(std::string key, Embedding e) {
  if (dim_ == 0 && embedder_id_.empty()) {
    dim_ = e.dim();
    embedder_id_ = e.embedder_id();
  }
  if (e.dim() != dim_) {
    throw ValidationError("store dim " + std::to_string(dim_) + " but '" + key + "' has dim " +
                          std::to_string(e.dim()));
  }
  if (e.embedder_id() != embedder_id_) {
    throw ValidationError("store holds '" + embedder_id_ + "' vectors but '" + key + "' comes from '" +
                          e.embedder_id() + "'");
  }
  entries_.insert_or_assign(std::move(key), std::move(e));
}

const Embedding* EmbeddingStore::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string EmbeddingStore::text_key(std::string_view text) {
  return "text:" + hex64(hash_string(text));
}

json to_json(const EmbeddingStore& store) {
  json entries = json::object();
  for (const auto& [key, e] : store.entries()) entries[key] = e.values();
  return {{"embedder_id", store.embedder_id()}, {"dim", store.dim()}, {"entries", std::move(entries)}};
}

EmbeddingStore store_from_json(const json& j) {
  try {
    EmbeddingStore store(j.at("embedder_id").get<std::string>(), j.at("dim").get<std::size_t>());
    for (const auto& [key, vec] : j.at("entries").items()) {
      store.put(key, accept_vector(vec.get<std::vector<double>>(), store.embedder_id()));
    }
    return store;
  } catch (const json::exception& e) {
    throw ParseError(std::string("embedding store: ") + e.what());
  }
}

namespace {

constexpr char kBinaryMagic[4] = {'L', 'C', 'E', 'S'};
constexpr std::uint32_t kBinaryVersion = 1;

template <class T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
  }
}

template <class T>
T get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("binary embedding store truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(v);
}

std::string get_bytes(std::string_view in, std::size_t& pos, std::size_t n) {
  if (pos + n > in.size()) throw ParseError("binary embedding store truncated");
  std::string s(in.substr(pos, n));
  pos += n;
  return s;
}

}  // namespace

void save_embedding_store_binary(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::string out(kBinaryMagic, 4);
  put_le<std::uint32_t>(out, kBinaryVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  put_le<std::uint64_t>(out, store.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.embedder_id().size()));
  out += store.embedder_id();
  for (const auto& [key, e] : store.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
    out += key;
    for (double x : e.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  write_text_file(path, out);
}

EmbeddingStore load_embedding_store_binary(const std::filesystem::path& path) {
  const std::string data = read_text_file(path);
  std::size_t pos = 0;
  if (get_bytes(data, pos, 4) != std::string(kBinaryMagic, 4)) {
    throw ParseError(path.string() + ": not a binary embedding store");
  }
  if (get_le<std::uint32_t>(data, pos) != kBinaryVersion) {
    throw ParseError(path.string() + ": unsupported store version");
  }
  const auto dim = get_le<std::uint32_t>(data, pos);
  const auto count = get_le<std::uint64_t>(data, pos);
  const auto id_len = get_le<std::uint32_t>(data, pos);
  EmbeddingStore store(get_bytes(data, pos, id_len), dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto key_len = get_le<std::uint32_t>(data, pos);
    std::string key = get_bytes(data, pos, key_len);
    std::vector<double> v(dim);
    for (auto& x : v) x = std::bit_cast<float>(get_le<std::uint32_t>(data, pos));
    store.put(std::move(key), Embedding::normalized(std::move(v), store.embedder_id()));
  }
  if (pos != data.size()) throw ParseError(path.string() + ": trailing bytes after store");
  return store;
}

EmbeddingStore load_embedding_store(const std::filesystem::path& path) {
  if (path.extension() == ".bin") return load_embedding_store_binary(path);
  return store_from_json(read_json_file(path));
}

void save_embedding_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  if (path.extension() == ".bin") return save_embedding_store_binary(store, path);
  write_text_file(path, to_json(store).dump() + "\n");
}

StoreProvider::StoreProvider(std::shared_ptr<const EmbeddingStore> store,
                             std::shared_ptr<const EmbeddingProvider> text_fallback)
    : store_(std::move(store)), text_fallback_(std::move(text_fallback)) {
  if (!store_) throw UsageError("store provider needs a store");
  if (text_fallback_ && store_->size() > 0 && text_fallback_->dim() != store_->dim()) {
    throw ValidationError("text fallback dim " + std::to_string(text_fallback_->dim()) +
                          " differs from store dim " + std::to_string(store_->dim()));
  }
}

Embedding StoreProvider::embed_text(std::string_view text) const {
  if (const Embedding* e = store_->find(EmbeddingStore::text_key(text))) return *e;
  if (text_fallback_) return text_fallback_->embed_text(text);
  throw ServiceError("missing text embedding for '" + std::string(text.substr(0, 60)) + "'");
}

Embedding StoreProvider::embed_shot(const Shot& shot) const {
  if (const Embedding* e = store_->find(shot.embedding_ref)) return *e;
  throw ServiceError("missing embedding " + shot.embedding_ref);
}

Embedding StoreProvider::embed_video(const ShotManifest& manifest) const {
  if (const Embedding* e = store_->find("video:" + manifest.video_id)) return *e;
  throw ServiceError("missing whole-video embedding video:" + manifest.video_id);
}

std::vector<Embedding> StoreProvider::embed_images(std::span<const std::string> paths) const {
  std::vector<Embedding> out;
  for (const auto& p : paths) {
    const Embedding* e = store_->find("image:" + p);
    if (!e) throw ServiceError("missing image embedding image:" + p);
    out.push_back(*e);
  }
  return out;
}

OverlayProvider::OverlayProvider(std::shared_ptr<const EmbeddingProvider> base, EmbeddingMap overlay)
    : base_(std::move(base)), overlay_(std::move(overlay)) {
  for (const auto& [key, e] : overlay_) {
    if (e.dim() != base_->dim()) {
      throw ValidationError("overlay entry '" + key + "' dim differs from base embedder");
    }
  }
}

Embedding OverlayProvider::embed_shot(const Shot& shot) const {
  auto it = overlay_.find(shot.embedding_ref);
  if (it != overlay_.end()) return it->second;
  return base_->embed_shot(shot);
}

Embedding OverlayProvider::embed_video(const ShotManifest& manifest) const {
  return base_->embed_video(manifest);
}

CachedTextProvider::CachedTextProvider(std::shared_ptr<const EmbeddingProvider> inner)
    : inner_(std::move(inner)) {}

Embedding CachedTextProvider::embed_text(std::string_view text) const {
  std::string key(text);
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Embedding e = inner_->embed_text(text);
  std::lock_guard lock(mu_);
  ++inner_calls_;
  return cache_.try_emplace(std::move(key), std::move(e)).first->second;
}

std::size_t CachedTextProvider::cache_size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

std::size_t CachedTextProvider::inner_calls() const {
  std::lock_guard lock(mu_);
  return inner_calls_;
}

// ---------------------------------------------------------------- remote

RemoteProvider::RemoteProvider(RemoteEmbedderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw UsageError("remote embedder needs an endpoint");
  http_ = std::make_unique<HttpTransport>(
      cfg_.endpoint, HttpRetryPolicy{cfg_.max_attempts, cfg_.base_delay_ms, 8000}, cfg_.max_in_flight);
}

RemoteProvider::~RemoteProvider() = default;

std::vector<Embedding> RemoteProvider::post(const json& body, std::size_t expected) const {
  const std::string reply = http_->post_json(body.dump(), read_secret(cfg_.token_env));
  std::vector<Embedding> out;
  try {
    const json j = json::parse(reply);
    for (const auto& v : j.at("vectors")) {
      auto values = v.get<std::vector<double>>();
      if (cfg_.dim != 0 && values.size() != cfg_.dim) {
        throw ServiceError("embedder returned dim " + std::to_string(values.size()) + ", expected " +
                           std::to_string(cfg_.dim));
      }
      out.push_back(Embedding::normalized(std::move(values), cfg_.embedder_id));
    }
  } catch (const json::exception& e) {
    throw ServiceError(std::string("malformed embedder reply: ") + e.what());
  } catch (const ValidationError& e) {
    throw ServiceError(std::string("embedder returned an invalid vector: ") + e.what());
  }
  if (out.size() != expected) {
    throw ServiceError("embedder returned " + std::to_string(out.size()) + " vectors, expected " +
                       std::to_string(expected));
  }
  return out;
}

std::vector<Embedding> RemoteProvider::embed_texts(std::span<const std::string> texts) const {
  return post(json{{"texts", texts}}, texts.size());
}

Embedding RemoteProvider::embed_text(std::string_view text) const {
  return post(json{{"texts", json::array({std::string(text)})}}, 1).front();
}

std::vector<Embedding> RemoteProvider::embed_images(std::span<const std::string> paths) const {
  return post(json{{"image_paths", paths}}, paths.size());
}

Embedding RemoteProvider::embed_shot(const Shot& shot) const {
  if (shot.keyframes.empty()) {
    throw ServiceError("shot " + std::to_string(shot.index) + " has no keyframes to embed");
  }
  const auto frames = embed_images(shot.keyframes);
  std::vector<double> acc(frames.front().dim(), 0.0);
  for (const auto& f : frames) {
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += f.values()[d];
  }
  return Embedding::normalized(std::move(acc), cfg_.embedder_id);
}

Embedding RemoteProvider::embed_video(const ShotManifest& manifest) const {
  std::vector<std::string> frames;
  for (const auto& s : manifest.shots) frames.insert(frames.end(), s.keyframes.begin(), s.keyframes.end());
  if (frames.empty()) throw ServiceError("manifest '" + manifest.video_id + "' has no keyframes");
  return post(json{{"image_paths", frames}, {"mode", "video"}}, 1).front();
}

}  // namespace longcode
