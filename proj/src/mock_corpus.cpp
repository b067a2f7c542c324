#include "longcode/mock_corpus.hpp"

#include <cmath>

#include "longcode/error.hpp"
#include "longcode/random.hpp"

namespace longcode {

namespace {

constexpr const char* kSubjects[] = {"a lighthouse keeper", "two children", "an old fisherman", "a stray dog",
                                     "a courier on a bicycle", "a violinist", "a night-shift nurse", "a farmer"};
constexpr const char* kActions[] = {"walks along", "argues beside", "waits at", "runs through", "repairs",
                                    "searches", "paints", "sleeps near"};
constexpr const char* kPlaces[] = {"a rain-soaked harbor", "a crowded market", "an empty station",
                                   "a burning field", "a narrow stairwell", "a frozen lake", "a rooftop garden",
                                   "a dim workshop"};

template <std::size_t N>
const char* pick(const char* const (&words)[N], Rng& rng) {
  return words[rng.below(N)];
}

std::string pad3(std::size_t i) {
  std::string s = std::to_string(i);
  return s.size() < 3 ? std::string(3 - s.size(), '0') + s : s;
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace

MockCorpus make_mock_corpus(const MockCorpusOptions& o) {
  if (o.videos == 0 || o.shots < 2 || o.dim < 2) throw ValidationError("mock corpus: empty shape");
  if (o.model_ids.empty()) throw ValidationError("mock corpus: no model ids");
  if (!(o.noise >= 0.0)) throw ValidationError("mock corpus: noise must be non-negative");

  MockCorpus c;
  auto text = std::make_shared<MockProvider>(o.dim, derive_seed(o.seed, {0}));
  c.text = text;
  c.store = std::make_shared<EmbeddingStore>(text->id(), o.dim);

  for (std::size_t v = 0; v < o.videos; ++v) {
    Rng rng(derive_seed(o.seed, {1, v}));
    const std::string id = pad3(v);
    PromptSuite suite;
    suite.suite_id = "suite-" + id;
    suite.storyline = std::string("Story ") + id + ": " + pick(kSubjects, rng) + " and " + pick(kSubjects, rng) +
                      " near " + pick(kPlaces, rng) + ".";
    ShotManifest m;
    m.video_id = "video-" + id;
    m.model_id = o.model_ids[v % o.model_ids.size()];
    m.suite_id = suite.suite_id;
    for (std::size_t k = 0; k < o.shots; ++k) {
      ShotPrompt p;
      p.index = k;
      p.description = "Shot " + std::to_string(k + 1) + " of story " + id + ": " + pick(kSubjects, rng) + " " +
                      pick(kActions, rng) + " " + pick(kPlaces, rng) + ".";
      const Embedding t = text->embed_text(p.description);
      c.store->put(EmbeddingStore::text_key(p.description), t);
      const auto z = random_unit(rng, o.dim);
      std::vector<double> raw(o.dim);
      for (std::size_t d = 0; d < o.dim; ++d) raw[d] = t.values()[d] + o.noise * z[d];

      Shot s;
      s.index = k;
      s.duration_s = p.duration_s;
      s.embedding_ref = m.video_id + "/shot-" + pad3(k);
      c.store->put(s.embedding_ref, Embedding::normalized(std::move(raw), text->id()));
      suite.shots.push_back(std::move(p));
      m.shots.push_back(std::move(s));
    }
    suite.target_total_s = suite.total_duration();
    const std::string global = prompt_global_text(suite);
    c.store->put(EmbeddingStore::text_key(global), text->embed_text(global));
    c.suites.push_back(std::move(suite));
    c.manifests.push_back(std::move(m));
  }
  c.provider = std::make_shared<StoreProvider>(c.store, c.text);
  return c;
}

ShotBank make_mock_bank(std::size_t size, std::size_t dim, std::uint64_t seed, const std::string& embedder_id) {
  std::vector<BankEntry> entries;
  for (std::size_t i = 0; i < size; ++i) {
    Rng rng(derive_seed(seed, {i}));
    entries.push_back({"bank-" + pad3(i), Embedding::normalized(random_unit(rng, dim), embedder_id), {}, "mock"});
  }
  return ShotBank(std::move(entries));
}

double mock_shot_quality(const Shot& shot) {
  return static_cast<double>(hash_string(shot.embedding_ref, 0x5155414C) >> 11) * 0x1.0p-53;
}

double mock_short_metric(const ShotManifest& manifest, Aggregator phi) {
  std::vector<double> q;
  q.reserve(manifest.shots.size());
  for (const auto& s : manifest.shots) q.push_back(mock_shot_quality(s));
  return aggregate_short(q, phi);
}

}  // namespace longcode
