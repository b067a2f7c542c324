#pragma once

// Synthetic videos for offline runs: suites with random shot descriptions,
// manifests whose shot embeddings are noisy copies of the description
// embeddings, and a matching bank of exogenous segments.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "longcode/corruption.hpp"
#include "longcode/embedder.hpp"
#include "longcode/manifest.hpp"
#include "longcode/orthogonality.hpp"

namespace longcode {

struct MockCorpusOptions {
  std::size_t videos = 20;
  std::size_t shots = 12;
  std::size_t dim = MockProvider::kDefaultDim;
  double noise = 0.5;  // shot = normalize(t_k + noise * z), z a random unit vector
  std::uint64_t seed = 1;
  std::vector<std::string> model_ids{"mock-model"};  // assigned round-robin
};

/// The store also holds the text embeddings of every description and of
/// every suite's global prompt, so it is usable without the mock provider.
struct MockCorpus {
  std::vector<PromptSuite> suites;
  std::vector<ShotManifest> manifests;
  std::shared_ptr<EmbeddingStore> store;
  std::shared_ptr<const MockProvider> text;
  /// Store-backed shots, mock text embeddings.
  std::shared_ptr<const EmbeddingProvider> provider;
};

MockCorpus make_mock_corpus(const MockCorpusOptions& options);

/// `size` random unit-vector entries with block ids "bank-000", ...
ShotBank make_mock_bank(std::size_t size, std::size_t dim, std::uint64_t seed, const std::string& embedder_id);

/// Per-shot quality in [0, 1): a hash of the shot's embedding reference.
double mock_shot_quality(const Shot& shot);

/// Symmetric aggregate of mock_shot_quality over the manifest.
double mock_short_metric(const ShotManifest& manifest, Aggregator phi = Aggregator::mean);

}  // namespace longcode
