#pragma once

// Long-range corruption operators over manifests (shuffle, replace, edit,
// synthesize), strength sweeps of arbitrary metrics, and the regression
// test that classifies a metric as sensitive to a corruption.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "longcode/embedder.hpp"
#include "longcode/manifest.hpp"
#include "longcode/parallel.hpp"
#include "longcode/stats.hpp"

namespace longcode {

class Judge;
class ChatClient;
struct JudgeConfig;
struct PromptTemplates;

inline constexpr double kDefaultBlockSeconds = 10.0;
inline constexpr double kSensitivityMinR2 = 0.6;

enum class CorruptionOp { shuffle, replace, edit, synthesize };

std::string_view to_string(CorruptionOp op);
CorruptionOp corruption_op_from_string(std::string_view s);

struct CorruptionSpec {
  CorruptionOp op = CorruptionOp::shuffle;
  double strength = 0.0;  // shuffle: fraction of blocks; others: block count
  double block_s = kDefaultBlockSeconds;
  std::uint64_t seed = 0;
};

/// Half-open range [begin, end) of shot positions.
struct BlockRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const BlockRange&) const = default;
};

/// Greedy grouping: each block reaches block_s seconds except possibly the
/// last, which is kept.
std::vector<BlockRange> blockify(const ShotManifest& manifest, double block_s = kDefaultBlockSeconds);

struct Replacement {
  std::size_t block = 0;      // block position in the manifest
  std::size_t bank_index = 0;
  double cosine = 0.0;
};

struct CorruptionResult {
  ShotManifest manifest;
  EmbeddingMap new_embeddings;        // refs introduced by the operator
  std::vector<std::size_t> touched_blocks;
  std::vector<Replacement> replacements;
  bool identity_permutation = false;  // shuffle drew the identity twice
};

CorruptionResult shuffle(const ShotManifest& manifest, double fraction, std::uint64_t seed,
                         double block_s = kDefaultBlockSeconds);

struct BankEntry {
  std::string block_id;
  Embedding embedding;
  std::vector<std::string> keyframes;
  std::string source_video_id;
};

/// Pool of exogenous segments for Replace. Keeps a row-major copy of the
/// embeddings for the retrieval kernel.
class ShotBank {
 public:
  ShotBank() = default;
  explicit ShotBank(std::vector<BankEntry> entries);

  const std::vector<BankEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }

  /// Index of the entry with the highest cosine to `query`; ties go to the
  /// lexicographically smallest block_id.
  Replacement retrieve(const Embedding& query, Exec exec = Exec::serial) const;

 private:
  std::vector<BankEntry> entries_;
  std::size_t dim_ = 0;
  std::vector<double> rows_;
  std::vector<std::size_t> tie_rank_;
};

ShotBank load_shot_bank(const std::filesystem::path& path);
void save_shot_bank(const ShotBank& bank, const std::filesystem::path& path);
nlohmann::json to_json(const ShotBank& bank);
ShotBank shot_bank_from_json(const nlohmann::json& j);

/// Embedding of a block: positional pool of its member shots.
Embedding block_embedding(const ShotManifest& manifest, const BlockRange& block,
                          const EmbeddingProvider& provider);

CorruptionResult replace(const ShotManifest& manifest, const ShotBank& bank, std::size_t k,
                         std::uint64_t seed, const EmbeddingProvider& provider,
                         double block_s = kDefaultBlockSeconds, Exec exec = Exec::serial);

struct TransformInput {
  const Shot& shot;
  const Embedding& embedding;
  std::string caption;           // rewritten caption (synthesis) or empty
  std::uint64_t seed = 0;
};

struct TransformOutput {
  Embedding embedding;
  std::vector<std::string> keyframes;
};

/// Stand-in for a video editing / generation model acting on one shot.
class ShotTransformer {
 public:
  virtual ~ShotTransformer() = default;
  virtual TransformOutput transform(const TransformInput& in) const = 0;
};

/// Rotates the shot embedding by `angle` radians toward a seeded random
/// direction orthogonal to it.
class RotationTransformer : public ShotTransformer {
 public:
  explicit RotationTransformer(double angle = 0.6);
  TransformOutput transform(const TransformInput& in) const override;

 private:
  double angle_;
};

/// Replacement embedding = text embedding of the (rewritten) caption.
class TextEmbeddingTransformer : public ShotTransformer {
 public:
  explicit TextEmbeddingTransformer(std::shared_ptr<const EmbeddingProvider> provider);
  TransformOutput transform(const TransformInput& in) const override;

 private:
  std::shared_ptr<const EmbeddingProvider> provider_;
};

/// Shells out to "<tool> {in_keyframe} {caption} {out_dir}" and embeds the
/// images it writes through the provider.
class CommandTransformer : public ShotTransformer {
 public:
  CommandTransformer(std::string command_template, std::filesystem::path work_dir,
                     std::shared_ptr<const EmbeddingProvider> provider);
  TransformOutput transform(const TransformInput& in) const override;

 private:
  std::string template_;
  std::filesystem::path work_dir_;
  std::shared_ptr<const EmbeddingProvider> provider_;
};

class ShotCaptioner {
 public:
  virtual ~ShotCaptioner() = default;
  virtual std::string caption(const Shot& shot, std::size_t position, std::size_t count) const = 0;
};

/// Deterministic captioner used with mocks: "shot <embedding_ref>".
class RefCaptioner : public ShotCaptioner {
 public:
  std::string caption(const Shot& shot, std::size_t position, std::size_t count) const override;
};

/// Captions through the judge's stage-(a) machinery.
class JudgeCaptioner : public ShotCaptioner {
 public:
  explicit JudgeCaptioner(std::shared_ptr<const Judge> judge);
  std::string caption(const Shot& shot, std::size_t position, std::size_t count) const override;

 private:
  std::shared_ptr<const Judge> judge_;
};

class TextRewriter {
 public:
  virtual ~TextRewriter() = default;
  virtual std::string rewrite(std::string_view caption, std::uint64_t seed) const = 0;
};

class PrefixRewriter : public TextRewriter {
 public:
  explicit PrefixRewriter(std::string prefix = "surreal: ");
  std::string rewrite(std::string_view caption, std::uint64_t seed) const override;

 private:
  std::string prefix_;
};

/// Asks the chat service to make a caption surreal.
class ChatRewriter : public TextRewriter {
 public:
  ChatRewriter(std::shared_ptr<ChatClient> client, std::string model, std::string prompt_template);
  std::string rewrite(std::string_view caption, std::uint64_t seed) const override;

 private:
  std::shared_ptr<ChatClient> client_;
  std::string model_;
  std::string template_;
};

CorruptionResult edit(const ShotManifest& manifest, std::size_t k, const ShotTransformer& transformer,
                      std::uint64_t seed, const EmbeddingProvider& provider,
                      double block_s = kDefaultBlockSeconds);

CorruptionResult synthesize(const ShotManifest& manifest, std::size_t k,
                            const ShotCaptioner& captioner, const TextRewriter& rewriter,
                            const ShotTransformer& transformer, std::uint64_t seed,
                            const EmbeddingProvider& provider,
                            double block_s = kDefaultBlockSeconds);

/// Everything the operators may need; unused members can stay null.
struct CorruptionToolkit {
  std::shared_ptr<const EmbeddingProvider> provider;
  std::shared_ptr<const ShotBank> bank;
  std::shared_ptr<const ShotTransformer> editor;
  std::shared_ptr<const ShotCaptioner> captioner;
  std::shared_ptr<const TextRewriter> rewriter;
  std::shared_ptr<const ShotTransformer> synthesizer;
  Exec exec = Exec::serial;
};

/// Dispatches on spec.op. Strength 0 returns the input unchanged.
CorruptionResult apply(const ShotManifest& manifest, const CorruptionSpec& spec,
                       const CorruptionToolkit& toolkit);

/// Scores a (possibly corrupted) manifest. `provider` resolves every shot
/// reference, including ones introduced by the operator.
using MetricFn = std::function<double(const ShotManifest&, const EmbeddingProvider&)>;

struct SweepCell {
  std::size_t strength_index = 0;
  double strength = 0.0;
  std::size_t trial = 0;
  std::string video_id;
  std::optional<double> score;
  std::string error;
  bool identity_permutation = false;
};

struct SweepTable {
  CorruptionOp op = CorruptionOp::shuffle;
  std::vector<double> strengths;
  std::size_t trials = 0;
  std::vector<SweepCell> cells;  // strength-major, then trial, then video

  /// Mean of successful cells per strength (NaN when none succeeded).
  std::vector<double> means() const;
  std::size_t failures() const;
};

struct SweepOptions {
  CorruptionOp op = CorruptionOp::shuffle;
  std::vector<double> strengths;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  double block_s = kDefaultBlockSeconds;
};

/// Seeds are derive_seed(master, {strength index, trial, video index}), so
/// results do not depend on scheduling.
SweepTable sweep(const MetricFn& metric, std::span<const ShotManifest> manifests,
                 const SweepOptions& options, const CorruptionToolkit& toolkit);

struct SensitivityResult {
  std::vector<double> strengths;
  std::vector<double> means;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  bool sensitive = false;
};

SensitivityResult classify_sensitivity(std::span<const double> strengths, std::span<const double> means);
SensitivityResult classify_sensitivity(const SweepTable& table);

/// CSV with header operator,strength,trial,video_id,score ("NA" for failed cells).
std::string sweep_csv(const SweepTable& table);
nlohmann::json sweep_summary(std::string_view metric_name, const SweepTable& table,
                             const SensitivityResult& result);

}  // namespace longcode
