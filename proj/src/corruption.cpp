#include "longcode/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "longcode/chat.hpp"
#include "longcode/command.hpp"
#include "longcode/error.hpp"
#include "longcode/judge.hpp"
#include "longcode/random.hpp"

namespace longcode {

using nlohmann::json;

std::string_view to_string(CorruptionOp op) {
  switch (op) {
    case CorruptionOp::shuffle: return "shuffle";
    case CorruptionOp::replace: return "replace";
    case CorruptionOp::edit: return "edit";
    case CorruptionOp::synthesize: return "synthesize";
  }
  return "shuffle";
}

CorruptionOp corruption_op_from_string(std::string_view s) {
  for (auto op : {CorruptionOp::shuffle, CorruptionOp::replace, CorruptionOp::edit, CorruptionOp::synthesize}) {
    if (to_string(op) == s) return op;
  }
  throw UsageError("unknown corruption operator '" + std::string(s) + "'");
}

std::vector<BlockRange> blockify(const ShotManifest& manifest, double block_s) {
  if (!(block_s > 0.0)) throw ValidationError("blockify: block_s must be positive");
  if (manifest.shots.empty()) throw ValidationError("blockify: empty manifest");
  std::vector<BlockRange> blocks;
  std::size_t start = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < manifest.shots.size(); ++i) {
    acc += manifest.shots[i].duration_s;
    if (acc >= block_s - 1e-9) {
      blocks.push_back({start, i + 1});
      start = i + 1;
      acc = 0.0;
    }
  }
  if (start < manifest.shots.size()) blocks.push_back({start, manifest.shots.size()});
  return blocks;
}

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

CorruptionResult identity_result(const ShotManifest& manifest) { return {manifest, {}, {}, {}, false}; }

std::size_t checked_count(std::size_t k, std::size_t blocks, std::string_view op) {
  if (k > blocks) {
    throw ValidationError(std::string(op) + ": " + std::to_string(k) + " blocks requested but the video has " +
                          std::to_string(blocks));
  }
  return k;
}

std::vector<std::size_t> pick_blocks(std::size_t blocks, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  auto chosen = rng.sample_without_replacement(blocks, k);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::string quote_json_number(double v) { return json(v).dump(); }

}  // namespace

CorruptionResult shuffle(const ShotManifest& manifest, double fraction, std::uint64_t seed, double block_s) {
  if (fraction == 0.0) return identity_result(manifest);
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("shuffle: fraction must be in (0, 1]");
  const auto blocks = blockify(manifest, block_s);
  const std::size_t total = blocks.size();
  const auto selected_count =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total) - 1e-9));
  if (selected_count < 2) {
    throw ValidationError("shuffle: nothing to permute (" + std::to_string(selected_count) + " of " +
                          std::to_string(total) + " blocks selected)");
  }

  Rng rng(seed);
  auto selected = rng.sample_without_replacement(total, selected_count);
  std::sort(selected.begin(), selected.end());

  std::vector<std::size_t> perm(selected_count);
  std::iota(perm.begin(), perm.end(), 0);
  auto is_identity = [&] {
    for (std::size_t j = 0; j < perm.size(); ++j) {
      if (perm[j] != j) return false;
    }
    return true;
  };
  rng.shuffle(perm);
  bool flagged = false;
  if (is_identity()) {
    rng.shuffle(perm);
    flagged = is_identity();
  }

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t j = 0; j < selected_count; ++j) order[selected[j]] = selected[perm[j]];

  CorruptionResult result;
  result.identity_permutation = flagged;
  result.manifest = manifest;
  result.manifest.shots.clear();
  for (std::size_t pos = 0; pos < total; ++pos) {
    const BlockRange& src = blocks[order[pos]];
    const bool moved = order[pos] != pos;
    if (moved) result.touched_blocks.push_back(pos);
    for (std::size_t i = src.begin; i < src.end; ++i) {
      Shot shot = manifest.shots[i];
      if (moved) shot.provenance = Provenance::shuffled;
      result.manifest.shots.push_back(std::move(shot));
    }
  }
  return result;
}

// ---------------------------------------------------------------- bank

ShotBank::ShotBank(std::vector<BankEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) return;
  dim_ = entries_.front().embedding.dim();
  std::vector<std::size_t> by_id(entries_.size());
  std::iota(by_id.begin(), by_id.end(), 0);
  std::sort(by_id.begin(), by_id.end(),
            [&](std::size_t a, std::size_t b) { return entries_[a].block_id < entries_[b].block_id; });
  tie_rank_.assign(entries_.size(), 0);
  for (std::size_t r = 0; r < by_id.size(); ++r) {
    tie_rank_[by_id[r]] = r;
    if (r > 0 && entries_[by_id[r]].block_id == entries_[by_id[r - 1]].block_id) {
      throw ValidationError("shot bank has duplicate block id '" + entries_[by_id[r]].block_id + "'");
    }
  }
  rows_.reserve(entries_.size() * dim_);
  for (const auto& e : entries_) {
    if (e.embedding.dim() != dim_) throw ValidationError("shot bank entries differ in dimension");
    rows_.insert(rows_.end(), e.embedding.values().begin(), e.embedding.values().end());
  }
}

Replacement ShotBank::retrieve(const Embedding& query, Exec exec) const {
  if (entries_.empty()) throw ValidationError("replace: empty bank");
  if (query.dim() != dim_) {
    throw ValidationError("replace: bank dim " + std::to_string(dim_) + " but block embedding dim " +
                          std::to_string(query.dim()));
  }
  const auto hit = kernels::argmax_cosine(query.values(), rows_, dim_, tie_rank_, exec);
  return {0, hit.index, hit.cosine};
}

json to_json(const ShotBank& bank) {
  json entries = json::object(), keyframes = json::object(), sources = json::object();
  std::string embedder_id;
  for (const auto& e : bank.entries()) {
    entries[e.block_id] = e.embedding.values();
    keyframes[e.block_id] = e.keyframes;
    sources[e.block_id] = e.source_video_id;
    embedder_id = e.embedding.embedder_id();
  }
  return {{"embedder_id", embedder_id},
          {"dim", bank.dim()},
          {"entries", std::move(entries)},
          {"keyframes", std::move(keyframes)},
          {"sources", std::move(sources)}};
}

ShotBank shot_bank_from_json(const json& j) {
  try {
    const auto id = j.at("embedder_id").get<std::string>();
    const auto dim = j.at("dim").get<std::size_t>();
    std::vector<BankEntry> entries;
    for (const auto& [block_id, vec] : j.at("entries").items()) {
      auto values = vec.get<std::vector<double>>();
      if (values.size() != dim) throw ValidationError("bank entry '" + block_id + "' has the wrong dim");
      BankEntry e{block_id, accept_vector(std::move(values), id), {}, {}};
      if (j.contains("keyframes") && j["keyframes"].contains(block_id)) {
        e.keyframes = j["keyframes"][block_id].get<std::vector<std::string>>();
      }
      if (j.contains("sources") && j["sources"].contains(block_id)) {
        e.source_video_id = j["sources"][block_id].get<std::string>();
      }
      entries.push_back(std::move(e));
    }
    return ShotBank(std::move(entries));
  } catch (const json::exception& e) {
    throw ParseError(std::string("shot bank: ") + e.what());
  }
}

ShotBank load_shot_bank(const std::filesystem::path& path) { return shot_bank_from_json(read_json_file(path)); }

void save_shot_bank(const ShotBank& bank, const std::filesystem::path& path) {
  write_text_file(path, to_json(bank).dump() + "\n");
}

Embedding block_embedding(const ShotManifest& manifest, const BlockRange& block,
                          const EmbeddingProvider& provider) {
  std::vector<Embedding> shots;
  for (std::size_t i = block.begin; i < block.end; ++i) shots.push_back(provider.embed_shot(manifest.shots[i]));
  return positional_pool(shots, provider.id());
}

CorruptionResult replace(const ShotManifest& manifest, const ShotBank& bank, std::size_t k, std::uint64_t seed,
                         const EmbeddingProvider& provider, double block_s, Exec exec) {
  if (k == 0) return identity_result(manifest);
  if (bank.size() == 0) throw ValidationError("replace: empty bank");
  if (bank.dim() != provider.dim()) {
    throw ValidationError("replace: bank dim " + std::to_string(bank.dim()) + " differs from embedder dim " +
                          std::to_string(provider.dim()));
  }
  const auto blocks = blockify(manifest, block_s);
  const auto chosen = pick_blocks(blocks.size(), checked_count(k, blocks.size(), "replace"), seed);

  CorruptionResult result = identity_result(manifest);
  for (std::size_t b : chosen) {
    const BlockRange& block = blocks[b];
    Replacement hit = bank.retrieve(block_embedding(manifest, block, provider), exec);
    hit.block = b;
    const BankEntry& entry = bank.entries()[hit.bank_index];
    const std::string ref = "bank:" + entry.block_id;
    result.new_embeddings.insert_or_assign(ref, entry.embedding);

    const std::size_t n = block.size();
    for (std::size_t j = 0; j < n; ++j) {
      Shot& shot = result.manifest.shots[block.begin + j];
      shot.embedding_ref = ref;
      shot.provenance = Provenance::replaced;
      if (entry.keyframes.size() >= n) {
        // Split the segment's keyframes evenly across the shots it replaces.
        const std::size_t lo = j * entry.keyframes.size() / n;
        const std::size_t hi = (j + 1) * entry.keyframes.size() / n;
        shot.keyframes.assign(entry.keyframes.begin() + static_cast<std::ptrdiff_t>(lo),
                              entry.keyframes.begin() + static_cast<std::ptrdiff_t>(hi));
      } else {
        shot.keyframes = entry.keyframes;
      }
    }
    result.touched_blocks.push_back(b);
    result.replacements.push_back(hit);
  }
  return result;
}

// ---------------------------------------------------------------- transformers

RotationTransformer::RotationTransformer(double angle) : angle_(angle) {}

TransformOutput RotationTransformer::transform(const TransformInput& in) const {
  const auto e = in.embedding.values();
  Rng rng(in.seed);
  std::vector<double> u(e.size());
  double dot = 0.0;
  for (;;) {
    for (double& x : u) x = rng.normal();
    dot = 0.0;
    for (std::size_t d = 0; d < e.size(); ++d) dot += u[d] * e[d];
    double norm2 = 0.0;
    for (std::size_t d = 0; d < e.size(); ++d) {
      const double v = u[d] - dot * e[d];
      norm2 += v * v;
    }
    if (norm2 > 1e-12) break;
  }
  std::vector<double> ortho(e.size());
  for (std::size_t d = 0; d < e.size(); ++d) ortho[d] = u[d] - dot * e[d];
  const Embedding dir = Embedding::normalized(std::move(ortho), in.embedding.embedder_id());
  std::vector<double> out(e.size());
  for (std::size_t d = 0; d < e.size(); ++d) {
    out[d] = std::cos(angle_) * e[d] + std::sin(angle_) * dir.values()[d];
  }
  return {Embedding::normalized(std::move(out), in.embedding.embedder_id()), in.shot.keyframes};
}

TextEmbeddingTransformer::TextEmbeddingTransformer(std::shared_ptr<const EmbeddingProvider> provider)
    : provider_(std::move(provider)) {}

TransformOutput TextEmbeddingTransformer::transform(const TransformInput& in) const {
  return {embed_text(in.caption, *provider_), in.shot.keyframes};
}

CommandTransformer::CommandTransformer(std::string command_template, std::filesystem::path work_dir,
                                       std::shared_ptr<const EmbeddingProvider> provider)
    : template_(std::move(command_template)), work_dir_(std::move(work_dir)), provider_(std::move(provider)) {}

TransformOutput CommandTransformer::transform(const TransformInput& in) const {
  if (in.shot.keyframes.empty()) {
    throw ServiceError("transformer: shot " + std::to_string(in.shot.index) + " has no first frame");
  }
  const auto out_dir = work_dir_ / hex64(in.seed);
  std::filesystem::create_directories(out_dir);
  run_command(fill_template(template_, {{"in_keyframe", shell_quote(in.shot.keyframes.front())},
                                        {"caption", shell_quote(in.caption)},
                                        {"out_dir", shell_quote(out_dir.string())}}));
  std::vector<std::string> frames;
  for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
    if (entry.is_regular_file()) frames.push_back(entry.path().string());
  }
  std::sort(frames.begin(), frames.end());
  if (frames.empty()) throw ServiceError("transformer produced no keyframes in " + out_dir.string());
  const auto embeddings = provider_->embed_images(frames);
  std::vector<double> acc(embeddings.front().dim(), 0.0);
  for (const auto& e : embeddings) {
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += e.values()[d];
  }
  return {Embedding::normalized(std::move(acc), provider_->id()), frames};
}

std::string RefCaptioner::caption(const Shot& shot, std::size_t, std::size_t) const {
  return "shot " + shot.embedding_ref;
}

JudgeCaptioner::JudgeCaptioner(std::shared_ptr<const Judge> judge) : judge_(std::move(judge)) {}

std::string JudgeCaptioner::caption(const Shot& shot, std::size_t position, std::size_t count) const {
  return judge_->caption_shot(shot, position, count);
}

PrefixRewriter::PrefixRewriter(std::string prefix) : prefix_(std::move(prefix)) {}

std::string PrefixRewriter::rewrite(std::string_view caption, std::uint64_t) const {
  return prefix_ + std::string(caption);
}

ChatRewriter::ChatRewriter(std::shared_ptr<ChatClient> client, std::string model, std::string prompt_template)
    : client_(std::move(client)), model_(std::move(model)), template_(std::move(prompt_template)) {}

std::string ChatRewriter::rewrite(std::string_view caption, std::uint64_t seed) const {
  ChatRequest req;
  req.model = model_;
  req.messages = json::array(
      {chat_message("user", json::array({text_part(fill_template(template_, {{"caption", std::string(caption)}}))}))});
  req.temperature = 0.7;
  req.seed = seed;
  std::string out = client_->complete(req);
  if (out.find_first_not_of(" \t\r\n") == std::string::npos) throw ServiceError("rewriter returned nothing");
  return out;
}

namespace {

// Shared body of edit and synthesize: every shot of k random blocks is
// passed through `make`, which returns the replacement. Nothing is returned
// unless every shot succeeds.
template <class Make>
CorruptionResult transform_blocks(const ShotManifest& manifest, std::size_t k, std::uint64_t seed,
                                  const EmbeddingProvider& provider, double block_s, std::string_view op,
                                  Provenance tag, Make&& make) {
  if (k == 0) return identity_result(manifest);
  const auto blocks = blockify(manifest, block_s);
  const auto chosen = pick_blocks(blocks.size(), checked_count(k, blocks.size(), op), seed);
  CorruptionResult result = identity_result(manifest);
  for (std::size_t b : chosen) {
    for (std::size_t i = blocks[b].begin; i < blocks[b].end; ++i) {
      const Shot& original = manifest.shots[i];
      const std::uint64_t shot_seed = derive_seed(seed, {b, i});
      const Embedding emb = provider.embed_shot(original);
      TransformOutput out = make(original, emb, i, shot_seed);
      if (out.embedding.dim() != provider.dim()) {
        throw ValidationError(std::string(op) + ": transformer changed the embedding dimension");
      }
      const std::string ref = original.embedding_ref + "~" + std::string(op) + "-" + hex64(shot_seed);
      Shot& shot = result.manifest.shots[i];
      shot.embedding_ref = ref;
      shot.provenance = tag;
      if (!out.keyframes.empty()) shot.keyframes = std::move(out.keyframes);
      result.new_embeddings.insert_or_assign(ref, std::move(out.embedding));
    }
    result.touched_blocks.push_back(b);
  }
  return result;
}

}  // namespace

CorruptionResult edit(const ShotManifest& manifest, std::size_t k, const ShotTransformer& transformer,
                      std::uint64_t seed, const EmbeddingProvider& provider, double block_s) {
  return transform_blocks(manifest, k, seed, provider, block_s, "edit", Provenance::edited,
                          [&](const Shot& shot, const Embedding& emb, std::size_t, std::uint64_t s) {
                            return transformer.transform({shot, emb, std::string(), s});
                          });
}

CorruptionResult synthesize(const ShotManifest& manifest, std::size_t k, const ShotCaptioner& captioner,
                            const TextRewriter& rewriter, const ShotTransformer& transformer,
                            std::uint64_t seed, const EmbeddingProvider& provider, double block_s) {
  const std::size_t count = manifest.shots.size();
  return transform_blocks(manifest, k, seed, provider, block_s, "synthesize", Provenance::synthesized,
                          [&](const Shot& shot, const Embedding& emb, std::size_t pos, std::uint64_t s) {
                            const std::string caption = captioner.caption(shot, pos, count);
                            return transformer.transform({shot, emb, rewriter.rewrite(caption, s), s});
                          });
}

CorruptionResult apply(const ShotManifest& manifest, const CorruptionSpec& spec, const CorruptionToolkit& tk) {
  if (spec.strength == 0.0) return identity_result(manifest);
  if (spec.op == CorruptionOp::shuffle) return shuffle(manifest, spec.strength, spec.seed, spec.block_s);

  if (!(spec.strength > 0.0) || spec.strength != std::floor(spec.strength)) {
    throw ValidationError(std::string(to_string(spec.op)) + ": strength must be a whole block count");
  }
  const auto k = static_cast<std::size_t>(spec.strength);
  auto need = [&](const auto& ptr, const char* what) -> decltype(*ptr) {
    if (!ptr) throw UsageError(std::string(to_string(spec.op)) + " needs " + what);
    return *ptr;
  };
  const EmbeddingProvider& provider = need(tk.provider, "an embedder");
  switch (spec.op) {
    case CorruptionOp::replace:
      return replace(manifest, need(tk.bank, "a shot bank"), k, spec.seed, provider, spec.block_s, tk.exec);
    case CorruptionOp::edit:
      return edit(manifest, k, need(tk.editor, "an edit transformer"), spec.seed, provider, spec.block_s);
    case CorruptionOp::synthesize:
      return synthesize(manifest, k, need(tk.captioner, "a captioner"), need(tk.rewriter, "a rewriter"),
                        need(tk.synthesizer, "a synthesis transformer"), spec.seed, provider, spec.block_s);
    case CorruptionOp::shuffle: break;
  }
  throw UsageError("unsupported operator");
}

// ---------------------------------------------------------------- sweeps

std::vector<double> SweepTable::means() const {
  std::vector<double> sum(strengths.size(), 0.0);
  std::vector<std::size_t> n(strengths.size(), 0);
  for (const auto& c : cells) {
    if (!c.score) continue;
    sum[c.strength_index] += *c.score;
    ++n[c.strength_index];
  }
  std::vector<double> out(strengths.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = n[i] ? sum[i] / static_cast<double>(n[i]) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::size_t SweepTable::failures() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return !c.score; }));
}

SweepTable sweep(const MetricFn& metric, std::span<const ShotManifest> manifests, const SweepOptions& options,
                 const CorruptionToolkit& toolkit) {
  if (options.strengths.empty()) throw ValidationError("sweep: no strengths given");
  if (options.trials == 0) throw ValidationError("sweep: trials must be >= 1");
  if (manifests.empty()) throw ValidationError("sweep: no manifests given");
  if (!toolkit.provider) throw UsageError("sweep: toolkit has no embedder");

  SweepTable table;
  table.op = options.op;
  table.strengths = options.strengths;
  table.trials = options.trials;
  const std::size_t nv = manifests.size();
  const std::size_t per_strength = options.trials * nv;
  table.cells.resize(options.strengths.size() * per_strength);

  CorruptionToolkit inner = toolkit;
  inner.exec = Exec::serial;  // parallelism lives at the cell level

  for_each_index(table.cells.size(), toolkit.exec, [&](std::size_t idx) {
    SweepCell& cell = table.cells[idx];
    cell.strength_index = idx / per_strength;
    cell.trial = (idx % per_strength) / nv;
    const std::size_t vi = idx % nv;
    cell.strength = options.strengths[cell.strength_index];
    cell.video_id = manifests[vi].video_id;
    try {
      CorruptionSpec spec{options.op, cell.strength, options.block_s,
                          derive_seed(options.seed, {cell.strength_index, cell.trial, vi})};
      CorruptionResult r = apply(manifests[vi], spec, inner);
      cell.identity_permutation = r.identity_permutation;
      if (r.new_embeddings.empty()) {
        cell.score = metric(r.manifest, *toolkit.provider);
      } else {
        OverlayProvider overlay(toolkit.provider, std::move(r.new_embeddings));
        cell.score = metric(r.manifest, overlay);
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });
  return table;
}

SensitivityResult classify_sensitivity(std::span<const double> strengths, std::span<const double> means) {
  if (strengths.size() != means.size()) throw ValidationError("classify_sensitivity: length mismatch");
  SensitivityResult r;
  for (std::size_t i = 0; i < strengths.size(); ++i) {
    if (std::isnan(means[i])) continue;
    r.strengths.push_back(strengths[i]);
    r.means.push_back(means[i]);
  }
  std::vector<double> distinct = r.strengths;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw ValidationError("classify_sensitivity: needs at least 2 distinct strengths");
  const auto fit = stats::ols_fit(r.strengths, r.means);
  r.slope = fit.slope;
  r.intercept = fit.intercept;
  r.r_squared = fit.r_squared;
  r.sensitive = fit.slope < 0.0 && fit.r_squared >= kSensitivityMinR2;
  return r;
}

SensitivityResult classify_sensitivity(const SweepTable& table) {
  const auto m = table.means();
  return classify_sensitivity(table.strengths, m);
}

std::string sweep_csv(const SweepTable& table) {
  std::ostringstream os;
  os << "operator,strength,trial,video_id,score\n";
  for (const auto& c : table.cells) {
    os << to_string(table.op) << ',' << quote_json_number(c.strength) << ',' << c.trial << ',' << c.video_id << ','
       << (c.score ? quote_json_number(*c.score) : std::string("NA")) << '\n';
  }
  return os.str();
}

json sweep_summary(std::string_view metric_name, const SweepTable& table, const SensitivityResult& result) {
  json errors = json::array();
  std::size_t identity = 0;
  for (const auto& c : table.cells) {
    if (!c.score) {
      errors.push_back({{"strength", c.strength}, {"trial", c.trial}, {"video_id", c.video_id}, {"error", c.error}});
    }
    if (c.identity_permutation) ++identity;
  }
  json means = json::array();
  for (double m : table.means()) means.push_back(std::isnan(m) ? json(nullptr) : json(m));
  return {{"metric", std::string(metric_name)},
          {"operator", to_string(table.op)},
          {"strengths", table.strengths},
          {"trials", table.trials},
          {"means", std::move(means)},
          {"slope", result.slope},
          {"intercept", result.intercept},
          {"r_squared", result.r_squared},
          {"r_squared_threshold", kSensitivityMinR2},
          {"sensitive", result.sensitive},
          {"failed_cells", std::move(errors)},
          {"identity_permutations", identity}};
}

}  // namespace longcode
