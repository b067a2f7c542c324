// longcode: command-line front end for scoring, corruption sweeps,
// orthogonality checks, correlation reports and dataset construction.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "longcode/chat.hpp"
#include "longcode/command.hpp"
#include "longcode/corruption.hpp"
#include "longcode/dsa.hpp"
#include "longcode/embedder.hpp"
#include "longcode/error.hpp"
#include "longcode/harness.hpp"
#include "longcode/judge.hpp"
#include "longcode/manifest.hpp"
#include "longcode/mock_corpus.hpp"
#include "longcode/orthogonality.hpp"
#include "longcode/parallel.hpp"
#include "longcode/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace longcode;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
    case ErrorKind::io: return 2;
    case ErrorKind::service: return 3;
    case ErrorKind::parse:
    case ErrorKind::validation:
    case ErrorKind::undefined: return 4;
  }
  return 1;
}

void log_line(const std::string& msg) { std::cerr << "longcode: " << msg << '\n'; }

void require_path(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text_file(path, text);
  }
}

std::vector<fs::path> json_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Paths may name a single file or a directory of *.json files.
std::vector<fs::path> expand(const std::string& path, const char* what) {
  require_path(path, what);
  if (fs::is_directory(path)) {
    auto files = json_files(path);
    if (files.empty()) throw UsageError(std::string(what) + " directory has no .json files: " + path);
    return files;
  }
  return {fs::path(path)};
}

// ---------------------------------------------------------------- shared option groups

struct EmbedderOptions {
  std::string kind = "mock";  // mock | store | remote
  std::string store;
  std::string endpoint;
  std::string embedder_id = "remote";
  std::size_t dim = MockProvider::kDefaultDim;
  std::string mode = "positional-pool";

  void add(CLI::App* app) {
    app->add_option("--embedder", kind, "Embedding backend")
        ->check(CLI::IsMember({"mock", "store", "remote"}));
    app->add_option("--store", store, "Embedding store (.json or .bin) for --embedder store");
    app->add_option("--embed-endpoint", endpoint, "Embedding service URL for --embedder remote");
    app->add_option("--embedder-id", embedder_id, "Identifier recorded for remote vectors");
    app->add_option("--dim", dim, "Embedding dimension (mock, or expected remote dimension)");
    app->add_option("--embed-mode", mode, "Global video embedding")
        ->check(CLI::IsMember({"positional-pool", "whole-video"}));
  }

  std::shared_ptr<const EmbeddingProvider> make(std::size_t jobs) const {
    if (kind == "mock") return std::make_shared<MockProvider>(dim);
    if (kind == "store") {
      require_path(store, "--store");
      return std::make_shared<StoreProvider>(std::make_shared<EmbeddingStore>(load_embedding_store(store)));
    }
    if (endpoint.empty()) throw UsageError("--embedder remote needs --embed-endpoint");
    RemoteEmbedderConfig cfg;
    cfg.endpoint = endpoint;
    cfg.embedder_id = embedder_id;
    cfg.dim = dim;
    cfg.max_in_flight = jobs;
    return std::make_shared<CachedTextProvider>(std::make_shared<RemoteProvider>(cfg));
  }

  VideoEmbedMode video_mode() const { return video_embed_mode_from_string(mode); }
};

struct JudgeOptions {
  std::string endpoint;
  std::string model = "judge";
  std::string cassettes;
  std::string cassette_mode = "replay";
  std::size_t rounds = 3;
  std::vector<double> temperatures{0.3, 0.4, 0.5};
  std::size_t refs_per_round = 3;
  std::size_t frames_per_shot = 4;
  std::string prompts;

  void add(CLI::App* app) {
    app->add_option("--judge-endpoint", endpoint, "Chat-completions URL of the judge");
    app->add_option("--judge-model", model, "Judge model name");
    app->add_option("--cassettes", cassettes, "Directory of recorded judge responses");
    app->add_option("--cassette-mode", cassette_mode, "replay: offline only; record: forward misses and save")
        ->check(CLI::IsMember({"replay", "record"}));
    app->add_option("--rounds", rounds, "Scoring rounds");
    app->add_option("--temperatures", temperatures, "One sampling temperature per round")->delimiter(',');
    app->add_option("--refs-per-round", refs_per_round, "Reference videos per round");
    app->add_option("--frames-per-shot", frames_per_shot, "Keyframes sent per shot");
    app->add_option("--prompts", prompts, "Directory overriding the built-in prompt templates");
  }

  JudgeConfig config(std::uint64_t seed, std::size_t jobs) const {
    JudgeConfig cfg;
    cfg.endpoint = endpoint;
    cfg.model_name = model;
    cfg.rounds = rounds;
    cfg.temperatures = temperatures;
    cfg.refs_per_round = refs_per_round;
    cfg.frames_per_shot = frames_per_shot;
    cfg.seed = seed;
    cfg.max_in_flight = jobs;
    return cfg;
  }

  PromptTemplates templates() const {
    if (prompts.empty()) return default_prompt_templates();
    require_path(prompts, "--prompts");
    return load_prompt_templates(prompts);
  }

  std::shared_ptr<ChatClient> client(std::size_t jobs) const {
    std::shared_ptr<ChatClient> upstream;
    if (!endpoint.empty()) {
      HttpChatConfig http;
      http.endpoint = endpoint;
      http.max_in_flight = jobs;
      upstream = std::make_shared<HttpChatClient>(http);
    }
    if (!cassettes.empty()) {
      const auto mode = cassette_mode == "record" ? CassetteMode::record : CassetteMode::replay;
      if (mode == CassetteMode::record && !upstream) throw UsageError("--cassette-mode record needs --judge-endpoint");
      if (mode == CassetteMode::replay) require_path(cassettes, "--cassettes");
      return std::make_shared<CassetteClient>(cassettes, mode, upstream);
    }
    if (!upstream) throw UsageError("the judge needs --cassettes or --judge-endpoint");
    return upstream;
  }
};

struct Globals {
  std::uint64_t seed = 0;
  std::size_t jobs = 4;
};

std::map<std::string, PromptSuite> load_suites(const std::string& path) {
  std::map<std::string, PromptSuite> out;
  for (const auto& f : expand(path, "--suite")) {
    PromptSuite s = load_prompt_suite(f);
    const std::string id = s.suite_id;
    if (!out.emplace(id, std::move(s)).second) throw ValidationError("duplicate suite id '" + id + "'");
  }
  return out;
}

std::vector<ShotManifest> load_manifests(const std::string& path) {
  std::vector<ShotManifest> out;
  for (const auto& f : expand(path, "--manifest")) out.push_back(load_manifest(f));
  return out;
}

const PromptSuite& suite_for(const std::map<std::string, PromptSuite>& suites, const ShotManifest& m) {
  auto it = suites.find(m.suite_id);
  if (it == suites.end()) throw ValidationError("no suite '" + m.suite_id + "' for video '" + m.video_id + "'");
  validate_link(it->second, m);
  return it->second;
}

// ---------------------------------------------------------------- score

struct ScoreOptions {
  std::string suite, manifest, bank, out, transcripts, scores_csv;
  bool skip_judge = false;
  double alpha = kDefaultAlpha;
  EmbedderOptions embedder;
  JudgeOptions judge;
};

int run_score(const ScoreOptions& o, const Globals& g) {
  if (o.manifest.empty()) throw UsageError("score needs --manifest");
  if (!fs::exists(o.manifest)) throw UsageError("manifest not found: " + o.manifest);
  if (o.suite.empty()) throw UsageError("score needs --suite");
  if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) throw UsageError("--alpha must lie in [0, 1]");

  const auto suites = load_suites(o.suite);
  const auto manifests = load_manifests(o.manifest);
  const auto provider = o.embedder.make(g.jobs);

  std::vector<ScoreRecord> records(manifests.size());
  PromptSimilarityCache cache;
  for_each_index(manifests.size(), Exec::parallel, [&](std::size_t i) {
    records[i] = score_dsa(suite_for(suites, manifests[i]), manifests[i], *provider, o.embedder.video_mode(), &cache);
  });

  std::vector<json> transcripts;
  if (!o.skip_judge) {
    require_path(o.bank, "--bank");
    const ReferenceBank bank = load_reference_bank(o.bank);
    const JudgeConfig cfg = o.judge.config(g.seed, g.jobs);
    cfg.validate(bank.size());
    Judge judge(o.judge.client(g.jobs), cfg, o.judge.templates());
    for (std::size_t i = 0; i < manifests.size(); ++i) {
      const JudgeTranscript t = judge.judge_score(manifests[i], suite_for(suites, manifests[i]), bank);
      if (t.partial) log_line(manifests[i].video_id + ": some judge rounds failed; averaging the rest");
      attach_judge(records[i], t.m_mllm, o.alpha);
      json tj = to_json(t);
      tj["video_id"] = manifests[i].video_id;
      transcripts.push_back(std::move(tj));
    }
  }

  json out;
  if (records.size() == 1 && fs::is_regular_file(o.manifest)) {
    out = to_json(records.front());
  } else {
    out = json::array();
    for (const auto& r : records) out.push_back(to_json(r));
  }
  write_output(o.out, out.dump(2) + "\n");
  if (!o.transcripts.empty() && !transcripts.empty()) write_text_file(o.transcripts, json(transcripts).dump(2) + "\n");
  if (!o.scores_csv.empty()) {
    std::vector<ScoreRow> rows;
    for (const auto& r : records) {
      rows.push_back({r.video_id, r.model_id, "m_dsa", r.m_dsa});
      if (r.m_mllm) rows.push_back({r.video_id, r.model_id, "m_mllm", *r.m_mllm});
      if (r.fused) rows.push_back({r.video_id, r.model_id, "fused", *r.fused});
    }
    write_text_file(o.scores_csv, scores_csv(rows));
  }
  return 0;
}

// ---------------------------------------------------------------- corruption toolkit

struct CorruptionOptions {
  std::string op = "shuffle";
  double block_s = kDefaultBlockSeconds;
  std::string bank;
  std::string transform = "rotation";  // rotation | command
  double angle = 0.6;
  std::string transform_cmd;
  std::string work_dir = "longcode-work";
  std::string captioner = "ref";       // ref | judge
  std::string rewriter = "prefix";     // prefix | chat
  std::string bank_refs;               // judge reference bank, only for judge captioning
  EmbedderOptions embedder;
  JudgeOptions judge;

  void add(CLI::App* app) {
    app->add_option("--op", op, "Corruption operator")
        ->check(CLI::IsMember({"shuffle", "replace", "edit", "synthesize"}));
    app->add_option("--block-s", block_s, "Block length in seconds");
    app->add_option("--bank", bank, "Shot bank for replace");
    app->add_option("--transform", transform, "Shot transformer for edit/synthesize")
        ->check(CLI::IsMember({"rotation", "command"}));
    app->add_option("--angle", angle, "Rotation angle in radians for --transform rotation");
    app->add_option("--transform-cmd", transform_cmd,
                    "External tool, e.g. \"edit-tool {in_keyframe} {caption} {out_dir}\"");
    app->add_option("--work-dir", work_dir, "Scratch directory for external tools");
    app->add_option("--captioner", captioner, "Captioner for synthesize")->check(CLI::IsMember({"ref", "judge"}));
    app->add_option("--rewriter", rewriter, "Caption rewriter for synthesize")
        ->check(CLI::IsMember({"prefix", "chat"}));
    embedder.add(app);
    judge.add(app);
  }

  // `provider` overrides the configured embedder (mock corpora bring their own).
  CorruptionToolkit toolkit(const Globals& g, Exec exec,
                            std::shared_ptr<const EmbeddingProvider> provider = nullptr) const {
    CorruptionToolkit tk;
    tk.provider = provider ? std::move(provider) : embedder.make(g.jobs);
    tk.exec = exec;
    const auto parsed = corruption_op_from_string(op);
    if (parsed == CorruptionOp::replace) {
      require_path(bank, "--bank");
      tk.bank = std::make_shared<ShotBank>(load_shot_bank(bank));
    }
    if (parsed == CorruptionOp::edit || parsed == CorruptionOp::synthesize) {
      std::shared_ptr<const ShotTransformer> t;
      if (transform == "command") {
        if (transform_cmd.empty()) throw UsageError("--transform command needs --transform-cmd");
        t = std::make_shared<CommandTransformer>(transform_cmd, work_dir, tk.provider);
      } else if (parsed == CorruptionOp::synthesize) {
        t = std::make_shared<TextEmbeddingTransformer>(tk.provider);
      } else {
        t = std::make_shared<RotationTransformer>(angle);
      }
      tk.editor = t;
      tk.synthesizer = t;
    }
    if (parsed == CorruptionOp::synthesize) {
      std::shared_ptr<ChatClient> chat;
      if (captioner == "judge" || rewriter == "chat") chat = judge.client(g.jobs);
      if (captioner == "judge") {
        tk.captioner = std::make_shared<JudgeCaptioner>(
            std::make_shared<Judge>(chat, judge.config(g.seed, g.jobs), judge.templates()));
      } else {
        tk.captioner = std::make_shared<RefCaptioner>();
      }
      if (rewriter == "chat") {
        tk.rewriter = std::make_shared<ChatRewriter>(chat, judge.model, judge.templates().rewrite);
      } else {
        tk.rewriter = std::make_shared<PrefixRewriter>();
      }
    }
    return tk;
  }
};

struct CorruptOptions {
  std::string manifest, out, embeddings_out;
  double strength = 0.0;
  std::optional<std::size_t> k;
  CorruptionOptions corruption;
};

int run_corrupt(const CorruptOptions& o, const Globals& g) {
  require_path(o.manifest, "--manifest");
  const ShotManifest manifest = load_manifest(o.manifest);
  const CorruptionToolkit tk = o.corruption.toolkit(g, Exec::parallel);
  CorruptionSpec spec;
  spec.op = corruption_op_from_string(o.corruption.op);
  spec.strength = o.k ? static_cast<double>(*o.k) : o.strength;
  spec.block_s = o.corruption.block_s;
  spec.seed = g.seed;
  CorruptionResult r = apply(manifest, spec, tk);
  if (r.identity_permutation) log_line("shuffle drew the identity permutation twice; output equals input order");

  r.manifest.metadata["corruption"] = {{"operator", to_string(spec.op)},
                                       {"strength", spec.strength},
                                       {"block_s", spec.block_s},
                                       {"seed", spec.seed},
                                       {"touched_blocks", r.touched_blocks},
                                       {"identity_permutation", r.identity_permutation}};
  write_output(o.out, to_json(r.manifest).dump(2) + "\n");
  if (!r.new_embeddings.empty()) {
    if (o.embeddings_out.empty()) {
      log_line("the operator introduced " + std::to_string(r.new_embeddings.size()) +
               " new shot embeddings; pass --embeddings-out to keep them");
    } else {
      EmbeddingStore store(tk.provider->id(), tk.provider->dim());
      for (auto& [ref, e] : r.new_embeddings) store.put(ref, e);
      save_embedding_store(store, o.embeddings_out);
    }
  }
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepCmdOptions {
  std::string suite, manifest, out, summary;
  std::size_t mock_videos = 0;
  std::size_t mock_shots = 12;
  std::string metric = "dsa";
  std::vector<double> strengths{0.2, 0.4, 0.8};
  std::size_t trials = 10;
  CorruptionOptions corruption;
};

int run_sweep(const SweepCmdOptions& o, const Globals& g) {
  std::map<std::string, PromptSuite> suites;
  std::vector<ShotManifest> manifests;
  CorruptionToolkit tk;
  if (o.mock_videos > 0) {
    MockCorpusOptions mo;
    mo.videos = o.mock_videos;
    mo.shots = o.mock_shots;
    mo.dim = o.corruption.embedder.dim;
    mo.seed = g.seed;
    MockCorpus c = make_mock_corpus(mo);
    for (auto& s : c.suites) suites.emplace(s.suite_id, std::move(s));
    manifests = std::move(c.manifests);
    tk = o.corruption.toolkit(g, Exec::parallel, c.provider);
  } else {
    if (o.suite.empty() || o.manifest.empty()) throw UsageError("sweep needs --suite and --manifest, or --mock-videos");
    suites = load_suites(o.suite);
    manifests = load_manifests(o.manifest);
    tk = o.corruption.toolkit(g, Exec::parallel);
  }

  MetricFn metric;
  PromptSimilarityCache cache;
  const VideoEmbedMode mode = o.corruption.embedder.video_mode();
  if (o.metric == "dsa") {
    for (const auto& m : manifests) suite_for(suites, m);
    metric = [&](const ShotManifest& m, const EmbeddingProvider& p) {
      return score_dsa(suites.at(m.suite_id), m, p, mode, &cache).m_dsa;
    };
  } else {
    const Aggregator phi = aggregator_from_string(o.metric.substr(o.metric.find('-') + 1));
    metric = [phi](const ShotManifest& m, const EmbeddingProvider&) { return mock_short_metric(m, phi); };
  }

  SweepOptions so;
  so.op = corruption_op_from_string(o.corruption.op);
  so.strengths = o.strengths;
  if (std::find(so.strengths.begin(), so.strengths.end(), 0.0) == so.strengths.end()) {
    so.strengths.insert(so.strengths.begin(), 0.0);  // uncorrupted baseline
  }
  so.trials = o.trials;
  so.seed = g.seed;
  so.block_s = o.corruption.block_s;

  const SweepTable table = sweep(metric, manifests, so, tk);
  if (table.failures() > 0) log_line(std::to_string(table.failures()) + " sweep cells failed; see the summary");
  const SensitivityResult sens = classify_sensitivity(table);
  write_output(o.out, sweep_csv(table));
  if (!o.summary.empty()) write_text_file(o.summary, sweep_summary(o.metric, table, sens).dump(2) + "\n");
  log_line(o.metric + " under " + o.corruption.op + ": slope " + json(sens.slope).dump() + ", r^2 " +
           json(sens.r_squared).dump() + (sens.sensitive ? ", sensitive" : ", insensitive"));
  return 0;
}

// ---------------------------------------------------------------- orthogonality

struct OrthoOptions {
  std::string regime = "independent";
  std::size_t k = 8;
  std::size_t n = 10000;
  int bins = 16;
  std::string phi = "mean";
  std::string statistic = "adjacency-decay";
  std::string out;
};

int run_orthogonality(const OrthoOptions& o, const Globals& g) {
  const SyntheticEnsemble e = sample_ensemble(o.k, o.n, regime_from_string(o.regime), g.seed, Exec::parallel);
  const auto stat = o.statistic == "pooled-alignment" ? StructuralStatistic::pooled_alignment
                                                      : StructuralStatistic::adjacency_decay;
  std::vector<Aggregator> phis;
  if (o.phi == "all") {
    phis.assign(std::begin(kAllAggregators), std::end(kAllAggregators));
  } else {
    phis.push_back(aggregator_from_string(o.phi));
  }
  json reports = json::array();
  for (Aggregator phi : phis) {
    const auto est = estimate_orthogonality(e, phi, o.bins, stat, Exec::parallel);
    json r = orthogonality_report(e, phi, o.bins, est);
    r["statistic"] = o.statistic;
    reports.push_back(std::move(r));
  }
  const json out = reports.size() == 1 ? reports.front() : reports;
  write_output(o.out, out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- correlate

struct CorrelateOptions {
  std::string scores, ratings, table_out, ablation_out, format = "csv";
  std::vector<std::string> metrics;
  std::string dsa_metric = "m_dsa", mllm_metric = "m_mllm", fused_metric = "fused";
};

int run_correlate(const CorrelateOptions& o, const Globals&) {
  require_path(o.scores, "--scores");
  require_path(o.ratings, "--ratings");
  const ReportFormat format = report_format_from_string(o.format);
  const auto rows = load_scores(o.scores);
  const RatingTable ratings = ingest_ratings(o.ratings);
  const HumanAggregate human = human_aggregate(ratings);

  std::map<std::string, VideoScores> by_metric;
  std::map<std::string, std::string> model_of;
  for (const auto& r : rows) {
    by_metric[r.metric][r.video_id] = r.value;
    auto [it, inserted] = model_of.emplace(r.video_id, r.model_id);
    if (!inserted && it->second != r.model_id) {
      throw ValidationError("video '" + r.video_id + "' is listed under two models");
    }
  }
  std::vector<std::string> metrics = o.metrics;
  if (metrics.empty()) {
    for (const auto& [name, s] : by_metric) metrics.push_back(name);
  }

  CorrelationTable table;
  for (const auto& [video, model] : model_of) {
    if (std::find(table.models.begin(), table.models.end(), model) == table.models.end()) table.models.push_back(model);
  }
  std::sort(table.models.begin(), table.models.end());
  for (const auto& name : metrics) {
    auto it = by_metric.find(name);
    if (it == by_metric.end()) throw ValidationError("no scores for metric '" + name + "'");
    table.reports.push_back(correlate(name, it->second, human.overall, model_of));
  }
  write_output(o.table_out, render(table, format));

  if (!o.ablation_out.empty()) {
    auto get = [&](const std::string& name) -> const VideoScores& {
      auto it = by_metric.find(name);
      if (it == by_metric.end()) throw ValidationError("ablation needs scores for metric '" + name + "'");
      return it->second;
    };
    emit_report(ablate(get(o.dsa_metric), get(o.mllm_metric), get(o.fused_metric), ratings), o.ablation_out, format);
  }
  return 0;
}

// ---------------------------------------------------------------- build / synth / keyframes

struct BuildOptions {
  std::string seed_frame, out;
  JudgeOptions judge;
};

int run_build(const BuildOptions& o, const Globals& g) {
  require_path(o.seed_frame, "--seed-frame");
  auto client = o.judge.client(g.jobs);
  const PromptSuite suite = build_suite(o.seed_frame, *client, o.judge.config(g.seed, g.jobs), o.judge.templates());
  write_output(o.out, to_json(suite).dump(2) + "\n");
  return 0;
}

struct SynthOptions {
  std::string out_dir;
  std::size_t videos = 20, shots = 12, dim = MockProvider::kDefaultDim, bank_size = 64;
  double noise = 0.5;
  std::vector<std::string> models{"mock-model"};
  bool binary_store = false;
};

int run_synth(const SynthOptions& o, const Globals& g) {
  if (o.out_dir.empty()) throw UsageError("synth needs --out-dir");
  MockCorpusOptions mo;
  mo.videos = o.videos;
  mo.shots = o.shots;
  mo.dim = o.dim;
  mo.noise = o.noise;
  mo.seed = g.seed;
  mo.model_ids = o.models;
  const MockCorpus c = make_mock_corpus(mo);
  const fs::path root(o.out_dir);
  fs::create_directories(root / "suites");
  fs::create_directories(root / "manifests");
  for (const auto& s : c.suites) save_prompt_suite(s, root / "suites" / (s.suite_id + ".json"));
  for (const auto& m : c.manifests) save_manifest(m, root / "manifests" / (m.video_id + ".json"));
  save_embedding_store(*c.store, root / (o.binary_store ? "store.bin" : "store.json"));
  if (o.bank_size > 0) {
    save_shot_bank(make_mock_bank(o.bank_size, o.dim, derive_seed(g.seed, {0xBA4C}), c.store->embedder_id()),
                   root / "bank.json");
  }
  log_line("wrote " + std::to_string(c.manifests.size()) + " mock videos to " + root.string());
  return 0;
}

struct KeyframeOptions {
  std::string video, out_dir, stem = "frame", ext = ".png";
  std::string templ = "ffmpeg -loglevel error -y -ss {t} -i {video} -frames:v 1 {out}.png";
  double start = 0.0, duration = kCanonicalShotSeconds;
  std::size_t count = 4;
};

int run_keyframes(const KeyframeOptions& o, const Globals&) {
  require_path(o.video, "--video");
  if (o.out_dir.empty()) throw UsageError("keyframes needs --out-dir");
  fs::create_directories(o.out_dir);
  const auto times = keyframe_times(o.start, o.duration, o.count);
  for (const auto& p : extract_keyframes(o.templ, o.video, times, o.out_dir, o.stem, o.ext)) std::cout << p << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-range coherence evaluation for multi-shot video"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Configuration file (key = value; [command] sections); flags win");
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Bound on parallel workers and in-flight requests")->check(CLI::PositiveNumber);

  ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "Score videos with DSA and, optionally, the judge");
  score_cmd->add_option("--suite", score.suite, "Prompt suite file or directory");
  score_cmd->add_option("--manifest", score.manifest, "Shot manifest file or directory");
  score_cmd->add_option("--bank", score.bank, "Judge reference bank");
  score_cmd->add_flag("--skip-judge", score.skip_judge, "DSA only");
  score_cmd->add_option("--alpha", score.alpha, "Fusion weight of DSA");
  score_cmd->add_option("--out", score.out, "Score JSON (default stdout)");
  score_cmd->add_option("--transcripts", score.transcripts, "Judge transcripts JSON");
  score_cmd->add_option("--scores-csv", score.scores_csv, "Score table (video_id,model_id,metric,value)");
  score.embedder.add(score_cmd);
  score.judge.add(score_cmd);

  CorruptOptions corrupt;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Apply one corruption operator to a manifest");
  corrupt_cmd->add_option("--manifest", corrupt.manifest, "Input manifest");
  corrupt_cmd->add_option("--strength", corrupt.strength, "Shuffle fraction or block count");
  corrupt_cmd->add_option("--k", corrupt.k, "Block count for replace/edit/synthesize");
  corrupt_cmd->add_option("--out", corrupt.out, "Output manifest (default stdout)");
  corrupt_cmd->add_option("--embeddings-out", corrupt.embeddings_out, "Store for newly introduced shot embeddings");
  corrupt.corruption.add(corrupt_cmd);

  SweepCmdOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Score a metric over corruption strengths");
  sweep_cmd->add_option("--suite", sweep_opts.suite, "Prompt suite file or directory");
  sweep_cmd->add_option("--manifest", sweep_opts.manifest, "Manifest file or directory");
  sweep_cmd->add_option("--mock-videos", sweep_opts.mock_videos, "Use N generated mock videos instead of files");
  sweep_cmd->add_option("--mock-shots", sweep_opts.mock_shots, "Shots per mock video");
  sweep_cmd->add_option("--metric", sweep_opts.metric, "dsa or short-<mean|median|min|max>")
      ->check(CLI::IsMember({"dsa", "short-mean", "short-median", "short-min", "short-max"}));
  sweep_cmd->add_option("--strengths", sweep_opts.strengths, "Comma-separated strengths (0 is always added)")
      ->delimiter(',');
  sweep_cmd->add_option("--trials", sweep_opts.trials, "Trials per strength");
  sweep_cmd->add_option("--out", sweep_opts.out, "Sweep CSV (default stdout)");
  sweep_cmd->add_option("--summary", sweep_opts.summary, "Regression summary JSON");
  sweep_opts.corruption.add(sweep_cmd);

  OrthoOptions ortho;
  auto* ortho_cmd = app.add_subcommand("orthogonality", "Mutual information between short and long metrics");
  ortho_cmd->add_option("--regime", ortho.regime)->check(CLI::IsMember({"independent", "coupled"}));
  ortho_cmd->add_option("--k", ortho.k, "Shots per sample");
  ortho_cmd->add_option("--n", ortho.n, "Samples");
  ortho_cmd->add_option("--bins", ortho.bins, "Histogram bins per axis");
  ortho_cmd->add_option("--phi", ortho.phi, "Aggregator")
      ->check(CLI::IsMember({"mean", "median", "min", "max", "all"}));
  ortho_cmd->add_option("--statistic", ortho.statistic, "Structural statistic")
      ->check(CLI::IsMember({"adjacency-decay", "pooled-alignment"}));
  ortho_cmd->add_option("--out", ortho.out, "Report JSON (default stdout)");

  CorrelateOptions corr;
  auto* corr_cmd = app.add_subcommand("correlate", "Correlate metric scores with human ratings");
  corr_cmd->add_option("--scores", corr.scores, "Score table CSV");
  corr_cmd->add_option("--ratings", corr.ratings, "Ratings CSV");
  corr_cmd->add_option("--metrics", corr.metrics, "Metrics to report (default: all)")->delimiter(',');
  corr_cmd->add_option("--out", corr.table_out, "Correlation report (default stdout)");
  corr_cmd->add_option("--ablation-out", corr.ablation_out, "Per-dimension ablation report");
  corr_cmd->add_option("--format", corr.format, "csv or json");
  corr_cmd->add_option("--dsa-metric", corr.dsa_metric);
  corr_cmd->add_option("--mllm-metric", corr.mllm_metric);
  corr_cmd->add_option("--fused-metric", corr.fused_metric);

  BuildOptions build;
  auto* build_cmd = app.add_subcommand("build", "Build a prompt suite from a seed frame");
  build_cmd->add_option("--seed-frame", build.seed_frame, "Image the story is seeded from");
  build_cmd->add_option("--out", build.out, "Suite JSON (default stdout)");
  build.judge.add(build_cmd);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a mock corpus (suites, manifests, store, bank)");
  synth_cmd->add_option("--out-dir", synth.out_dir);
  synth_cmd->add_option("--videos", synth.videos);
  synth_cmd->add_option("--shots", synth.shots);
  synth_cmd->add_option("--dim", synth.dim);
  synth_cmd->add_option("--noise", synth.noise);
  synth_cmd->add_option("--bank-size", synth.bank_size);
  synth_cmd->add_option("--models", synth.models, "Model ids assigned round-robin")->delimiter(',');
  synth_cmd->add_flag("--binary-store", synth.binary_store);

  KeyframeOptions kf;
  auto* kf_cmd = app.add_subcommand("keyframes", "Extract shot keyframes with an external tool");
  kf_cmd->add_option("--video", kf.video);
  kf_cmd->add_option("--out-dir", kf.out_dir);
  kf_cmd->add_option("--stem", kf.stem);
  kf_cmd->add_option("--ext", kf.ext);
  kf_cmd->add_option("--template", kf.templ, "Command with {video}, {t} and {out}");
  kf_cmd->add_option("--start", kf.start);
  kf_cmd->add_option("--duration", kf.duration);
  kf_cmd->add_option("--count", kf.count);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_max_threads(static_cast<int>(g.jobs));
    if (*score_cmd) return run_score(score, g);
    if (*corrupt_cmd) return run_corrupt(corrupt, g);
    if (*sweep_cmd) return run_sweep(sweep_opts, g);
    if (*ortho_cmd) return run_orthogonality(ortho, g);
    if (*corr_cmd) return run_correlate(corr, g);
    if (*build_cmd) return run_build(build, g);
    if (*synth_cmd) return run_synth(synth, g);
    if (*kf_cmd) return run_keyframes(kf, g);
  } catch (const Error& e) {
    log_line(std::string("error: ") + e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
