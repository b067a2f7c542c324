#include "longcode/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <regex>
#include <sstream>
#include <thread>

#include "longcode/command.hpp"
#include "longcode/error.hpp"
#include "longcode/random.hpp"

namespace longcode {

namespace detail {
const std::map<std::string, std::string>& embedded_prompt_files();
}

using nlohmann::json;

namespace {

// Stage tags mixed into request seeds.
enum : std::uint64_t { kCaptionStage = 1, kThinkStage = 2, kScoreStage = 3, kReferenceDraw = 4 };

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string numbered(const std::vector<std::string>& lines) {
  std::ostringstream os;
  for (std::size_t i = 0; i < lines.size(); ++i) os << (i + 1) << ". " << lines[i] << "\n";
  return os.str();
}

std::string format_score(double s) {
  std::ostringstream os;
  os << s;
  return os.str();
}

}  // namespace

void JudgeConfig::validate(std::optional<std::size_t> bank_size) const {
  if (rounds == 0) throw ValidationError("judge: rounds must be positive");
  if (temperatures.size() != rounds) {
    throw ValidationError("judge: " + std::to_string(temperatures.size()) + " temperatures for " +
                          std::to_string(rounds) + " rounds");
  }
  if (refs_per_round == 0) throw ValidationError("judge: refs_per_round must be positive");
  if (frames_per_shot == 0) throw ValidationError("judge: frames_per_shot must be positive");
  if (bank_size && refs_per_round > *bank_size) {
    throw ValidationError("judge: refs_per_round " + std::to_string(refs_per_round) +
                          " exceeds bank size " + std::to_string(*bank_size));
  }
}

void validate(const ReferenceBank& bank) {
  if (bank.entries.empty()) throw ValidationError("reference bank is empty");
  std::vector<std::string> ids;
  for (const auto& e : bank.entries) {
    const double doubled = e.human_score * 2.0;
    if (e.human_score < 1.0 || e.human_score > 5.0 || doubled != std::floor(doubled)) {
      throw ValidationError("reference '" + e.video_id + "': human_score must be in 1..5 (halves allowed)");
    }
    ids.push_back(e.video_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("reference bank has duplicate video ids");
  }
}

json to_json(const ReferenceBank& bank) {
  json out = json::array();
  for (const auto& e : bank.entries) {
    out.push_back({{"video_id", e.video_id},
                   {"keyframes", e.keyframes},
                   {"human_score", e.human_score},
                   {"rationale", e.rationale}});
  }
  return out;
}

ReferenceBank load_reference_bank(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  ReferenceBank bank;
  try {
    for (const auto& e : j) {
      bank.entries.push_back({e.at("video_id").get<std::string>(),
                              e.value("keyframes", std::vector<std::string>{}),
                              e.at("human_score").get<double>(), e.value("rationale", std::string())});
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  validate(bank);
  return bank;
}

json to_json(const JudgeTranscript& t) {
  json rounds = json::array();
  for (const auto& r : t.rounds) {
    json jr = {{"round", r.round},
               {"temperature", r.temperature},
               {"reference_ids", r.reference_ids},
               {"raw_response", r.raw_response},
               {"reprompted", r.reprompted}};
    jr["parsed_score"] = r.parsed_score ? json(*r.parsed_score) : json(nullptr);
    if (!r.error.empty()) jr["error"] = r.error;
    rounds.push_back(std::move(jr));
  }
  return {{"captions", t.captions},
          {"summary", t.summary},
          {"rounds", std::move(rounds)},
          {"m_mllm", t.m_mllm},
          {"partial", t.partial},
          {"prompt_version", t.prompt_version},
          {"score_normalization", "(s-1)/4"}};
}

PromptTemplates default_prompt_templates() {
  const auto& files = detail::embedded_prompt_files();
  auto get = [&](const std::string& name) {
    auto it = files.find(name);
    return it == files.end() ? std::string() : trim(it->second);
  };
  PromptTemplates t;
  t.version = get("VERSION");
  t.caption = get("caption.txt");
  t.think = get("think.txt");
  t.score = get("score.txt");
  t.reprompt = get("reprompt.txt");
  t.rewrite = get("rewrite.txt");
  t.outline = get("outline.txt");
  t.decompose = get("decompose.txt");
  t.decompose_retry = get("decompose_retry.txt");
  return t;
}

PromptTemplates load_prompt_templates(const std::filesystem::path& dir) {
  PromptTemplates t = default_prompt_templates();
  auto override_from = [&](const char* name, std::string& field) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) field = trim(read_text_file(p));
  };
  override_from("VERSION", t.version);
  override_from("caption.txt", t.caption);
  override_from("think.txt", t.think);
  override_from("score.txt", t.score);
  override_from("reprompt.txt", t.reprompt);
  override_from("rewrite.txt", t.rewrite);
  override_from("outline.txt", t.outline);
  override_from("decompose.txt", t.decompose);
  override_from("decompose_retry.txt", t.decompose_retry);
  return t;
}

double parse_score(std::string_view text) {
  auto in_range = [](double v) { return std::isfinite(v) && v >= 1.0 && v <= 5.0; };

  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    const json j = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (j.is_object() && j.contains("score")) {
      const json& s = j["score"];
      double v = std::nan("");
      if (s.is_number()) {
        v = s.get<double>();
      } else if (s.is_string()) {
        try {
          v = std::stod(s.get<std::string>());
        } catch (const std::exception&) {
        }
      }
      if (in_range(v)) return v;
    }
  }

  static const std::regex pattern(R"(score[^0-9\n]{0,20}?([0-9]+(?:\.[0-9]+)?))", std::regex::icase);
  std::optional<double> last;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
    const double v = std::stod((*it)[1].str());
    if (in_range(v)) last = v;
  }
  if (last) return *last;
  throw ParseError("no score in 1..5 found in judge reply");
}

double normalize_judge_score(double score) {
  if (!(score >= 1.0 && score <= 5.0)) throw ValidationError("judge score outside [1, 5]");
  return (score - 1.0) / 4.0;
}

std::vector<std::size_t> sample_references(std::uint64_t seed, std::size_t round,
                                           const ReferenceBank& bank, std::size_t count) {
  std::vector<std::size_t> by_id(bank.size());
  for (std::size_t i = 0; i < by_id.size(); ++i) by_id[i] = i;
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) {
    return bank.entries[a].video_id < bank.entries[b].video_id;
  });
  std::string ids;
  for (std::size_t i : by_id) ids += bank.entries[i].video_id + '\n';

  Rng rng(derive_seed(seed, {kReferenceDraw, round, hash_string(ids)}));
  std::vector<std::size_t> out;
  for (std::size_t pick : rng.sample_without_replacement(by_id.size(), count)) out.push_back(by_id[pick]);
  return out;
}

std::vector<std::string> sample_frames(std::span<const std::string> keyframes, std::size_t count) {
  if (keyframes.size() <= count) return {keyframes.begin(), keyframes.end()};
  if (count == 1) return {keyframes.front()};
  std::vector<std::string> out;
  const std::size_t last = keyframes.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(keyframes[(i * last + (count - 1) / 2) / (count - 1)]);
  }
  return out;
}

Judge::Judge(std::shared_ptr<ChatClient> client, JudgeConfig cfg, PromptTemplates templates)
    : client_(std::move(client)), cfg_(std::move(cfg)), templates_(std::move(templates)) {
  if (!client_) throw UsageError("judge needs a chat client");
  cfg_.validate();
}

std::string Judge::ask(json messages, double temperature, std::uint64_t seed) const {
  ChatRequest req{cfg_.model_name, std::move(messages), temperature, seed};
  return client_->complete(req);
}

std::string Judge::caption_shot(const Shot& shot, std::size_t position, std::size_t shot_count) const {
  if (shot.keyframes.empty()) {
    throw ValidationError("shot " + std::to_string(shot.index) + " has no keyframes to caption");
  }
  const auto frames = sample_frames(shot.keyframes, cfg_.frames_per_shot);
  json content = json::array();
  content.push_back(text_part(fill_template(templates_.caption,
                                            {{"frame_count", std::to_string(frames.size())},
                                             {"shot_number", std::to_string(position + 1)},
                                             {"shot_count", std::to_string(shot_count)}})));
  for (const auto& f : frames) content.push_back(image_part(f));
  std::string caption = trim(ask(json::array({chat_message("user", std::move(content))}), 0.0,
                                 derive_seed(cfg_.seed, {kCaptionStage, position})));
  if (caption.empty()) throw ServiceError("empty caption for shot " + std::to_string(shot.index));
  return caption;
}

std::vector<std::string> Judge::caption_shots(const ShotManifest& manifest) const {
  for (const auto& s : manifest.shots) {
    if (s.keyframes.empty()) {
      throw ValidationError("shot " + std::to_string(s.index) + " has no keyframes to caption");
    }
  }
  const std::size_t n = manifest.shots.size();
  std::vector<std::string> captions(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        captions[i] = caption_shot(manifest.shots[i], i, n);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::clamp<std::size_t>(cfg_.max_in_flight, 1, n);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return captions;
}

namespace {

std::vector<std::string> descriptions(const PromptSuite& suite) {
  std::vector<std::string> out;
  for (const auto& s : suite.shots) out.push_back(s.description);
  return out;
}

}  // namespace

std::string Judge::think(const PromptSuite& suite, std::span<const std::string> captions) const {
  if (captions.size() != suite.shots.size()) {
    throw ValidationError("think: " + std::to_string(captions.size()) + " captions for " +
                          std::to_string(suite.shots.size()) + " shots");
  }
  const std::string prompt = fill_template(
      templates_.think, {{"storyline", suite.storyline},
                         {"prompts", numbered(descriptions(suite))},
                         {"captions", numbered({captions.begin(), captions.end()})}});
  std::string summary = trim(ask(json::array({chat_message("user", json::array({text_part(prompt)}))}),
                                 0.0, derive_seed(cfg_.seed, {kThinkStage})));
  if (summary.empty()) throw ServiceError("judge returned an empty analysis");
  return summary;
}

double Judge::score_round(const ShotManifest& manifest, const PromptSuite& suite, std::string_view summary,
                          std::span<const ReferenceEntry> refs, double temperature, std::size_t round,
                          RoundRecord* record) const {
  std::vector<std::string> ref_labels;
  for (const auto& r : refs) ref_labels.push_back(r.video_id + " (human score " + format_score(r.human_score) + ")");
  std::string ref_list;
  for (std::size_t i = 0; i < ref_labels.size(); ++i) ref_list += (i ? ", " : "") + ref_labels[i];

  json content = json::array();
  content.push_back(text_part(fill_template(templates_.score, {{"storyline", suite.storyline},
                                                               {"prompts", numbered(descriptions(suite))},
                                                               {"summary", std::string(summary)},
                                                               {"references", ref_list}})));
  for (const auto& r : refs) {
    content.push_back(text_part("Reference video " + r.video_id + ", human score " +
                                format_score(r.human_score) + ". " + r.rationale));
    for (const auto& f : sample_frames(r.keyframes, cfg_.frames_per_shot)) content.push_back(image_part(f));
  }
  content.push_back(text_part("Target video frames, one per shot in temporal order:"));
  for (const auto& s : manifest.shots) {
    if (!s.keyframes.empty()) content.push_back(image_part(s.keyframes.front()));
  }

  json messages = json::array({chat_message("user", std::move(content))});
  const std::uint64_t seed = derive_seed(cfg_.seed, {kScoreStage, round});
  std::string reply = ask(messages, temperature, seed);
  if (record) record->raw_response = reply;
  try {
    return parse_score(reply);
  } catch (const ParseError&) {
  }
  messages.push_back(chat_message("assistant", reply));
  messages.push_back(chat_message("user", json::array({text_part(templates_.reprompt)})));
  reply = ask(std::move(messages), temperature, seed);
  if (record) {
    record->reprompted = true;
    record->raw_response = reply;
  }
  return parse_score(reply);
}

JudgeTranscript Judge::judge_score(const ShotManifest& manifest, const PromptSuite& suite,
                                   const ReferenceBank& bank) const {
  validate(bank);
  cfg_.validate(bank.size());
  validate_link(suite, manifest);

  JudgeTranscript t;
  t.prompt_version = templates_.version;
  t.captions = caption_shots(manifest);
  t.summary = think(suite, t.captions);

  std::vector<double> scores;
  for (std::size_t r = 0; r < cfg_.rounds; ++r) {
    RoundRecord rec;
    rec.round = r;
    rec.temperature = cfg_.temperatures[r];
    std::vector<ReferenceEntry> refs;
    for (std::size_t i : sample_references(cfg_.seed, r, bank, cfg_.refs_per_round)) {
      refs.push_back(bank.entries[i]);
      rec.reference_ids.push_back(bank.entries[i].video_id);
    }
    try {
      rec.parsed_score = score_round(manifest, suite, t.summary, refs, rec.temperature, r, &rec);
      scores.push_back(*rec.parsed_score);
    } catch (const ParseError& e) {
      rec.error = e.what();
      t.partial = true;
    }
    t.rounds.push_back(std::move(rec));
  }
  if (scores.empty()) throw ServiceError("judge: all " + std::to_string(cfg_.rounds) + " rounds failed to parse");

  // Sorted summation keeps the mean independent of round order.
  std::sort(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += s;
  t.m_mllm = normalize_judge_score(sum / static_cast<double>(scores.size()));
  return t;
}

}  // namespace longcode
