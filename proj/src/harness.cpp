#include "longcode/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include "longcode/command.hpp"
#include "longcode/error.hpp"
#include "longcode/random.hpp"
#include "longcode/stats.hpp"

namespace longcode {

using nlohmann::json;

// ---------------------------------------------------------------- dataset construction

namespace {

std::string_view trim_view(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

json extract_json(std::string_view text) {
  std::string_view t = trim_view(text);
  if (auto parsed = json::parse(t, nullptr, false); !parsed.is_discarded()) return parsed;
  const auto open = t.find_first_of("{[");
  const auto close = t.find_last_of("}]");
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    if (auto parsed = json::parse(t.substr(open, close - open + 1), nullptr, false); !parsed.is_discarded()) {
      return parsed;
    }
  }
  throw ParseError("decomposition reply is not JSON");
}

constexpr std::uint64_t kOutlineStage = 10;
constexpr std::uint64_t kDecomposeStage = 11;

}  // namespace

std::vector<ShotPrompt> parse_decomposition(std::string_view text) {
  json j = extract_json(text);
  if (j.is_object()) {
    if (!j.contains("shots")) throw ParseError("decomposition reply has no \"shots\" field");
    j = j["shots"];
  }
  if (!j.is_array()) throw ParseError("decomposition shots must be an array");
  std::vector<ShotPrompt> shots;
  for (const auto& item : j) {
    ShotPrompt p;
    p.index = shots.size();
    if (item.is_string()) {
      p.description = item.get<std::string>();
    } else if (item.is_object() && item.contains("description") && item["description"].is_string()) {
      p.description = item["description"].get<std::string>();
      if (item.contains("cut_type") && item["cut_type"].is_string()) p.cut_type = item["cut_type"].get<std::string>();
    } else {
      throw ParseError("decomposition shot " + std::to_string(p.index) + " has no description");
    }
    p.description = std::string(trim_view(p.description));
    if (p.description.empty()) throw ParseError("decomposition shot " + std::to_string(p.index) + " is empty");
    p.duration_s = kCanonicalShotSeconds;  // durations are normalized, whatever the reply says
    shots.push_back(std::move(p));
  }
  return shots;
}

PromptSuite build_suite(const std::filesystem::path& seed_frame, ChatClient& client, const JudgeConfig& cfg,
                        const PromptTemplates& templates) {
  if (!std::filesystem::exists(seed_frame)) throw IoError("seed frame not found: " + seed_frame.string());

  ChatRequest outline_req;
  outline_req.model = cfg.model_name;
  outline_req.messages = json::array(
      {chat_message("user", json::array({text_part(templates.outline), image_part(seed_frame.string())}))});
  outline_req.seed = derive_seed(cfg.seed, {kOutlineStage});
  const std::string storyline(trim_view(client.complete(outline_req)));
  if (storyline.empty()) throw ServiceError("outline reply was empty");

  const std::map<std::string, std::string> bounds{{"min_shots", std::to_string(kDatasetMinShots)},
                                                  {"max_shots", std::to_string(kDatasetMaxShots)},
                                                  {"storyline", storyline}};
  ChatRequest req;
  req.model = cfg.model_name;
  req.messages = json::array({chat_message("user", json::array({text_part(fill_template(templates.decompose, bounds))}))});
  req.seed = derive_seed(cfg.seed, {kDecomposeStage});

  auto in_bounds = [](std::size_t k) { return k >= kDatasetMinShots && k <= kDatasetMaxShots; };
  std::string reply = client.complete(req);
  std::vector<ShotPrompt> shots;
  std::string problem;
  try {
    shots = parse_decomposition(reply);
    if (in_bounds(shots.size())) problem.clear();
    else problem = std::to_string(shots.size());
  } catch (const ParseError& e) {
    problem = "an unreadable number of";
  }

  if (!problem.empty()) {
    auto values = bounds;
    values["shot_count"] = problem;
    req.messages.push_back(chat_message("assistant", json::array({text_part(reply)})));
    req.messages.push_back(
        chat_message("user", json::array({text_part(fill_template(templates.decompose_retry, values))})));
    shots = parse_decomposition(client.complete(req));
    if (!in_bounds(shots.size())) {
      throw ValidationError("decomposition rejected: " + std::to_string(shots.size()) + " shots after reprompt (" +
                            std::to_string(kDatasetMinShots) + "-" + std::to_string(kDatasetMaxShots) + " allowed)");
    }
  }

  PromptSuite suite;
  suite.suite_id = seed_frame.stem().string();
  suite.storyline = storyline;
  suite.shots = std::move(shots);
  suite.target_total_s = suite.total_duration();
  validate(suite);
  validate_dataset_bounds(suite);
  return suite;
}

// ---------------------------------------------------------------- ratings

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::narrative: return "narrative";
    case Dimension::causality: return "causality";
    case Dimension::consistency: return "consistency";
  }
  return "narrative";
}

Dimension dimension_from_string(std::string_view s) {
  for (Dimension d : kAllDimensions) {
    if (to_string(d) == s) return d;
  }
  throw ValidationError("unknown dimension '" + std::string(s) + "'");
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.emplace_back(trim_view(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Non-empty, non-comment lines with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> csv_lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t lineno = 0, pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++lineno;
    line = trim_view(line);
    if (!line.empty() && line.front() != '#') out.emplace_back(lineno, line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

void expect_header(const std::vector<std::pair<std::size_t, std::string_view>>& lines,
                   const std::vector<std::string>& header, std::string_view what) {
  if (lines.empty() || split_csv_line(lines.front().second) != header) {
    std::string h;
    for (const auto& c : header) h += (h.empty() ? "" : ",") + c;
    throw ParseError(std::string(what) + ": expected header " + h);
  }
}

}  // namespace

RatingTable parse_ratings_csv(std::string_view text) {
  const auto lines = csv_lines(text);
  expect_header(lines, {"video_id", "annotator_id", "dimension", "score"}, "ratings");
  RatingTable table;
  std::set<std::tuple<std::string, std::string, Dimension>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [lineno, line] = lines[i];
    const std::string where = "ratings row " + std::to_string(lineno);
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ParseError(where + ": expected 4 fields, got " + std::to_string(f.size()));
    if (f[0].empty() || f[1].empty()) throw ValidationError(where + ": empty video or annotator id");
    HumanRating r;
    r.video_id = f[0];
    r.annotator_id = f[1];
    try {
      r.dimension = dimension_from_string(f[2]);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    const auto* end = f[3].data() + f[3].size();
    const auto res = std::from_chars(f[3].data(), end, r.score);
    if (res.ec != std::errc() || res.ptr != end) throw ValidationError(where + ": score '" + f[3] + "' is not an integer");
    if (r.score < 1 || r.score > 5) {
      throw ValidationError(where + ": score " + std::to_string(r.score) + " outside 1..5");
    }
    if (!seen.emplace(r.video_id, r.annotator_id, r.dimension).second) {
      throw ValidationError(where + ": duplicate rating (" + r.video_id + ", " + r.annotator_id + ", " +
                            std::string(to_string(r.dimension)) + ")");
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

RatingTable ingest_ratings(const std::filesystem::path& path) { return parse_ratings_csv(read_text_file(path)); }

HumanAggregate human_aggregate(const RatingTable& table) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> overall;
  std::map<Dimension, std::map<std::string, Acc>> per_dim;
  for (const auto& r : table.rows) {
    overall[r.video_id].sum += r.score;
    ++overall[r.video_id].n;
    auto& a = per_dim[r.dimension][r.video_id];
    a.sum += r.score;
    ++a.n;
  }
  HumanAggregate out;
  for (const auto& [video, acc] : overall) {
    out.overall[video] = acc.sum / static_cast<double>(acc.n);
    for (Dimension d : kAllDimensions) {
      auto it = per_dim[d].find(video);
      if (it == per_dim[d].end()) {
        throw ValidationError("video '" + video + "' has no " + std::string(to_string(d)) + " ratings");
      }
      out.per_dimension[d][video] = it->second.sum / static_cast<double>(it->second.n);
    }
  }
  return out;
}

// ---------------------------------------------------------------- correlation

namespace {

// Sorting the pairs first makes the result independent of video ids and of
// input row order, down to the last bit.
std::optional<double> correlation(std::vector<std::pair<double, double>> pairs, bool rank) {
  std::sort(pairs.begin(), pairs.end());
  std::vector<double> x, y;
  for (const auto& [a, b] : pairs) {
    x.push_back(a);
    y.push_back(b);
  }
  try {
    return rank ? stats::spearman(x, y) : stats::pearson(x, y);
  } catch (const UndefinedError&) {
    return std::nullopt;
  }
}

void check_aligned(const VideoScores& a, const VideoScores& b, std::string_view a_name, std::string_view b_name) {
  for (const auto& [id, v] : a) {
    if (!b.count(id)) throw ValidationError("video '" + id + "' has " + std::string(a_name) + " but no " + std::string(b_name) + " score");
  }
  for (const auto& [id, v] : b) {
    if (!a.count(id)) throw ValidationError("video '" + id + "' has " + std::string(b_name) + " but no " + std::string(a_name) + " score");
  }
}

}  // namespace

CorrelationReport correlate(std::string_view metric, const VideoScores& metric_scores, const VideoScores& human_scores,
                            const std::map<std::string, std::string>& model_of) {
  check_aligned(metric_scores, human_scores, "a metric", "a human");
  std::map<std::string, std::vector<std::pair<double, double>>> groups;
  std::vector<std::pair<double, double>> pooled;
  for (const auto& [id, m] : metric_scores) {
    auto it = model_of.find(id);
    if (it == model_of.end()) throw ValidationError("video '" + id + "' has no model assignment");
    const std::pair<double, double> p{m, human_scores.at(id)};
    groups[it->second].push_back(p);
    pooled.push_back(p);
  }
  CorrelationReport r;
  r.metric = std::string(metric);
  r.n = pooled.size();
  for (auto& [model, pairs] : groups) {
    if (pairs.size() < 3) {
      throw ValidationError("model '" + model + "' has " + std::to_string(pairs.size()) + " videos; need at least 3");
    }
    r.per_model_n[model] = pairs.size();
    r.per_model_spearman[model] = correlation(pairs, true);
  }
  if (pooled.size() < 3) throw ValidationError("correlate: need at least 3 videos");
  r.overall_spearman = correlation(pooled, true);
  r.overall_pearson = correlation(pooled, false);
  return r;
}

AblationReport ablate(const VideoScores& dsa, const VideoScores& mllm, const VideoScores& fused,
                      const RatingTable& ratings) {
  const HumanAggregate human = human_aggregate(ratings);
  AblationReport out;
  out.rows = {"dsa", "mllm", "fused"};
  const VideoScores* metrics[] = {&dsa, &mllm, &fused};
  for (std::size_t i = 0; i < 3; ++i) {
    const VideoScores& m = *metrics[i];
    check_aligned(m, human.overall, out.rows[i], "a human");
    if (m.size() < 3) throw ValidationError("ablate: need at least 3 videos");
    for (Dimension d : kAllDimensions) {
      std::vector<std::pair<double, double>> pairs;
      for (const auto& [id, v] : m) pairs.emplace_back(v, human.per_dimension.at(d).at(id));
      out.grid[out.rows[i]][d] = correlation(std::move(pairs), true);
    }
  }
  return out;
}

// ---------------------------------------------------------------- score tables

namespace {

std::string number(double v) { return json(v).dump(); }

}  // namespace

std::vector<ScoreRow> parse_scores_csv(std::string_view text) {
  const auto lines = csv_lines(text);
  expect_header(lines, {"video_id", "model_id", "metric", "value"}, "scores");
  std::vector<ScoreRow> rows;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto [lineno, line] = lines[i];
    const std::string where = "scores row " + std::to_string(lineno);
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ParseError(where + ": expected 4 fields, got " + std::to_string(f.size()));
    ScoreRow r{f[0], f[1], f[2], 0.0};
    const auto* end = f[3].data() + f[3].size();
    const auto res = std::from_chars(f[3].data(), end, r.value);
    if (res.ec != std::errc() || res.ptr != end || !std::isfinite(r.value)) {
      throw ParseError(where + ": value '" + f[3] + "' is not a number");
    }
    if (!seen.emplace(r.video_id, r.metric).second) {
      throw ValidationError(where + ": duplicate score for (" + r.video_id + ", " + r.metric + ")");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ScoreRow> load_scores(const std::filesystem::path& path) { return parse_scores_csv(read_text_file(path)); }

std::string scores_csv(const std::vector<ScoreRow>& rows) {
  std::ostringstream os;
  os << "video_id,model_id,metric,value\n";
  for (const auto& r : rows) os << r.video_id << ',' << r.model_id << ',' << r.metric << ',' << number(r.value) << '\n';
  return os.str();
}

// ---------------------------------------------------------------- reports

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw UsageError("unsupported report format '" + std::string(s) + "'");
}

std::string format3(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string render(const CorrelationTable& table, ReportFormat format) {
  if (format == ReportFormat::json) {
    json metrics = json::array();
    for (const auto& r : table.reports) {
      json per_model = json::object(), per_model_n = json::object();
      for (const auto& m : table.models) {
        auto it = r.per_model_spearman.find(m);
        per_model[m] = it == r.per_model_spearman.end() ? json(nullptr) : optional_json(it->second);
        auto n = r.per_model_n.find(m);
        per_model_n[m] = n == r.per_model_n.end() ? 0 : n->second;
      }
      metrics.push_back({{"metric", r.metric},
                         {"per_model_spearman", std::move(per_model)},
                         {"per_model_n", std::move(per_model_n)},
                         {"overall_spearman", optional_json(r.overall_spearman)},
                         {"overall_pearson", optional_json(r.overall_pearson)},
                         {"n", r.n}});
    }
    return json{{"human_aggregation", kHumanAggregationNote}, {"models", table.models}, {"metrics", std::move(metrics)}}
               .dump(2) +
           "\n";
  }
  std::ostringstream os;
  os << "# " << kHumanAggregationNote << "\n";
  os << "metric";
  for (const auto& m : table.models) os << ',' << m;
  os << ",overall_spearman,overall_pearson,n\n";
  for (const auto& r : table.reports) {
    os << r.metric;
    for (const auto& m : table.models) {
      auto it = r.per_model_spearman.find(m);
      os << ',' << format3(it == r.per_model_spearman.end() ? std::nullopt : it->second);
    }
    os << ',' << format3(r.overall_spearman) << ',' << format3(r.overall_pearson) << ',' << r.n << '\n';
  }
  return os.str();
}

std::string render(const AblationReport& report, ReportFormat format) {
  if (format == ReportFormat::json) {
    json rows = json::array();
    for (const auto& name : report.rows) {
      json cells = json::object();
      for (Dimension d : kAllDimensions) {
        auto row = report.grid.find(name);
        std::optional<double> v;
        if (row != report.grid.end()) {
          if (auto it = row->second.find(d); it != row->second.end()) v = it->second;
        }
        cells[std::string(to_string(d))] = optional_json(v);
      }
      rows.push_back({{"metric", name}, {"spearman", std::move(cells)}});
    }
    return json{{"human_aggregation", kHumanAggregationNote}, {"rows", std::move(rows)}}.dump(2) + "\n";
  }
  std::ostringstream os;
  os << "# " << kHumanAggregationNote << "\n";
  os << "metric";
  for (Dimension d : kAllDimensions) os << ',' << to_string(d);
  os << '\n';
  for (const auto& name : report.rows) {
    os << name;
    auto row = report.grid.find(name);
    for (Dimension d : kAllDimensions) {
      std::optional<double> v;
      if (row != report.grid.end()) {
        if (auto it = row->second.find(d); it != row->second.end()) v = it->second;
      }
      os << ',' << format3(v);
    }
    os << '\n';
  }
  return os.str();
}

void emit_report(const CorrelationTable& table, const std::filesystem::path& path, ReportFormat format) {
  write_text_file(path, render(table, format));
}

void emit_report(const AblationReport& report, const std::filesystem::path& path, ReportFormat format) {
  write_text_file(path, render(report, format));
}

}  // namespace longcode
