#pragma once

// Benchmark harness: dataset construction from story seeds, human rating
// ingestion, and correlation / ablation reports.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "longcode/chat.hpp"
#include "longcode/judge.hpp"
#include "longcode/manifest.hpp"

namespace longcode {

/// Outline from a seed frame, then decomposition into 12-24 five-second
/// shots. An out-of-bounds decomposition is reprompted once, then rejected.
PromptSuite build_suite(const std::filesystem::path& seed_frame, ChatClient& client,
                        const JudgeConfig& cfg,
                        const PromptTemplates& templates = default_prompt_templates());

/// Parses a decomposition reply: a JSON object with "shots" or a bare array.
std::vector<ShotPrompt> parse_decomposition(std::string_view text);

enum class Dimension { narrative, causality, consistency };

inline constexpr Dimension kAllDimensions[] = {Dimension::narrative, Dimension::causality,
                                               Dimension::consistency};

std::string_view to_string(Dimension d);
Dimension dimension_from_string(std::string_view s);

struct HumanRating {
  std::string video_id;
  std::string annotator_id;
  Dimension dimension = Dimension::narrative;
  int score = 3;
};

struct RatingTable {
  std::vector<HumanRating> rows;
};

/// CSV with header video_id,annotator_id,dimension,score.
RatingTable parse_ratings_csv(std::string_view text);
RatingTable ingest_ratings(const std::filesystem::path& path);

enum class AggregateScope { overall, per_dimension };

/// overall: mean of every rating of the video (annotators x dimensions).
/// per_dimension: mean of that dimension's ratings. Every video needs all
/// three dimensions.
struct HumanAggregate {
  std::map<std::string, double> overall;
  std::map<Dimension, std::map<std::string, double>> per_dimension;
};

HumanAggregate human_aggregate(const RatingTable& table);

using VideoScores = std::map<std::string, double>;

struct CorrelationReport {
  std::string metric;
  std::map<std::string, std::optional<double>> per_model_spearman;  // nullopt: undefined
  std::map<std::string, std::size_t> per_model_n;
  std::optional<double> overall_spearman;
  std::optional<double> overall_pearson;
  std::size_t n = 0;
};

/// Per-model Spearman on each model's videos and pooled Spearman/Pearson.
/// Throws on misaligned ids or groups with fewer than 3 videos.
CorrelationReport correlate(std::string_view metric, const VideoScores& metric_scores,
                            const VideoScores& human_scores,
                            const std::map<std::string, std::string>& model_of);

struct AblationReport {
  // row name -> dimension -> Spearman (nullopt renders as n/a)
  std::vector<std::string> rows;
  std::map<std::string, std::map<Dimension, std::optional<double>>> grid;
};

AblationReport ablate(const VideoScores& dsa, const VideoScores& mllm, const VideoScores& fused,
                      const RatingTable& ratings);

/// Rows video_id,model_id,metric,value.
struct ScoreRow {
  std::string video_id;
  std::string model_id;
  std::string metric;
  double value = 0.0;
};

std::vector<ScoreRow> parse_scores_csv(std::string_view text);
std::vector<ScoreRow> load_scores(const std::filesystem::path& path);
std::string scores_csv(const std::vector<ScoreRow>& rows);

/// One CorrelationReport per metric, columns per model.
struct CorrelationTable {
  std::vector<std::string> models;
  std::vector<CorrelationReport> reports;
};

enum class ReportFormat { csv, json };

ReportFormat report_format_from_string(std::string_view s);

/// Fixed three-decimal rendering; "n/a" for undefined values.
std::string format3(std::optional<double> v);

std::string render(const CorrelationTable& table, ReportFormat format);
std::string render(const AblationReport& report, ReportFormat format);
void emit_report(const CorrelationTable& table, const std::filesystem::path& path, ReportFormat format);
void emit_report(const AblationReport& report, const std::filesystem::path& path, ReportFormat format);

/// Description of the human-score aggregation, stamped into every report.
inline constexpr std::string_view kHumanAggregationNote =
    "human score = mean of all ratings per video (annotators x dimensions); "
    "ablation uses per-dimension means";

}  // namespace longcode
