// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "judge_script.hpp"
#include "longcode/chat.hpp"
#include "longcode/corruption.hpp"
#include "longcode/dsa.hpp"
#include "longcode/error.hpp"
#include "longcode/harness.hpp"
#include "longcode/judge.hpp"
#include "longcode/mock_corpus.hpp"
#include "longcode/orthogonality.hpp"
#include "longcode/random.hpp"
#include "longcode/stats.hpp"
#include "oracles.hpp"
#include "rating_fixture.hpp"
#include "test_util.hpp"

using namespace longcode;
using Clock = std::chrono::steady_clock;

namespace {

// Collects failed checks for one criterion.
struct Check {
  std::vector<std::string> failures;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void note(const std::string& n) { notes.push_back(n); }
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// ---------------------------------------------------------------- 1

void statistics_oracles(Check& c) {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  std::size_t cases = 0;
  for (int t = 0; t < 1200; ++t) {
    const std::size_t n = 3 + rng.below(48);
    const bool ties = t % 2 == 0;
    const auto x = testutil::random_vector(rng, n, ties);
    const auto y = testutil::random_vector(rng, n, ties && t % 4 == 0);
    const auto r = stats::ranks(x);
    const auto ro = oracle::ranks(x);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(r[i] - static_cast<double>(ro[i])));

    auto undefined = [](auto f) {
      try {
        f();
        return false;
      } catch (const UndefinedError&) {
        return true;
      }
    };
    const bool flat = undefined([&] { return stats::spearman(x, y); });
    if (!flat) {
      worst = std::max(worst, std::abs(stats::spearman(x, y) - static_cast<double>(oracle::spearman(x, y))));
      worst = std::max(worst, std::abs(stats::pearson(x, y) - static_cast<double>(oracle::pearson(x, y))));
    }
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(i) + rng.uniform();
    const auto fit = stats::ols_fit(s, y);
    const auto ofit = oracle::ols(s, y);
    worst = std::max(worst, std::abs(fit.slope - static_cast<double>(ofit.slope)));
    worst = std::max(worst, std::abs(fit.intercept - static_cast<double>(ofit.intercept)));
    if (!undefined([&] { return stats::pearson(s, y); })) {
      worst = std::max(worst, std::abs(fit.r_squared - static_cast<double>(ofit.r_squared)));
    }
    ++cases;
  }
  c.expect(worst <= 1e-12, "max oracle deviation " + fmt(worst) + " > 1e-12");

  const double rho = stats::spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 1, 4, 3});
  c.expect(std::abs(rho - 0.6) <= 1e-9, "spearman hand value " + fmt(rho, 17));
  const double tied = stats::spearman(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 3});
  c.expect(std::abs(tied - std::sqrt(3.0) / 2) <= 1e-9 && format3(tied) == "0.866" &&
               std::abs(tied - 0.8660) < 5e-5,
           "tied spearman hand value " + fmt(tied, 17));
  const double pr = stats::pearson(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 1});
  c.expect(std::abs(pr - std::sqrt(3.0) / 2) <= 1e-9, "pearson hand value " + fmt(pr, 17));
  const auto fit = stats::ols_fit(std::vector<double>{0, 1, 2, 3}, std::vector<double>{1, 0.7, 0.5, 0.2});
  c.expect(std::abs(fit.slope + 0.26) <= 1e-9, "ols slope " + fmt(fit.slope, 17));
  c.expect(std::abs(fit.r_squared - (1.0 - 0.002 / 0.34)) <= 1e-9 && std::abs(fit.r_squared - 0.99412) < 5e-6,
           "ols r2 " + fmt(fit.r_squared, 17));
  const double cos = stats::cosine(std::vector<double>{0.6, 0.8}, std::vector<double>{0.8, 0.6});
  c.expect(std::abs(cos - 0.96) <= 1e-9, "cosine hand value " + fmt(cos, 17));

  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime " + fmt(secs) + " s");
  c.note(std::to_string(cases) + " random cases, max deviation " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------- 2

class TableProvider : public EmbeddingProvider {
 public:
  TableProvider(std::map<std::string, Embedding> texts, Embedding video)
      : texts_(std::move(texts)), video_(std::move(video)) {}
  std::string id() const override { return "table"; }
  std::size_t dim() const override { return video_.dim(); }
  Embedding embed_text(std::string_view t) const override { return texts_.at(std::string(t)); }
  Embedding embed_shot(const Shot&) const override { return video_; }
  Embedding embed_video(const ShotManifest&) const override { return video_; }

 private:
  std::map<std::string, Embedding> texts_;
  Embedding video_;
};

void dsa_worked_example(Check& c) {
  const auto suite = testutil::make_suite(3);
  const auto manifest = testutil::make_manifest(3);
  auto unit = [](std::vector<double> v) { return Embedding::normalized(std::move(v), "table"); };
  const Embedding e1 = unit({1, 0, 0}), e2 = unit({0.6, 0.8, 0}), e3 = unit({0, 0.6, 0.8});
  const std::map<std::string, Embedding> texts{{suite.shots[0].description, e1},
                                               {suite.shots[1].description, e2},
                                               {suite.shots[2].description, e3},
                                               {prompt_global_text(suite), unit({1.6, 1.4, 0.8})}};
  for (const auto& [video, expected] : {std::pair{e2, 1.0}, std::pair{e3, -0.5}}) {
    TableProvider p(texts, video);
    auto [s_c, s_v] = similarity_vectors(suite, manifest, p, VideoEmbedMode::whole_video);
    const double d = dsa_score(s_c, s_v);
    c.expect(std::abs(d - expected) <= 1e-9, "dsa " + fmt(d, 17) + " expected " + fmt(expected));
    c.note("dsa " + fmt(d, 6));
  }
}

// ---------------------------------------------------------------- 3

void shuffle_sensitivity(Check& c) {
  const auto t0 = Clock::now();
  MockCorpusOptions o;
  o.videos = 20;
  o.shots = 12;
  const auto corpus = make_mock_corpus(o);
  std::map<std::string, const PromptSuite*> by_id;
  for (const auto& s : corpus.suites) by_id[s.suite_id] = &s;
  CorruptionToolkit tk;
  tk.provider = corpus.provider;
  tk.exec = Exec::parallel;
  const SweepOptions opts{CorruptionOp::shuffle, {0.0, 0.2, 0.4, 0.8}, 10, 0};

  const auto dsa = sweep(
      [&](const ShotManifest& m, const EmbeddingProvider& p) {
        return score_dsa(*by_id.at(m.suite_id), m, p, VideoEmbedMode::positional_pool).m_dsa;
      },
      corpus.manifests, opts, tk);
  const auto short_mean =
      sweep([](const ShotManifest& m, const EmbeddingProvider&) { return mock_short_metric(m, Aggregator::mean); },
            corpus.manifests, opts, tk);

  c.expect(dsa.failures() == 0 && short_mean.failures() == 0, "sweep cells failed");
  const auto rd = classify_sensitivity(dsa);
  c.expect(rd.slope < 0.0 && rd.r_squared >= kSensitivityMinR2 && rd.sensitive,
           "dsa slope " + fmt(rd.slope) + " r2 " + fmt(rd.r_squared));

  bool identical = true;
  for (std::size_t i = 0; i < short_mean.cells.size(); ++i) {
    identical = identical && same_bits(*short_mean.cells[i].score, *short_mean.cells[i % o.videos].score);
  }
  const auto means = short_mean.means();
  for (double m : means) identical = identical && same_bits(m, means.front());
  c.expect(identical, "short metric scores differ across strengths");
  const auto rs = classify_sensitivity(short_mean);
  c.expect(rs.slope == 0.0 && !rs.sensitive, "short slope " + fmt(rs.slope));

  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, "runtime " + fmt(secs) + " s");
  std::string dm;
  for (double m : dsa.means()) dm += (dm.empty() ? "" : "/") + fmt(m, 3);
  c.note("dsa means " + dm + ", slope " + fmt(rd.slope, 3) + ", r2 " + fmt(rd.r_squared, 3) + "; short mean " +
         fmt(means.front(), 6) + " at every strength, slope " + fmt(rs.slope) + "; " + fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------- 4

void orthogonality(Check& c) {
  const auto t0 = Clock::now();
  const auto ind = sample_ensemble(8, 10000, Regime::independent, 1, Exec::parallel);
  std::string mis;
  for (auto phi : kAllAggregators) {
    const auto e = estimate_orthogonality(ind, phi, 16, StructuralStatistic::adjacency_decay, Exec::parallel);
    c.expect(e.mi_bits <= 0.05, std::string(to_string(phi)) + " independent mi " + fmt(e.mi_bits));
    c.expect(e.permutation_invariance_holds, std::string(to_string(phi)) + " not permutation invariant");
    mis += std::string(mis.empty() ? "" : ", ") + std::string(to_string(phi)) + " " + fmt(e.mi_bits, 3);
  }
  const auto coupled = sample_ensemble(8, 10000, Regime::coupled, 1, Exec::parallel);
  const auto ec = estimate_orthogonality(coupled, Aggregator::mean, 16, StructuralStatistic::adjacency_decay,
                                         Exec::parallel);
  c.expect(ec.mi_bits >= 0.5, "coupled mi " + fmt(ec.mi_bits));
  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, "runtime " + fmt(secs) + " s");
  c.note("independent mi: " + mis + "; coupled mi (mean) " + fmt(ec.mi_bits, 3) + "; " + fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------- 5

void replace_retrieval(Check& c) {
  Rng rng(5005);
  std::size_t matched = 0, instances = 0, with_ties = 0;
  while (instances < 500) {
    const std::size_t dim = 4 + rng.below(29);
    auto provider = std::make_shared<MockProvider>(dim, rng.next());
    const auto m = testutil::make_manifest(2 + rng.below(14), "v" + std::to_string(instances), 2.0 + 6.0 * rng.uniform());
    const auto blocks = blockify(m);

    std::vector<BankEntry> entries;
    const std::size_t unique = 1 + rng.below(40);
    for (std::size_t j = 0; j < unique; ++j) {
      std::vector<double> v(dim);
      for (double& x : v) x = rng.normal();
      entries.push_back({"", Embedding::normalized(std::move(v), provider->id()), {}, {}});
    }
    const std::size_t dups = rng.below(4);
    for (std::size_t d = 0; d < dups; ++d) {
      BankEntry copy = entries[rng.below(unique)];
      entries.push_back(std::move(copy));
    }
    // Near-copy of the block query itself guarantees a tie among duplicates.
    const std::size_t target = rng.below(blocks.size());
    if (rng.below(2) == 0) {
      const Embedding q = block_embedding(m, blocks[target], *provider);
      entries.push_back({"", q, {}, {}});
      entries.push_back({"", q, {}, {}});
    }
    std::vector<std::string> ids;
    for (std::size_t j = 0; j < entries.size(); ++j) {
      entries[j].block_id = "seg-" + std::to_string(rng.below(100000)) + "-" + std::to_string(j);
      ids.push_back(entries[j].block_id);
    }
    std::vector<std::vector<double>> rows;
    for (const auto& e : entries) rows.emplace_back(e.embedding.values().begin(), e.embedding.values().end());
    const ShotBank bank(entries);

    const auto r = replace(m, bank, 1 + rng.below(blocks.size()), rng.next(), *provider, kDefaultBlockSeconds,
                           instances % 2 ? Exec::parallel : Exec::serial);
    for (const auto& rep : r.replacements) {
      const auto& blk = blocks[rep.block];
      // Independent positional pool: w_k = 2(K-k+1)/(K(K+1)).
      const double k = static_cast<double>(blk.size());
      std::vector<double> q(dim, 0.0);
      for (std::size_t i = blk.begin; i < blk.end; ++i) {
        const double w = 2.0 * (k - static_cast<double>(i - blk.begin)) / (k * (k + 1.0));
        const Embedding e = provider->embed_shot(m.shots[i]);
        for (std::size_t d = 0; d < dim; ++d) q[d] += w * e.values()[d];
      }
      const std::size_t best = oracle::argmax(q, rows, ids);
      std::size_t tied = 0;
      for (const auto& row : rows) tied += row == rows[best];
      with_ties += tied > 1;
      matched += bank.entries()[rep.bank_index].block_id == ids[best] &&
                 m.shots[blk.begin].embedding_ref != r.manifest.shots[blk.begin].embedding_ref &&
                 r.manifest.shots[blk.begin].embedding_ref == "bank:" + ids[best];
      if (++instances == 500) break;
    }
  }
  c.expect(matched == instances, std::to_string(instances - matched) + " of " + std::to_string(instances) + " mismatched");
  c.note(std::to_string(matched) + "/" + std::to_string(instances) + " match the brute-force argmax, " +
         std::to_string(with_ties) + " with tied bank vectors");
}

// ---------------------------------------------------------------- 6

void judge_determinism(Check& c, const std::filesystem::path& fixture) {
  const auto suite = load_prompt_suite(fixture / "suite.json");
  const auto manifest = load_manifest(fixture / "manifest.json", suite);
  const auto bank = load_reference_bank(fixture / "bank.json");
  c.expect(manifest.shots.size() == 13, "fixture has " + std::to_string(manifest.shots.size()) + " shots");
  std::vector<std::string> dumps;
  for (int run = 0; run < 3; ++run) {
    auto client = std::make_shared<CassetteClient>(fixture / "cassettes", CassetteMode::replay);
    const Judge judge(client, testutil::judge_fixture_config());
    const auto t = judge.judge_score(manifest, suite, bank);
    c.expect(client->upstream_calls() == 0, "upstream calls in replay");
    std::vector<double> scores;
    for (const auto& r : t.rounds) scores.push_back(r.parsed_score.value_or(-1));
    c.expect(scores == std::vector<double>{4, 4, 5}, "round scores differ");
    c.expect(std::abs(t.m_mllm - 0.8333) < 5e-5, "m_mllm " + fmt(t.m_mllm));
    dumps.push_back(to_json(t).dump());
    if (run == 0) c.note("m_mllm " + fmt(t.m_mllm, 4) + " from rounds 4/4/5, " + std::to_string(client->hits()) + " cassette hits");
  }
  c.expect(dumps[0] == dumps[1] && dumps[1] == dumps[2], "transcripts differ between runs");
}

// ---------------------------------------------------------------- 7

void fusion(Check& c) {
  Rng rng(77);
  bool bounded = true, fixed_point = true;
  for (int i = 0; i < 100000; ++i) {
    const double a = rng.uniform(), b = rng.uniform(), alpha = rng.uniform();
    const double f = fuse(a, b, alpha).fused;
    bounded = bounded && f >= 0.0 && f <= 1.0;
    fixed_point = fixed_point && fuse(a, a, alpha).fused == a;
  }
  for (double e : {0.0, 1.0}) {
    for (double alpha : {0.0, 0.5, 1.0}) bounded = bounded && fuse(e, 1.0 - e, alpha).fused >= 0.0;
  }
  c.expect(bounded, "fused outside [0, 1]");
  c.expect(fixed_point, "fuse(x, x, alpha) != x");
  c.expect(normalize_dsa(-1) == 0.0 && normalize_dsa(0) == 0.5 && normalize_dsa(1) == 1.0, "normalize_dsa endpoints");
  c.expect(normalize_judge_score(1) == 0.0 && normalize_judge_score(3) == 0.5 && normalize_judge_score(5) == 1.0,
           "judge normalization endpoints");
  c.expect(kDefaultAlpha == 0.5 && fuse(0.8, 0.6).alpha == 0.5, "default alpha");
  c.note("100000 random fusions; alpha default " + fmt(kDefaultAlpha));
}

// ---------------------------------------------------------------- 8

void harness_round_trip(Check& c) {
  const auto r = testutil::synthetic_ratings(6, 20, 3, 88);
  const auto table = parse_ratings_csv(r.csv);
  const auto human = human_aggregate(table);
  const auto rep = correlate("oracle", human.overall, human.overall, r.model_of);
  for (const auto& [model, rho] : rep.per_model_spearman) {
    c.expect(rho && *rho == 1.0, "per-model spearman " + model + " = " + (rho ? fmt(*rho, 17) : "n/a"));
  }
  c.expect(rep.overall_spearman && *rep.overall_spearman == 1.0, "overall spearman");

  CorrelationTable ct;
  for (const auto& [model, rho] : rep.per_model_spearman) ct.models.push_back(model);
  ct.reports.push_back(rep);
  VideoScores noisy;
  Rng rng(3);
  for (const auto& [id, v] : human.overall) noisy[id] = v + rng.normal();
  ct.reports.push_back(correlate("noisy", noisy, human.overall, r.model_of));
  const auto ab = ablate(human.per_dimension.at(Dimension::narrative), noisy, human.overall, table);

  const std::regex number(R"(-?\d+\.\d+)");
  const std::regex three(R"(^-?\d+\.\d{3}$)");
  for (auto format : {ReportFormat::csv, ReportFormat::json}) {
    const auto a1 = render(ct, format), a2 = render(ct, format);
    const auto b1 = render(ab, format), b2 = render(ab, format);
    c.expect(a1 == a2 && b1 == b2, "reports are not byte-deterministic");
    if (format == ReportFormat::csv) {
      for (const auto& text : {a1, b1}) {
        for (auto it = std::sregex_iterator(text.begin(), text.end(), number); it != std::sregex_iterator(); ++it) {
          c.expect(std::regex_match(it->str(), three), "value not rendered with 3 decimals: " + it->str());
        }
      }
      c.expect(a1.find("oracle,1.000,1.000,1.000,1.000,1.000,1.000,1.000,1.000,120") != std::string::npos,
               "correlation table row");
    }
  }
  c.note("6 models x 20 videos, per-model and overall spearman 1.000");
}

// ---------------------------------------------------------------- 9

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const std::string& cli, const std::string& args) {
  CliRun r;
  FILE* p = ::popen((cli + " " + args + " 2>&1").c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void end_to_end(Check& c, const std::string& cli, Clock::time_point suite_start) {
  const auto t0 = Clock::now();
  const std::vector<std::string> commands{
      "--seed 11 sweep --mock-videos 20 --mock-shots 12 --strengths 0.2 0.4 0.8 --trials 10",
      "--seed 11 sweep --mock-videos 20 --mock-shots 12 --metric short-mean --strengths 0.2 0.4 0.8 --trials 10",
      "--seed 11 orthogonality --regime independent --k 8 --n 10000 --bins 16 --phi all",
      "--seed 11 orthogonality --regime coupled --k 8 --n 10000 --bins 16 --phi mean",
  };
  for (const auto& cmd : commands) {
    const auto a = run_cli(cli, cmd), b = run_cli(cli, cmd);
    c.expect(a.code == 0 && b.code == 0, "exit code " + std::to_string(a.code) + " for: " + cmd);
    c.expect(!a.out.empty() && a.out == b.out, "outputs differ for: " + cmd);
  }
  const double cli_secs = seconds_since(t0);
  const double total = seconds_since(suite_start);
  c.expect(total < 300.0, "full suite took " + fmt(total) + " s");
  c.note(std::to_string(commands.size()) + " commands byte-identical across 2 runs (" + fmt(cli_secs, 3) +
         " s); whole suite " + fmt(total, 3) + " s");
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path fixture = LONGCODE_FIXTURE_DIR;
  std::string cli = LONGCODE_CLI_PATH;
  if (argc > 1) cli = argv[1];
  if (argc > 2) fixture = argv[2];

  const auto start = Clock::now();
  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
      {"statistics oracle equivalence", statistics_oracles},
      {"DSA worked example", dsa_worked_example},
      {"shuffle sensitivity", shuffle_sensitivity},
      {"short/long orthogonality", orthogonality},
      {"replace retrieval", replace_retrieval},
      {"judge pipeline determinism", [&](Check& c) { judge_determinism(c, fixture / "judge"); }},
      {"fusion and normalization", fusion},
      {"harness round-trip", harness_round_trip},
      {"end-to-end reproducibility", [&](Check& c) { end_to_end(c, cli, start); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = c.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first;
    for (const auto& n : c.notes) std::cout << " | " << n;
    std::cout << "\n";
    for (const auto& f : c.failures) std::cout << "    " << f << "\n";
    std::cout.flush();
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
