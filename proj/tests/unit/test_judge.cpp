#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "judge_script.hpp"
#include "longcode/error.hpp"
#include "longcode/judge.hpp"
#include "longcode/random.hpp"
#include "test_util.hpp"

using namespace longcode;
using testutil::ScriptedChat;

TEST(ParseScore, JsonFieldWins) {
  EXPECT_EQ(parse_score(R"({"score": 4})"), 4.0);
  EXPECT_EQ(parse_score(R"(Sure. {"score": "3.5", "reason": "score 2"})"), 3.5);
  EXPECT_EQ(parse_score(R"({"reason": "ok"} Score: 2)"), 2.0);
}

TEST(ParseScore, RegexFallbackTakesLastInRange) {
  EXPECT_EQ(parse_score("Score: 4"), 4.0);
  EXPECT_EQ(parse_score("first score 2, final score: 5"), 5.0);
  EXPECT_EQ(parse_score("SCORE = 3.5"), 3.5);
  EXPECT_EQ(parse_score("score 9 then score 1"), 1.0);
  EXPECT_THROW(parse_score("no number here"), ParseError);
  EXPECT_THROW(parse_score("score: 7"), ParseError);
  EXPECT_THROW(parse_score(R"({"score": 0})"), ParseError);
}

TEST(JudgeNormalization, Endpoints) {
  EXPECT_EQ(normalize_judge_score(1), 0.0);
  EXPECT_EQ(normalize_judge_score(3), 0.5);
  EXPECT_EQ(normalize_judge_score(5), 1.0);
  EXPECT_THROW(normalize_judge_score(0.5), ValidationError);
  EXPECT_THROW(normalize_judge_score(std::nan("")), ValidationError);
}

TEST(JudgeConfig, Validation) {
  JudgeConfig cfg;
  EXPECT_NO_THROW(cfg.validate(3));
  EXPECT_THROW(cfg.validate(2), ValidationError);
  cfg.temperatures = {0.3};
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.frames_per_shot = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_THROW(Judge(nullptr, JudgeConfig{}), UsageError);
}

TEST(ReferenceBank, Validation) {
  ReferenceBank bank = testutil::judge_fixture_bank();
  EXPECT_NO_THROW(validate(bank));
  bank.entries[1].human_score = 3.25;
  EXPECT_THROW(validate(bank), ValidationError);
  bank = testutil::judge_fixture_bank();
  bank.entries[1].video_id = bank.entries[0].video_id;
  EXPECT_THROW(validate(bank), ValidationError);
  EXPECT_THROW(validate(ReferenceBank{}), ValidationError);
}

TEST(SampleReferences, DeterministicAndOrderIndependent) {
  const ReferenceBank bank = testutil::judge_fixture_bank();
  ReferenceBank shuffled = bank;
  Rng rng(3);
  rng.shuffle(shuffled.entries);
  for (std::size_t round = 0; round < 5; ++round) {
    auto ids = [&](const ReferenceBank& b) {
      std::vector<std::string> out;
      for (std::size_t i : sample_references(77, round, b, 3)) out.push_back(b.entries[i].video_id);
      return out;
    };
    const auto a = ids(bank);
    EXPECT_EQ(a, ids(bank));
    EXPECT_EQ(a, ids(shuffled));
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  }
  EXPECT_NE(sample_references(77, 0, bank, 3), sample_references(77, 1, bank, 3));
  EXPECT_THROW(sample_references(1, 0, bank, 16), ValidationError);
}

TEST(SampleFrames, EvenlySpacedWithEnds) {
  std::vector<std::string> frames;
  for (int i = 0; i < 10; ++i) frames.push_back("f" + std::to_string(i));
  const auto four = sample_frames(frames, 4);
  ASSERT_EQ(four.size(), 4u);
  EXPECT_EQ(four.front(), "f0");
  EXPECT_EQ(four.back(), "f9");
  EXPECT_TRUE(std::is_sorted(four.begin(), four.end()));
  EXPECT_EQ(sample_frames(frames, 1), std::vector<std::string>{"f0"});
  EXPECT_EQ(sample_frames(std::span(frames).first(3), 4).size(), 3u);
}

TEST(Judge, ScriptedPipelineScoresFourFourFive) {
  auto chat = std::make_shared<ScriptedChat>(testutil::scripted_judge_reply);
  Judge judge(chat, testutil::judge_fixture_config());
  const auto t = judge.judge_score(testutil::judge_fixture_manifest(), testutil::judge_fixture_suite(),
                                   testutil::judge_fixture_bank());
  ASSERT_EQ(t.rounds.size(), 3u);
  EXPECT_EQ(t.rounds[0].parsed_score, 4.0);
  EXPECT_EQ(t.rounds[1].parsed_score, 4.0);
  EXPECT_TRUE(t.rounds[1].reprompted);
  EXPECT_FALSE(t.rounds[0].reprompted);
  EXPECT_EQ(t.rounds[2].parsed_score, 5.0);
  EXPECT_NEAR(t.m_mllm, (13.0 / 3.0 - 1.0) / 4.0, 1e-12);
  EXPECT_FALSE(t.partial);
  EXPECT_EQ(t.captions.size(), 13u);
  EXPECT_EQ(t.captions[2], "A shot showing file://frames/shot2_0.png.");
  // 13 captions, one analysis, 3 rounds plus one reprompt.
  EXPECT_EQ(chat->calls(), 18u);
  for (const auto& r : chat->requests()) {
    if (r.temperature == 0.0) continue;
    EXPECT_TRUE(r.temperature == 0.3 || r.temperature == 0.4 || r.temperature == 0.5);
  }
}

TEST(Judge, RepromptSendsPreviousReplyAndTemplate) {
  auto chat = std::make_shared<ScriptedChat>(testutil::scripted_judge_reply);
  Judge judge(chat, testutil::judge_fixture_config());
  judge.judge_score(testutil::judge_fixture_manifest(), testutil::judge_fixture_suite(), testutil::judge_fixture_bank());
  std::size_t reprompts = 0;
  for (const auto& r : chat->requests()) {
    if (r.messages.size() != 3) continue;
    ++reprompts;
    EXPECT_EQ(r.messages[1]["role"], "assistant");
    EXPECT_EQ(r.messages[1]["content"], "The transitions look fine overall.");
    EXPECT_EQ(testutil::last_text(r), judge.templates().reprompt);
  }
  EXPECT_EQ(reprompts, 1u);
}

TEST(Judge, FailedRoundsMakePartialTranscript) {
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest& r) -> std::string {
    if (r.temperature == 0.5) return "no idea";
    return testutil::scripted_judge_reply(r);
  });
  Judge judge(chat, testutil::judge_fixture_config());
  const auto t = judge.judge_score(testutil::judge_fixture_manifest(), testutil::judge_fixture_suite(),
                                   testutil::judge_fixture_bank());
  EXPECT_TRUE(t.partial);
  EXPECT_FALSE(t.rounds[2].parsed_score.has_value());
  EXPECT_FALSE(t.rounds[2].error.empty());
  EXPECT_DOUBLE_EQ(t.m_mllm, 0.75);
}

TEST(Judge, AllRoundsFailingIsServiceError) {
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest& r) -> std::string {
    if (r.temperature > 0.0) return "unsure";
    return testutil::scripted_judge_reply(r);
  });
  Judge judge(chat, testutil::judge_fixture_config());
  EXPECT_THROW(judge.judge_score(testutil::judge_fixture_manifest(), testutil::judge_fixture_suite(),
                                 testutil::judge_fixture_bank()),
               ServiceError);
}

TEST(Judge, ShotWithoutKeyframesIsRejected) {
  auto chat = std::make_shared<ScriptedChat>(testutil::scripted_judge_reply);
  Judge judge(chat, testutil::judge_fixture_config());
  auto m = testutil::judge_fixture_manifest();
  m.shots[4].keyframes.clear();
  EXPECT_THROW(judge.judge_score(m, testutil::judge_fixture_suite(), testutil::judge_fixture_bank()),
               ValidationError);
  EXPECT_EQ(chat->calls(), 0u);
}

TEST(Cassette, RecordThenReplayWithoutUpstream) {
  testutil::TempDir dir("cassette");
  auto upstream = std::make_shared<ScriptedChat>(testutil::scripted_judge_reply);
  const auto suite = testutil::judge_fixture_suite();
  const auto manifest = testutil::judge_fixture_manifest();
  const auto bank = testutil::judge_fixture_bank();

  auto recorder = std::make_shared<CassetteClient>(dir.path(), CassetteMode::record, upstream);
  const auto recorded = Judge(recorder, testutil::judge_fixture_config()).judge_score(manifest, suite, bank);
  EXPECT_EQ(recorder->upstream_calls(), 18u);

  auto replay = std::make_shared<CassetteClient>(dir.path(), CassetteMode::replay);
  const auto replayed = Judge(replay, testutil::judge_fixture_config()).judge_score(manifest, suite, bank);
  EXPECT_EQ(replay->upstream_calls(), 0u);
  EXPECT_EQ(replay->hits(), 18u);
  EXPECT_EQ(to_json(recorded).dump(), to_json(replayed).dump());

  JudgeConfig other = testutil::judge_fixture_config();
  other.seed = 1;
  EXPECT_THROW(Judge(replay, other).judge_score(manifest, suite, bank), ServiceError);
  EXPECT_THROW(CassetteClient(dir.path(), CassetteMode::record), UsageError);
}

TEST(ChatRequest, HashCoversEveryField) {
  ChatRequest a{"m", nlohmann::json::array({chat_message("user", "hi")}), 0.3, 1};
  auto h = a.hash();
  EXPECT_EQ(h.size(), 64u);
  EXPECT_EQ(h, a.hash());
  ChatRequest b = a;
  b.temperature = 0.4;
  EXPECT_NE(b.hash(), h);
  b = a;
  b.seed = 2;
  EXPECT_NE(b.hash(), h);
  b = a;
  b.model = "n";
  EXPECT_NE(b.hash(), h);
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(PromptTemplates, DirectoryOverridesDefaults) {
  const auto defaults = default_prompt_templates();
  EXPECT_FALSE(defaults.version.empty());
  EXPECT_FALSE(defaults.score.empty());
  EXPECT_FALSE(defaults.reprompt.empty());
  testutil::TempDir dir("prompts");
  write_text_file(dir / "score.txt", "Rate it: {storyline}\n");
  write_text_file(dir / "VERSION", "custom-1\n");
  const auto t = load_prompt_templates(dir.path());
  EXPECT_EQ(t.score, "Rate it: {storyline}");
  EXPECT_EQ(t.version, "custom-1");
  EXPECT_EQ(t.caption, defaults.caption);
}
