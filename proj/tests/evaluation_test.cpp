#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "slidelm/error.hpp"
#include "slidelm/evaluation/baselines.hpp"
#include "slidelm/evaluation/judge.hpp"
#include "slidelm/evaluation/metrics.hpp"
#include "slidelm/evaluation/taxonomy.hpp"
#include "slidelm/evaluation/vqa.hpp"
#include "slidelm/rng.hpp"
#include "support/metric_oracle.hpp"

namespace slidelm {
namespace {

namespace fs = std::filesystem;

TEST(Metrics, TokenizationLowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(metric_tokens("The tumor-cells, SHOW atypia."),
            (std::vector<std::string>{"the", "tumor", "cells", "show", "atypia"}));
  EXPECT_TRUE(metric_tokens(" ,.; ").empty());
}

TEST(Metrics, RepeatedWordBleu1IsQuarter) {
  EXPECT_DOUBLE_EQ(bleu("the the the the", {"the cat"}, 1), 0.25);
}

TEST(Metrics, IdenticalIsOneDisjointIsZero) {
  for (int n = 1; n <= 4; ++n) {
    EXPECT_DOUBLE_EQ(bleu("a b c d e", {"a b c d e"}, n), 1.0);
    EXPECT_EQ(bleu("a b c d e", {"v w x y z"}, n), 0.0);
  }
  EXPECT_DOUBLE_EQ(rouge_l("a b c", "a b c"), 1.0);
  EXPECT_EQ(rouge_l("a b c", "x y z"), 0.0);
}

TEST(Metrics, EmptyInputs) {
  EXPECT_EQ(bleu("", {"a b"}, 1), 0.0);
  EXPECT_EQ(rouge_l("", ""), 0.0);
  EXPECT_EQ(rouge_l("a", ""), 0.0);
  EXPECT_THROW(bleu("a", {"a"}, 0), UsageError);
  EXPECT_THROW(bleu("a", {"a"}, 5), UsageError);
  EXPECT_THROW(bleu("a", {}, 1), UsageError);
}

TEST(Metrics, BrevityPenaltyHandCase) {
  // Candidate 2 tokens vs reference 4: precision 1, BP = exp(1 - 4/2).
  EXPECT_NEAR(bleu("a b", {"a b c d"}, 1), std::exp(-1.0), 1e-15);
  // Closest reference length wins; tie goes to the shorter.
  EXPECT_NEAR(bleu("a b c", {"a b", "a b c d"}, 1), 1.0, 1e-15);
  EXPECT_NEAR(bleu("a b", {"a b c", "a b c d e f"}, 1), std::exp(1.0 - 3.0 / 2.0), 1e-15);
}

TEST(Metrics, MatchesBruteForceOracleOnRandomPairs) {
  Rng rng(20240611);
  for (int i = 0; i < 200; ++i) {
    std::string c = testing::random_sentence(rng), r = testing::random_sentence(rng);
    for (int n = 1; n <= 4; ++n) EXPECT_NEAR(bleu(c, {r}, n), testing::oracle_bleu(c, {r}, n), 1e-12) << c << " | " << r;
    EXPECT_NEAR(rouge_l(c, r), testing::oracle_rouge_l(c, r), 1e-12) << c << " | " << r;
  }
}

TEST(Metrics, MultiReferenceMatchesOracle) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    std::string c = testing::random_sentence(rng);
    std::vector<std::string> refs{testing::random_sentence(rng), testing::random_sentence(rng),
                                  testing::random_sentence(rng)};
    for (int n = 1; n <= 4; ++n) EXPECT_NEAR(bleu(c, refs, n), testing::oracle_bleu(c, refs, n), 1e-12);
  }
}

TEST(Metrics, CaptionScoresAverageSentences) {
  auto s = caption_scores({"a b c", "x"}, {"a b c", "y"});
  EXPECT_EQ(s.count, 2u);
  EXPECT_DOUBLE_EQ(s.bleu[0], 0.5);
  EXPECT_DOUBLE_EQ(s.rouge_l, 0.5);
}

TEST(Taxonomy, ThirteenNarrowCategoriesInThreeFamilies) {
  auto cats = vqa_categories();
  ASSERT_EQ(cats.size(), 13u);
  std::size_t total = 0;
  std::set<std::string_view> broad;
  for (const auto& c : cats) {
    total += c.benchmark_items;
    broad.insert(c.broad);
  }
  EXPECT_EQ(total, 7827u);
  EXPECT_EQ(broad.size(), 3u);
  EXPECT_TRUE(valid_category("Diagnosis", "Staging"));
  EXPECT_FALSE(valid_category("Clinical", "Staging"));
  EXPECT_TRUE(valid_category("BCNB", "Tumor Type"));
  EXPECT_EQ(label_tasks().size(), 7u);
}

QARecord mc(std::string id, std::string broad, std::string narrow, char answer) {
  QARecord r;
  r.id = std::move(id);
  r.slide_id = "s-" + r.id;
  r.question = "q";
  r.options = {"w", "x", "y", "z"};
  r.answer = answer;
  r.broad = std::move(broad);
  r.narrow = std::move(narrow);
  return r;
}

TEST(ExtractChoice, Rules) {
  std::vector<std::string> opts{"Invasive ductal carcinoma", "Invasive lobular carcinoma", "Other Type", "Normal"};
  EXPECT_EQ(extract_choice("B. Invasive ductal carcinoma", opts), 'B');
  EXPECT_EQ(extract_choice("(C) whatever", opts), 'C');
  EXPECT_EQ(extract_choice("D", opts), 'D');
  EXPECT_EQ(extract_choice("  A)", opts), 'A');
  EXPECT_EQ(extract_choice("other type.", opts), 'C');
  EXPECT_EQ(extract_choice("I think it is invasive lobular carcinoma here", opts), 'B');
  EXPECT_EQ(extract_choice("either invasive ductal carcinoma or invasive lobular carcinoma", opts), std::nullopt);
  EXPECT_EQ(extract_choice("A tumor of unclear type", opts), std::nullopt);
  EXPECT_EQ(extract_choice("E.", opts), std::nullopt);
  EXPECT_EQ(extract_choice("", opts), std::nullopt);
  EXPECT_THROW(extract_choice("A", {}), UsageError);
}

TEST(VqaEval, HandCountedFixture) {
  std::vector<QARecord> recs{
      mc("1", "Microscopy", "Tumor Characteristics", 'A'), mc("2", "Microscopy", "Tumor Characteristics", 'B'),
      mc("3", "Microscopy", "Tumor Characteristics", 'C'), mc("4", "Clinical", "Risk Factors", 'A'),
      mc("5", "Clinical", "Risk Factors", 'D'),           mc("6", "Clinical", "Risk Factors", 'B'),
  };
  std::map<std::string, std::optional<char>> pred{{"1", 'A'}, {"2", 'B'}, {"3", 'A'}, {"4", 'A'}, {"5", std::nullopt}};
  auto rep = vqa_eval(recs, pred);
  EXPECT_EQ(rep.overall.correct, 3u);
  EXPECT_EQ(rep.overall.total, 6u);
  EXPECT_DOUBLE_EQ(rep.broad["Microscopy"].accuracy(), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rep.broad["Clinical"].accuracy(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(rep.narrow["Clinical/Risk Factors"].accuracy(), 1.0 / 3.0);

  pred["nope"] = 'A';
  EXPECT_THROW(vqa_eval(recs, pred), UsageError);
}

TEST(VqaEval, AllCorrectAndWeightedMeanInvariant) {
  Rng rng(3);
  std::vector<QARecord> recs;
  auto cats = vqa_categories();
  for (int i = 0; i < 300; ++i) {
    const auto& c = cats[rng.below(cats.size())];
    recs.push_back(mc(std::to_string(i), std::string(c.broad), std::string(c.narrow), static_cast<char>('A' + rng.below(4))));
  }
  std::map<std::string, std::optional<char>> truth;
  for (const auto& r : recs) truth[r.id] = r.answer;
  auto all = vqa_eval(recs, truth);
  EXPECT_DOUBLE_EQ(all.overall.accuracy(), 1.0);
  for (const auto& [_, t] : all.broad) EXPECT_DOUBLE_EQ(t.accuracy(), 1.0);

  auto rep = vqa_eval(recs, random_predictions(recs, 11));
  double weighted = 0;
  std::size_t n = 0;
  for (const auto& [_, t] : rep.narrow) weighted += t.accuracy() * static_cast<double>(t.total), n += t.total;
  EXPECT_NEAR(weighted / static_cast<double>(n), rep.overall.accuracy(), 1e-12);
  for (const auto& b : broad_categories()) {
    std::size_t c = 0, t = 0;
    for (const auto& [k, v] : rep.narrow)
      if (k.rfind(std::string(b) + "/", 0) == 0) c += v.correct, t += v.total;
    EXPECT_EQ(rep.broad[std::string(b)].correct, c);
    EXPECT_EQ(rep.broad[std::string(b)].total, t);
  }
}

TEST(VqaEval, RandomPredictorNearQuarter) {
  std::vector<QARecord> recs;
  Rng rng(1);
  for (int i = 0; i < 5000; ++i)
    recs.push_back(mc("r" + std::to_string(i), "Diagnosis", "Grading", static_cast<char>('A' + rng.below(4))));
  auto rep = vqa_eval(recs, random_predictions(recs, 7));
  EXPECT_NEAR(rep.overall.accuracy(), 0.25, 0.02);
  EXPECT_EQ(random_predictions(recs, 7), random_predictions(recs, 7));
}

TEST(Benchmark, JsonlRoundTripAndValidation) {
  fs::path dir = fs::temp_directory_path() / "slidelm_eval_bench";
  fs::create_directories(dir);
  auto a = mc("1", "Diagnosis", "Staging", 'C');
  QARecord b;
  b.id = "2";
  b.slide_id = "s";
  b.question = "Describe";
  b.type = QuestionType::short_answer;
  b.answer_text = "free text";
  b.broad = "Clinical";
  b.narrow = "Risk Factors";
  write_benchmark((dir / "b.jsonl").string(), {a, b});
  auto back = read_benchmark((dir / "b.jsonl").string());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].answer, 'C');
  EXPECT_EQ(back[0].options, a.options);
  EXPECT_EQ(back[1].type, QuestionType::short_answer);
  EXPECT_EQ(back[1].answer_text, "free text");

  EXPECT_THROW(record_from_json_line(R"({"id":"x","slide_id":"s","question":"q","options":["a","b"],"answer":"C","broad":"Diagnosis","narrow":"Staging"})"),
               LoadError);
  EXPECT_THROW(record_from_json_line(R"({"id":"x","slide_id":"s","question":"q","options":["a"],"answer":"A","broad":"Diagnosis","narrow":"Nope"})"),
               LoadError);
  EXPECT_THROW(record_from_json_line("{not json"), LoadError);
  EXPECT_THROW(read_benchmark((dir / "missing.jsonl").string()), LoadError);
}

TEST(Benchmark, ResultAndSummaryCsv) {
  fs::path dir = fs::temp_directory_path() / "slidelm_eval_csv";
  fs::create_directories(dir);
  std::vector<QARecord> recs{mc("1", "Diagnosis", "Staging", 'A'), mc("2", "Diagnosis", "Staging", 'B')};
  std::map<std::string, std::optional<char>> pred{{"1", 'A'}};
  write_vqa_results((dir / "r.csv").string(), recs, pred);
  write_vqa_summary((dir / "s.csv").string(), vqa_eval(recs, pred));
  std::ifstream r(dir / "r.csv"), s(dir / "s.csv");
  std::stringstream rs, ss;
  rs << r.rdbuf();
  ss << s.rdbuf();
  EXPECT_EQ(rs.str(), "id,slide_id,broad,narrow,answer,prediction,correct\n1,s-1,Diagnosis,Staging,A,A,1\n2,s-2,Diagnosis,Staging,B,,0\n");
  EXPECT_NE(ss.str().find("overall,Overall,1,2,50.00"), std::string::npos);
  EXPECT_NE(format_report(vqa_eval(recs, pred)).find("Microscopy\tDiagnosis\tClinical\tOverall"), std::string::npos);
}

TEST(Judge, ScoreParsing) {
  EXPECT_EQ(parse_judge_score("7"), 7);
  EXPECT_EQ(parse_judge_score("Overall fine. Score: 9/10"), 9);
  EXPECT_EQ(parse_judge_score("score = 4"), 4);
  EXPECT_EQ(parse_judge_score("10 / 10"), 10);
  EXPECT_EQ(parse_judge_score("11"), std::nullopt);
  EXPECT_EQ(parse_judge_score("0/10"), std::nullopt);
  EXPECT_EQ(parse_judge_score("pretty good"), std::nullopt);
}

TEST(Judge, RetriesThenMissing) {
  ScriptedChatClient seven({"7"});
  EXPECT_EQ(judge_caption("a", "b", seven), 7);
  ScriptedChatClient garbage({"??", "nope", "meh"});
  EXPECT_EQ(judge_caption("a", "b", garbage), std::nullopt);
  EXPECT_EQ(garbage.requests().size(), 3u);
  ScriptedChatClient late({"x", "Score: 3"});
  EXPECT_EQ(judge_caption("cand", "ref", late), 3);
  auto reqs = late.requests();
  EXPECT_NE(reqs[0].messages[0].content.find("cand"), std::string::npos);
  EXPECT_NE(reqs[0].messages[0].content.find("ref"), std::string::npos);
  EXPECT_EQ(judge_prompt_hash().size(), 64u);
}

TEST(Judge, ParallelSummaryKeepsOrderAndCountsMissing) {
  FunctionChatClient fc([](const ChatRequest& r) {
    const auto& c = r.messages[0].content;
    auto p = c.find("Candidate caption:\n");
    std::string cand = c.substr(p + 19);
    cand.pop_back();
    return cand == "bad" ? std::string("no idea") : cand;
  });
  std::vector<std::string> cands{"3", "bad", "5", "10", "bad", "1"};
  auto s = judge_captions(cands, std::vector<std::string>(6, "r"), fc, {}, 3);
  std::vector<std::optional<int>> want{3, std::nullopt, 5, 10, std::nullopt, 1};
  EXPECT_EQ(s.scores, want);
  EXPECT_EQ(s.missing, 2u);
  EXPECT_DOUBLE_EQ(s.mean, 19.0 / 4.0);
}

TEST(Baselines, PluralityVoteFixtures) {
  EXPECT_EQ(plurality_vote({'A', 'A', 'B'}), 'A');
  EXPECT_EQ(plurality_vote({'B', 'A'}), 'A');
  EXPECT_EQ(plurality_vote({'C', 'C', 'B', 'B', 'D'}), 'B');
  EXPECT_EQ(plurality_vote({std::nullopt, 'D'}), 'D');
  EXPECT_EQ(plurality_vote({}), std::nullopt);
}

TEST(Baselines, MajorityVoteSamplesWithoutReplacementDeterministically) {
  EXPECT_EQ(kMajorityVotePatches, 30u);
  auto s = sample_patches(100, 30, 9);
  EXPECT_EQ(s.size(), 30u);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 30u);
  EXPECT_EQ(s, sample_patches(100, 30, 9));
  EXPECT_NE(s, sample_patches(100, 30, 10));
  EXPECT_EQ(sample_patches(7, 30, 1).size(), 7u);

  std::vector<std::size_t> asked;
  auto ans = [&](std::size_t i) -> std::optional<char> {
    asked.push_back(i);
    return static_cast<char>('A' + i % 3);
  };
  auto a = majority_vote_baseline(100, ans, 42);
  auto first = asked;
  asked.clear();
  EXPECT_EQ(majority_vote_baseline(100, ans, 42), a);
  EXPECT_EQ(asked, first);
  EXPECT_EQ(asked.size(), 30u);
  EXPECT_THROW(majority_vote_baseline(0, ans, 1), UsageError);
}

TEST(Baselines, ThumbnailGetsSquare1024) {
  Raster slide(3000, 1200, 3, 200);
  std::size_t seen = 0;
  auto model = [&](const Raster& r) {
    seen = r.width * 10000 + r.height;
    return std::string("(B)");
  };
  EXPECT_EQ(thumbnail_baseline(slide, {"x", "y"}, model), 'B');
  EXPECT_EQ(seen, 1024u * 10000 + 1024u);
  EXPECT_THROW(thumbnail_baseline(Raster{}, {"x"}, model), UsageError);
}

TEST(Baselines, TextOnlyPromptListsOptions) {
  auto p = text_only_prompt("Which grade?", {"1", "2", "3"});
  EXPECT_NE(p.find("A. 1\nB. 2\nC. 3\n"), std::string::npos);
  EXPECT_EQ(text_only_baseline("q", {"x", "y"}, [](const std::string&) { return "y"; }), 'B');
}

}  // namespace
}  // namespace slidelm
