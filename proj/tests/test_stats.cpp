#include <gtest/gtest.h>

#include <sstream>

#include "sgqa/sgqa.hpp"

using namespace sgqa;

namespace {

std::vector<SceneGraph> fixtures() { return load_scene_file(std::string(SGQA_SAMPLES_DIR) + "/fixture_scenes.jsonl"); }

QARecord rec(const std::string& scene, const std::string& family, const std::string& type, Answer a,
             const std::string& question = "Is there a chair?") {
  return {scene, question, "(exist (scene))", std::move(a), type, family, {}};
}

}  // namespace

TEST(Stats, HandComputedOnFixtures) {
  auto scenes = fixtures();
  std::vector<QARecord> rs;
  for (int i = 0; i < 4; ++i) rs.push_back(rec("fixture-a", "f1", "count", Answer::integer(i % 2), "How many chairs?"));
  for (int i = 0; i < 6; ++i) rs.push_back(rec("fixture-b", "f2", "exist", Answer::boolean(i < 2), "Is there a red pillow?"));
  auto s = compute_stats(rs, scenes);
  EXPECT_EQ(s.total_questions, 10u);
  EXPECT_EQ(s.total_scenes, 2u);
  EXPECT_DOUBLE_EQ(s.avg_questions_per_scene, 5.0);
  EXPECT_DOUBLE_EQ(s.avg_question_length, (4 * 3 + 6 * 5) / 10.0);
  EXPECT_DOUBLE_EQ(s.avg_instances_per_scene, (5 + 4) / 2.0);
  // fixture-a: chair table lamp; fixture-b: sofa pillow tv.
  EXPECT_EQ(s.vocab_counts.at("object"), 6u);
  EXPECT_EQ(s.vocab_counts.at("color"), 5u);     // black brown gray red white
  EXPECT_EQ(s.vocab_counts.at("material"), 4u);  // fabric metal plastic wooden
  EXPECT_EQ(s.vocab_counts.at("shape"), 3u);
  EXPECT_EQ(s.vocab_counts.at("size"), 4u);
  EXPECT_EQ(s.vocab_counts.at("relation"), 7u);
  EXPECT_EQ(s.per_question_type.at("count"), 4u);
  EXPECT_EQ(s.per_question_type.at("exist"), 6u);
  EXPECT_EQ(s.answers_per_family.at("f2").at("yes"), 2u);
  EXPECT_EQ(s.answers_per_family.at("f2").at("no"), 4u);
}

TEST(Stats, RecountOracleAndPermutationInvariance) {
  auto tax = load_taxonomy_file(std::string(SGQA_DATA_DIR) + "/taxonomy.json");
  auto reg = load_families_file(std::string(SGQA_DATA_DIR) + "/families.json", tax);
  auto scenes = synth_scenes(3, 40, 6, 14, tax);
  GenerationConfig cfg;
  cfg.seed = 1;
  auto rs = generate_corpus(scenes, reg, cfg).records;
  auto s = compute_stats(rs, scenes);

  // Independent one-pass recount.
  std::size_t words = 0, objects = 0;
  for (const auto& r : rs) {
    bool in_word = false;
    for (char ch : r.question) {
      bool space = ch == ' ' || ch == '\t' || ch == '\n';
      if (!space && !in_word) ++words;
      in_word = !space;
    }
  }
  std::set<std::string> rel;
  for (const auto& g : scenes) {
    objects += g.nodes().size();
    for (const auto& e : g.edges()) rel.insert(e.predicate);
  }
  EXPECT_EQ(s.total_questions, rs.size());
  EXPECT_DOUBLE_EQ(s.avg_question_length, static_cast<double>(words) / static_cast<double>(rs.size()));
  EXPECT_DOUBLE_EQ(s.avg_instances_per_scene, static_cast<double>(objects) / 40.0);
  EXPECT_EQ(s.vocab_counts.at("relation"), rel.size());

  Rng rng(4);
  for (std::size_t i = rs.size(); i > 1; --i) std::swap(rs[i - 1], rs[rng.below(i)]);
  EXPECT_EQ(compute_stats(rs, scenes).to_json(), s.to_json());
}

TEST(Stats, MissingSceneIsAnError) {
  EXPECT_THROW(compute_stats({rec("elsewhere", "f", "exist", Answer::boolean(true))}, fixtures()), DataError);
}

TEST(Baseline, TieBreaksLexicographically) {
  std::vector<QARecord> train, test;
  for (int i = 0; i < 10; ++i) {
    train.push_back(rec("a", "f", "exist", Answer::boolean(true)));
    train.push_back(rec("a", "f", "exist", Answer::boolean(false)));
    test.push_back(rec("b", "f", "exist", Answer::boolean(true)));
    test.push_back(rec("b", "f", "exist", Answer::boolean(false)));
  }
  auto rep = blind_baseline(train, test);
  EXPECT_EQ(rep.per_family.at("f").prediction, "no");
  EXPECT_DOUBLE_EQ(rep.overall.accuracy(), 0.5);
  EXPECT_EQ(rep.per_family.at("f").support, 2u);
}

TEST(Baseline, SingleAnswerFamilyAndWeightedOverall) {
  std::vector<QARecord> train = {rec("a", "one", "exist", Answer::boolean(true)),
                                 rec("a", "many", "query_color", Answer::attribute("red")),
                                 rec("a", "many", "query_color", Answer::attribute("red")),
                                 rec("a", "many", "query_color", Answer::attribute("blue"))};
  std::vector<QARecord> test = {rec("b", "one", "exist", Answer::boolean(true)),
                                rec("b", "many", "query_color", Answer::attribute("red")),
                                rec("b", "many", "query_color", Answer::attribute("blue")),
                                rec("b", "many", "query_color", Answer::attribute("blue"))};
  auto rep = blind_baseline(train, test);
  EXPECT_DOUBLE_EQ(rep.per_family.at("one").test.accuracy(), 1.0);
  EXPECT_DOUBLE_EQ(rep.per_type.at("query_color").accuracy(), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(rep.overall.accuracy(), 2.0 / 4.0);
}

TEST(Baseline, UnseenFamilyUsesGlobalMajority) {
  std::vector<QARecord> train = {rec("a", "f", "count", Answer::integer(2)), rec("a", "f", "count", Answer::integer(2)),
                                 rec("a", "g", "exist", Answer::boolean(true))};
  std::vector<QARecord> test = {rec("b", "h", "count", Answer::integer(2)), rec("b", "h", "count", Answer::integer(3))};
  auto rep = blind_baseline(train, test);
  EXPECT_EQ(rep.global_prediction, "2");
  EXPECT_DOUBLE_EQ(rep.per_family.at("h").test.accuracy(), 0.5);
}

TEST(Baseline, EmptySplitIsAnError) {
  std::vector<QARecord> one = {rec("a", "f", "exist", Answer::boolean(true))};
  EXPECT_THROW(blind_baseline({}, one), DataError);
  EXPECT_THROW(blind_baseline(one, {}), DataError);
}

TEST(Baseline, UniformFamilyConvergesToOneOverK) {
  Rng rng(12);
  for (std::size_t k : {2u, 4u, 7u}) {
    std::vector<QARecord> train, test;
    for (int i = 0; i < 2000; ++i) {
      train.push_back(rec("a", "f", "count", Answer::integer(static_cast<std::int64_t>(rng.below(k)))));
      test.push_back(rec("b", "f", "count", Answer::integer(static_cast<std::int64_t>(rng.below(k)))));
    }
    auto rep = blind_baseline(train, test);
    EXPECT_NEAR(rep.overall.accuracy(), 1.0 / static_cast<double>(k), 0.05) << k;
    EXPECT_GE(rep.overall.accuracy(), 0.0);
    EXPECT_LE(rep.overall.accuracy(), 1.0);
  }
}
