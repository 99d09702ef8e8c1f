#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sgqa/sgqa.hpp"

using namespace sgqa;

namespace {

const Taxonomy& taxonomy() {
  static const Taxonomy t = load_taxonomy_file(std::string(SGQA_DATA_DIR) + "/taxonomy.json");
  return t;
}

const FamilyRegistry& registry() {
  static const FamilyRegistry r = load_families_file(std::string(SGQA_DATA_DIR) + "/families.json", taxonomy());
  return r;
}

std::vector<SceneGraph> fixtures() { return load_scene_file(std::string(SGQA_SAMPLES_DIR) + "/fixture_scenes.jsonl"); }

const std::vector<SceneGraph>& synth200() {
  static const auto s = synth_scenes(11, 200, 6, 14, taxonomy());
  return s;
}

GenerationConfig config(std::uint64_t seed = 42) {
  GenerationConfig cfg;
  cfg.seed = seed;
  cfg.per_scene_target = 50;
  return cfg;
}

const Corpus& corpus200() {
  static const Corpus c = generate_corpus(synth200(), registry(), config());
  return c;
}

std::map<std::string, const SceneGraph*> scene_map(const std::vector<SceneGraph>& scenes) {
  std::map<std::string, const SceneGraph*> m;
  for (const auto& g : scenes) m[g.scene_id()] = &g;
  return m;
}

QARecord record(const std::string& scene, const std::string& family, Answer a) {
  return {scene, "q", "(exist (scene))", std::move(a), "exist", family, {}};
}

}  // namespace

TEST(Config, Validation) {
  GenerationConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.flatness_cap = 0.5;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg = {};
  cfg.per_scene_target = 0;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg = {};
  cfg.family_weights["x"] = -1;
  EXPECT_THROW(cfg.validate(), DataError);
}

TEST(FlattenCheck, Examples) {
  AnswerHistogram h;
  h.add("f", "yes", 50);
  h.add("f", "no", 50);
  auto r = flatten_check(h, "f");
  EXPECT_DOUBLE_EQ(r.ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.entropy, 1.0);
  EXPECT_EQ(r.support, 2u);

  h.add("g", "3", 90);
  h.add("g", "4", 10);
  EXPECT_DOUBLE_EQ(flatten_check(h, "g").ratio, 9.0);
  EXPECT_THROW(flatten_check(h, "missing"), DataError);
}

TEST(Offer, RespectsCapAgainstLeastAcceptedAnswer) {
  GenerationConfig cfg;
  cfg.flatness_cap = 2.0;
  cfg.tail_fraction = 0.0;
  AnswerHistogram h;
  // Alternate proposals of a and b so both stay in the support; u = 0 passes the
  // proposal-frequency test, leaving only the cap.
  EXPECT_TRUE(h.offer("f", "a", 0.0, cfg));
  EXPECT_TRUE(h.offer("f", "b", 0.0, cfg));
  EXPECT_TRUE(h.offer("f", "a", 0.0, cfg));
  EXPECT_FALSE(h.offer("f", "a", 0.0, cfg));  // 3 > 2 * 1
  EXPECT_EQ(h.count("f", "a"), 2u);
  cfg.flatten = false;
  EXPECT_TRUE(h.offer("f", "a", 0.99, cfg));
}

TEST(Balance, Examples) {
  std::vector<QARecord> rs;
  for (int i = 0; i < 3; ++i) rs.push_back(record("s", "f", Answer::attribute("purple")));
  for (int i = 0; i < 100; ++i) rs.push_back(record("s", "f", Answer::attribute("red")));
  auto out = balance(rs, 100);
  EXPECT_EQ(out.size(), 100u);
  for (const auto& r : out) EXPECT_EQ(r.answer, Answer::attribute("red"));
  EXPECT_EQ(balance(rs, 0), rs);
}

TEST(Balance, PlantedRareAnswerCountingOracle) {
  std::vector<QARecord> rs = corpus200().records;
  Rng rng(3);
  for (int i = 0; i < 19; ++i) {
    auto at = rs.begin() + static_cast<std::ptrdiff_t>(rng.below(rs.size()));
    rs.insert(at, record("scene-00000", "planted", Answer::attribute("planted-value")));
  }
  auto out = balance(rs, 20);
  std::map<std::string, std::size_t> counts;
  for (const auto& r : rs) ++counts[answer_key(r.answer)];
  std::vector<QARecord> expected;
  for (const auto& r : rs)
    if (counts[answer_key(r.answer)] >= 20) expected.push_back(r);
  EXPECT_EQ(out, expected);
  EXPECT_EQ(counts["attribute:planted-value"], 19u);
  for (const auto& r : out) EXPECT_NE(r.family_id, "planted");
}

TEST(Balance, PostConditionAndPerFamilyMode) {
  Rng rng(8);
  std::vector<QARecord> rs;
  for (int i = 0; i < 2000; ++i)
    rs.push_back(record("s", "f" + std::to_string(rng.below(4)), Answer::integer(static_cast<std::int64_t>(rng.below(40)))));
  for (std::size_t t : {10u, 40u, 60u}) {
    auto out = balance(rs, t);
    std::map<std::string, std::size_t> counts;
    for (const auto& r : out) ++counts[answer_key(r.answer)];
    for (const auto& [a, n] : counts) EXPECT_GE(n, t) << a;

    auto pf = balance(rs, t / 4, true);
    std::map<std::pair<std::string, std::string>, std::size_t> fc;
    for (const auto& r : pf) ++fc[{r.family_id, answer_key(r.answer)}];
    for (const auto& [k, n] : fc) EXPECT_GE(n, t / 4);
  }
}

TEST(TrimToCap, KeepsLargestCapRespectingSubset) {
  std::vector<QARecord> rs;
  auto add = [&](const char* a, int n) {
    for (int i = 0; i < n; ++i) rs.push_back(record("s", "f", Answer::attribute(a)));
  };
  add("red", 150);
  add("blue", 60);
  add("green", 1);
  auto out = trim_to_cap(rs, 2.0);
  std::map<std::string, std::size_t> c;
  for (const auto& r : out) ++c[r.answer.text()];
  // m = 60 keeps 120 red + 60 blue = 180, beating m = 1 (2 + 2 + 1) and m = 150.
  EXPECT_EQ(c["red"], 120u);
  EXPECT_EQ(c["blue"], 60u);
  EXPECT_EQ(c.count("green"), 0u);
}

TEST(Split, PartitionsByScene) {
  std::vector<QARecord> rs = {record("a", "f", Answer::boolean(true)), record("b", "f", Answer::boolean(false)),
                              record("a", "g", Answer::boolean(false))};
  auto [train, test] = split(rs, {{"a", Split::train}, {"b", Split::test}});
  ASSERT_EQ(train.size(), 2u);
  ASSERT_EQ(test.size(), 1u);
  EXPECT_EQ(train[1].family_id, "g");
  EXPECT_EQ(test[0].scene_id, "b");
  EXPECT_THROW(split(rs, {{"a", Split::train}}), DataError);
}

TEST(Split, RandomSceneSplitSummationOracle) {
  const auto& c = corpus200();
  std::vector<std::string> ids;
  for (const auto& g : synth200()) ids.push_back(g.scene_id());
  auto s = random_scene_split(ids, 0.12, 5);
  std::size_t n_test_scenes = 0;
  for (const auto& [id, side] : s) n_test_scenes += side == Split::test;
  EXPECT_EQ(n_test_scenes, 24u);
  std::map<std::string, std::size_t> per_scene;
  for (const auto& r : c.records) ++per_scene[r.scene_id];
  std::size_t want_train = 0, want_test = 0;
  for (const auto& [id, n] : per_scene) (s.at(id) == Split::train ? want_train : want_test) += n;
  auto [train, test] = split(c.records, s);
  EXPECT_EQ(train.size(), want_train);
  EXPECT_EQ(test.size(), want_test);
  std::set<std::string> train_ids, test_ids;
  for (const auto& r : train) train_ids.insert(r.scene_id);
  for (const auto& r : test) test_ids.insert(r.scene_id);
  for (const auto& id : train_ids) EXPECT_FALSE(test_ids.count(id));
  EXPECT_EQ(split_from_json(split_to_json(s)), s);
  EXPECT_THROW(split_from_json(Json{{"x", "holdout"}}), DataError);
}

TEST(GenerateForScene, EmptySceneOnlyCountsAndBooleans) {
  SceneGraph empty("empty", {}, {});
  AnswerHistogram h;
  auto cfg = config();
  cfg.flatten = false;
  auto out = generate_for_scene(empty, registry(), cfg, h);
  EXPECT_FALSE(out.records.empty());
  for (const auto& r : out.records) {
    if (r.answer.kind() == Answer::Kind::integer) {
      EXPECT_EQ(r.answer.as_int(), 0);
    } else {
      EXPECT_EQ(r.answer.kind(), Answer::Kind::boolean) << r.program;
    }
    if (r.question_type == "exist") {
      EXPECT_EQ(r.answer, Answer::boolean(false));
    }
  }
}

TEST(GenerateForScene, NoQueriedReferenceToAbsentClass) {
  for (const auto& g : fixtures()) {
    std::set<std::string> present;
    for (const auto& n : g.nodes()) present.insert(n.class_label);
    AnswerHistogram h;
    auto out = generate_for_scene(g, registry(), config(), h);
    EXPECT_FALSE(out.records.empty());
    for (const auto& r : out.records) {
      auto p = parse_program(r.program);
      // Follow plain filter chains below each unique down to the scene.
      visit(p.root, [&](const ProgramNode& n) {
        if (n.fn != Fn::unique) return;
        for (const ProgramNode* c = &n.children[0]; c->fn != Fn::scene; c = &c->children[0]) {
          if (!(c->fn >= Fn::filter_class && c->fn <= Fn::filter_size)) break;
          if (c->fn == Fn::filter_class) {
            EXPECT_TRUE(present.count(c->literal->text)) << g.scene_id() << " " << r.program;
          }
        }
      });
    }
  }
}

TEST(GenerateCorpus, EveryRecordReExecutes) {
  const auto& c = corpus200();
  EXPECT_GT(c.records.size(), 1000u);
  auto bad = validate_records(c.records, {}, scene_map(synth200()));
  EXPECT_TRUE(bad.empty()) << bad.front().where << ": " << bad.front().reason;
}

TEST(GenerateCorpus, SortedByScene) {
  const auto& rs = corpus200().records;
  for (std::size_t i = 1; i < rs.size(); ++i) {
    ASSERT_LE(rs[i - 1].scene_id, rs[i].scene_id);
    if (rs[i - 1].scene_id == rs[i].scene_id) {
      ASSERT_LE(rs[i - 1].family_id, rs[i].family_id);
    }
  }
}

TEST(GenerateCorpus, FlatnessWithinCap) {
  const auto& c = corpus200();
  const double cap = config().flatness_cap;
  auto hist = AnswerHistogram::from_records(c.records);
  std::size_t checked = 0;
  for (const auto& [family, counts] : hist.families()) {
    auto rep = flatten_check(hist, family);
    if (rep.total < 20 * rep.support) continue;
    ++checked;
    EXPECT_LE(rep.ratio, cap) << family;
  }
  EXPECT_GT(checked, 0u);
}

TEST(GenerateCorpus, BalanceThresholdHolds) {
  const auto& c = corpus200();
  std::map<std::string, std::size_t> counts;
  for (const auto& r : c.records) ++counts[answer_key(r.answer)];
  for (const auto& [a, n] : counts) EXPECT_GE(n, config().balance_threshold) << a;
}

TEST(GenerateCorpus, NoExcludedClasses) {
  for (const auto& r : corpus200().records)
    for (const auto& [slot, value] : r.binding) EXPECT_FALSE(taxonomy().excluded_classes.count(value)) << r.question;
}

TEST(GenerateCorpus, DeterministicAcrossThreadCounts) {
  std::vector<SceneGraph> scenes(synth200().begin(), synth200().begin() + 60);
  auto one = generate_corpus(scenes, registry(), config(7), 1);
  auto four = generate_corpus(scenes, registry(), config(7), 4);
  EXPECT_EQ(one.records, four.records);
  std::reverse(scenes.begin(), scenes.end());
  EXPECT_EQ(generate_corpus(scenes, registry(), config(7), 3).records, one.records);
  EXPECT_NE(generate_corpus(scenes, registry(), config(8), 1).records, one.records);
}

TEST(GenerateCorpus, DuplicateSceneIdsRejected) {
  auto f = fixtures();
  f.push_back(f.front());
  EXPECT_THROW(generate_corpus(f, registry(), config()), DataError);
}

TEST(Records, FileRoundTripAndTamperDetection) {
  auto f = fixtures();
  auto c = generate_corpus(f, registry(), [] {
    auto cfg = config();
    cfg.balance_threshold = 0;
    return cfg;
  }());
  ASSERT_GT(c.records.size(), 10u);
  auto path = std::filesystem::temp_directory_path() / "sgqa_records_test.jsonl";
  {
    std::ofstream out(path);
    write_records(out, c.records, header_line("records", 42, config().to_json()));
  }
  auto loaded = load_records_file(path);
  EXPECT_EQ(loaded.records, c.records);
  EXPECT_EQ(loaded.where[0], path.string() + ":2");
  EXPECT_TRUE(validate_records(loaded.records, loaded.where, scene_map(f)).empty());

  loaded.records[4].answer = loaded.records[4].answer.kind() == Answer::Kind::integer ? Answer::integer(99) : Answer::attribute("x");
  loaded.records[7].scene_id = "nowhere";
  auto bad = validate_records(loaded.records, loaded.where, scene_map(f));
  ASSERT_EQ(bad.size(), 2u);
  EXPECT_EQ(bad[0].where, path.string() + ":6");
  EXPECT_EQ(bad[1].where, path.string() + ":9");
  std::filesystem::remove(path);
}

TEST(Records, JsonFieldsExact) {
  auto j = corpus200().records.front().to_json();
  std::set<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.insert(k);
  EXPECT_EQ(keys, (std::set<std::string>{"scene_id", "question", "program", "answer", "question_type", "family_id", "binding"}));
  EXPECT_THROW(QARecord::from_json(Json{{"scene_id", 1}}), DataError);
}
