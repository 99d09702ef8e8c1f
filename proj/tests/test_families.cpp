#include <gtest/gtest.h>

#include "sgqa/sgqa.hpp"

using namespace sgqa;

namespace {

const Taxonomy& taxonomy() {
  static const Taxonomy t = load_taxonomy_file(std::string(SGQA_DATA_DIR) + "/taxonomy.json");
  return t;
}

const FamilyRegistry& shipped() {
  static const FamilyRegistry r = load_families_file(std::string(SGQA_DATA_DIR) + "/families.json", taxonomy());
  return r;
}

Json count_family() {
  return Json::parse(R"json({
    "family_id": "count_cmo", "question_type": "count",
    "templates": ["How many <C> <M> <O> are there?"],
    "skeleton": "(count (filter_material (filter_color (filter_class (scene) O) C) M))",
    "slots": [{"name": "C", "kind": "C"}, {"name": "M", "kind": "M", "optional": true}, {"name": "O", "kind": "O"}]
  })json");
}

std::string load_error(const Json& family) {
  try {
    load_families(Json::array({family}), taxonomy());
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

SceneGraph fixture_a() {
  for (auto& g : load_scene_file(std::string(SGQA_SAMPLES_DIR) + "/fixture_scenes.jsonl"))
    if (g.scene_id() == "fixture-a") return g;
  throw std::runtime_error("no fixture-a");
}

}  // namespace

TEST(LoadFamilies, CountFamily) {
  auto r = load_families(Json::array({count_family()}), taxonomy());
  ASSERT_EQ(r.size(), 1u);
  ASSERT_NE(r.find("count_cmo"), nullptr);
  EXPECT_EQ(r.find("count_cmo")->question_type, "count");
  EXPECT_EQ(r.of_type("count").size(), 1u);
}

TEST(LoadFamilies, UndeclaredPlaceholderNamed) {
  Json f = count_family();
  f["templates"] = {"How many <C> <M> <O> are <R2> there?"};
  EXPECT_NE(load_error(f).find("R2"), std::string::npos);
}

TEST(LoadFamilies, Rejections) {
  Json bad_type = count_family();
  bad_type["skeleton"] = "(count (unique (filter_class (scene) O)))";
  bad_type["slots"] = {{{"name", "O"}, {"kind", "O"}}};
  bad_type["templates"] = {"How many <O>?"};
  EXPECT_NE(load_error(bad_type).find("type error"), std::string::npos);

  Json wrong_kind = count_family();
  wrong_kind["slots"][0]["kind"] = "S";
  EXPECT_NE(load_error(wrong_kind).find("slot C"), std::string::npos);

  Json unused = count_family();
  unused["slots"].push_back({{"name", "Z"}, {"kind", "Z"}});
  EXPECT_FALSE(load_error(unused).empty());

  EXPECT_THROW(load_families(Json::array({count_family(), count_family()}), taxonomy()), DataError);
}

TEST(LoadFamilies, ShippedRegistry) {
  const auto& r = shipped();
  EXPECT_EQ(r.size(), 90u);
  EXPECT_GE(r.mean_slot_count(), 3.5);
  EXPECT_LE(r.mean_slot_count(), 4.5);
  // Every answer-producing root function is covered by some family.
  std::set<std::string> roots;
  for (const auto& f : r.families()) roots.insert(std::string(function_name(f.skeleton.root.fn)));
  for (const char* fn : {"count", "exist", "query_color", "query_material", "query_shape", "query_size", "query_class",
                         "equal_integer", "greater_than", "less_than", "equal_color", "equal_material", "equal_shape",
                         "equal_size"})
    EXPECT_TRUE(roots.count(fn)) << fn;
}

TEST(Instantiate, PaperExample) {
  auto r = load_families(Json::array({count_family()}), taxonomy());
  auto inst = instantiate(*r.find("count_cmo"), {{"C", "white"}, {"M", "wooden"}, {"O", "table"}}, taxonomy());
  EXPECT_EQ(inst.question, "How many white wooden table are there?");
  EXPECT_EQ(render(inst.program), R"((count (filter_material (filter_color (filter_class (scene) "table") "white") "wooden")))");
}

TEST(Instantiate, OptionalSlotElided) {
  auto r = load_families(Json::array({count_family()}), taxonomy());
  auto inst = instantiate(*r.find("count_cmo"), {{"C", "white"}, {"O", "table"}}, taxonomy());
  EXPECT_EQ(inst.question, "How many white table are there?");
  EXPECT_EQ(render(inst.program), R"((count (filter_color (filter_class (scene) "table") "white")))");
}

TEST(Instantiate, Errors) {
  auto r = load_families(Json::array({count_family()}), taxonomy());
  const auto& f = *r.find("count_cmo");
  EXPECT_THROW(instantiate(f, {{"C", "white"}}, taxonomy()), DataError);                              // O unbound
  EXPECT_THROW(instantiate(f, {{"C", "chair"}, {"O", "table"}}, taxonomy()), DataError);              // not a color
  EXPECT_THROW(instantiate(f, {{"C", "white"}, {"O", "table"}, {"X", "red"}}, taxonomy()), DataError);  // undeclared
}

TEST(Instantiate, MatchesHandWrittenProgram) {
  auto r = load_families(Json::array({count_family()}), taxonomy());
  const auto g = fixture_a();
  auto inst = instantiate(*r.find("count_cmo"), {{"C", "brown"}, {"M", "wooden"}, {"O", "chair"}}, taxonomy());
  auto hand = parse_program(R"((count (filter_material (filter_color (filter_class (scene) "chair") "brown") "wooden")))");
  EXPECT_EQ(execute(inst.program, g), execute(hand, g));
  EXPECT_EQ(describe(execute(inst.program, g)), "Integer 1");
}

TEST(Instantiate, AllFamiliesTypecheckUnderRandomBindings) {
  const auto& r = shipped();
  GenerationConfig cfg;
  Rng rng(2024);
  for (const auto& f : r.families()) {
    for (int i = 0; i < 1000; ++i) {
      Binding b = sample_binding(f, taxonomy(), cfg, rng);
      auto inst = instantiate(f, b, taxonomy(), rng.below(f.templates.size()));
      ASSERT_NO_THROW(typecheck(inst.program)) << f.family_id << ": " << render(inst.program);
      ASSERT_EQ(inst.question.find_first_of("<>"), std::string::npos) << inst.question;
      for (std::size_t k = 1; k < inst.question.size(); ++k)
        ASSERT_FALSE(inst.question[k] == ' ' && inst.question[k - 1] == ' ') << inst.question;
    }
  }
}

TEST(Instantiate, SubstitutionIsLocal) {
  const auto& r = shipped();
  GenerationConfig cfg;
  cfg.optional_slot_probability = 1.0;
  Rng rng(31);
  for (const auto& f : r.families()) {
    for (int i = 0; i < 20; ++i) {
      Binding a = sample_binding(f, taxonomy(), cfg, rng);
      const SlotSpec& s = f.slots[rng.below(f.slots.size())];
      const auto& vocab = vocabulary(taxonomy(), literal_kind_of(s.kind));
      Binding b = a;
      b[s.name] = vocab[rng.below(vocab.size())];
      const std::string& text = f.templates[0];
      // Reconstruct b's text from a's by splicing only at s's placeholder sites.
      std::string expected;
      std::size_t pos = 0;
      while (pos < text.size()) {
        std::size_t open = text.find('<', pos);
        if (open == std::string::npos) {
          expected += text.substr(pos);
          break;
        }
        std::size_t close = text.find('>', open);
        expected += text.substr(pos, open - pos);
        std::string name = text.substr(open + 1, close - open - 1);
        expected += (name == s.name ? b : a).at(name);
        pos = close + 1;
      }
      EXPECT_EQ(instantiate(f, b, taxonomy()).question, expected) << f.family_id;
    }
  }
}

TEST(Instantiate, PureAndDeterministic) {
  const auto& f = shipped().families().front();
  Binding b = {{"C", "red"}, {"M", "metal"}, {"O", "chair"}};
  auto x = instantiate(f, b, taxonomy());
  auto y = instantiate(f, b, taxonomy());
  EXPECT_EQ(x.question, y.question);
  EXPECT_EQ(x.program, y.program);
}

TEST(FamilyJson, RoundTrip) {
  for (const auto& f : shipped().families()) {
    QuestionFamily g = family_from_json(family_to_json(f));
    EXPECT_EQ(g.family_id, f.family_id);
    EXPECT_EQ(g.templates, f.templates);
    EXPECT_EQ(g.skeleton, f.skeleton);
    ASSERT_EQ(g.slots.size(), f.slots.size());
  }
}
