#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgqa/sgqa.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sgqa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  Outcome run(const std::string& args) const {
    const fs::path out = path("stdout"), err = path("stderr");
    const std::string cmd = std::string(SGQA_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
  }

  static std::string fixtures() { return std::string(SGQA_SAMPLES_DIR) + "/fixture_scenes.jsonl"; }

  fs::path dir_;
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

bool is_header(const std::string& line, const std::string& kind) {
  auto j = sgqa::Json::parse(line);
  return j.contains("sgqa_header") && j["sgqa_header"]["kind"] == kind;
}

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help").status, 0);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("generate --bogus").status, 2);
  EXPECT_EQ(run("execute --scenes " + fixtures()).status, 2);  // --program missing
  EXPECT_EQ(run("kernel-check --op nope").status, 2);
  EXPECT_EQ(run("kernel-check --dims 5,7").status, 2);
}

TEST_F(Cli, ExecuteCountsChairs) {
  Outcome r = run("execute --scenes " + fixtures() + " --scene fixture-a --program '(count (filter_class (scene) \"chair\"))'");
  EXPECT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(r.out, "Integer 3\n");
  Outcome deg = run("execute --scenes " + fixtures() + " --scene fixture-b --program '(query_color (unique (filter_class (scene) \"pillow\")))'");
  EXPECT_EQ(deg.status, 0);
  EXPECT_EQ(deg.out, "Degenerate non-unique-reference\n");
}

TEST_F(Cli, ExecuteDataErrors) {
  Outcome missing = run("execute --scenes " + fixtures() + " --scene nowhere --program '(count (scene))'");
  EXPECT_EQ(missing.status, 1);
  EXPECT_NE(missing.err.find("nowhere"), std::string::npos);
  Outcome ambiguous = run("execute --scenes " + fixtures() + " --program '(count (scene))'");
  EXPECT_NE(ambiguous.status, 0);
  Outcome parse = run("execute --scenes " + fixtures() + " --scene fixture-a --program '(count (scene) (scene))'");
  EXPECT_EQ(parse.status, 1);
  EXPECT_NE(parse.err.find("offset 15"), std::string::npos) << parse.err;
  Outcome type = run("execute --scenes " + fixtures() + " --scene fixture-a --program '(count (unique (scene)))'");
  EXPECT_EQ(type.status, 1);
  EXPECT_NE(type.err.find("ObjectRef"), std::string::npos) << type.err;
}

TEST_F(Cli, GenerateIsDeterministicWithHeader) {
  const std::string base = "generate --scenes " + fixtures() + " --seed 42 --per-scene 30 --balance-threshold 0 --out ";
  ASSERT_EQ(run(base + path("a.jsonl").string()).status, 0);
  ASSERT_EQ(run(base + path("b.jsonl").string() + " --threads 2").status, 0);
  const std::string a = slurp(path("a.jsonl"));
  EXPECT_EQ(a, slurp(path("b.jsonl")));
  auto ls = lines(a);
  ASSERT_GT(ls.size(), 10u);
  EXPECT_TRUE(is_header(ls[0], "qa_records"));
  EXPECT_EQ(sgqa::Json::parse(ls[0])["sgqa_header"]["seed"], 42);

  ASSERT_EQ(run("generate --scenes " + fixtures() + " --seed 43 --per-scene 30 --balance-threshold 0 --out " + path("c.jsonl").string()).status, 0);
  EXPECT_NE(slurp(path("c.jsonl")), a);
}

TEST_F(Cli, ValidateReportsTamperedLine) {
  ASSERT_EQ(run("generate --scenes " + fixtures() + " --seed 1 --balance-threshold 0 --out " + path("r.jsonl").string()).status, 0);
  Outcome ok = run("validate " + path("r.jsonl").string() + " --scenes " + fixtures());
  EXPECT_EQ(ok.status, 0) << ok.err;

  auto ls = lines(slurp(path("r.jsonl")));
  ASSERT_GT(ls.size(), 4u);
  auto j = sgqa::Json::parse(ls[3]);
  j["answer"] = {{"type", "integer"}, {"value", 987}};
  ls[3] = j.dump();
  {
    std::ofstream out(path("t.jsonl"));
    for (const auto& l : ls) out << l << '\n';
  }
  Outcome bad = run("validate " + path("t.jsonl").string() + " --scenes " + fixtures());
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.err.find(path("t.jsonl").string() + ":4"), std::string::npos) << bad.err;
}

TEST_F(Cli, StatsAndBaseline) {
  ASSERT_EQ(run("generate --scenes " + fixtures() + " --seed 5 --balance-threshold 0 --out " + path("r.jsonl").string()).status, 0);
  Outcome s = run("stats " + path("r.jsonl").string() + " --scenes " + fixtures());
  ASSERT_EQ(s.status, 0) << s.err;
  auto ls = lines(s.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_TRUE(is_header(ls[0], "stats"));
  auto report = sgqa::Json::parse(ls[1]);
  EXPECT_EQ(report["total_scenes"], 2);
  EXPECT_EQ(report["vocab_counts"]["object"], 6);

  {
    std::ofstream split(path("split.json"));
    split << R"({"fixture-a": "train", "fixture-b": "test"})";
  }
  Outcome b = run("baseline " + path("r.jsonl").string() + " --split " + path("split.json").string());
  ASSERT_EQ(b.status, 0) << b.err;
  auto bl = lines(b.out);
  ASSERT_EQ(bl.size(), 2u);
  EXPECT_TRUE(is_header(bl[0], "baseline"));
  double acc = sgqa::Json::parse(bl[1])["overall"]["accuracy"];
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
}

TEST_F(Cli, SynthAndNormalize) {
  ASSERT_EQ(run("synth --seed 3 --count 4 --out " + path("s.jsonl").string()).status, 0);
  auto scenes = sgqa::load_scene_file(path("s.jsonl"));
  EXPECT_EQ(scenes.size(), 4u);
  EXPECT_TRUE(is_header(lines(slurp(path("s.jsonl")))[0], "scenes"));

  Outcome n = run("normalize --scenes " + std::string(SGQA_SAMPLES_DIR) + "/raw_scene.json --out " + path("n.jsonl").string());
  ASSERT_EQ(n.status, 0) << n.err;
  auto g = sgqa::load_scene_file(path("n.jsonl")).at(0);
  std::set<std::string> classes;
  for (const auto& o : g.nodes()) classes.insert(o.class_label);
  EXPECT_TRUE(classes.count("sofa"));
  EXPECT_FALSE(classes.count("couch"));
  EXPECT_FALSE(classes.count("floor"));
}

TEST_F(Cli, KernelCheck) {
  Outcome lin = run("kernel-check --op positional_linear --seed 1");
  EXPECT_EQ(lin.status, 0) << lin.out;
  EXPECT_NE(lin.out.find("1/1 passed"), std::string::npos) << lin.out;
  Outcome bad = run("kernel-check --dims 3,4,8 --corrupt twinning.0.w3");
  EXPECT_EQ(bad.status, 1) << bad.out;
  EXPECT_NE(bad.out.find("0/1 passed"), std::string::npos) << bad.out;
}
