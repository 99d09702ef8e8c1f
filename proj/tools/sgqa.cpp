// sgqa: scene-graph question generation, auditing and kernel checks.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sgqa/sgqa.hpp"

#ifndef SGQA_DATA_DIR
#define SGQA_DATA_DIR "data"
#endif

namespace {

using namespace sgqa;

/// Thrown for flag combinations CLI11 cannot express; exits with status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string scenes, taxonomy = SGQA_DATA_DIR "/taxonomy.json", families = SGQA_DATA_DIR "/families.json";
  std::string split, out, summary, records, scene, program, dims = "5,7,16", op = "all", corrupt;
  std::uint64_t seed = 0;
  std::size_t per_scene = 50, balance_threshold = 20, count = 200, min_objects = 6, max_objects = 14;
  double flatness_cap = 2.0, h = 1e-5, tol = 1e-4, test_fraction = 0.5;
  unsigned threads = 1;
  bool no_flatten = false, balance_per_family = false;
};

/// Writes to --out when given, else standard output.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_.open(path, std::ios::binary);
    if (!file_) throw DataError("cannot open output file: " + path);
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<SceneGraph> load_checked_scenes(const std::string& path, const Taxonomy& t) {
  std::vector<SceneGraph> scenes;
  const Taxonomy identity = t.identity();
  for (const SceneGraph& g : load_scene_file(path)) {
    try {
      scenes.push_back(normalize(g, identity));
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what() + " (run normalize first)");
    }
  }
  return scenes;
}

std::map<std::string, const SceneGraph*> index_scenes(const std::vector<SceneGraph>& scenes) {
  std::map<std::string, const SceneGraph*> m;
  for (const auto& g : scenes) m[g.scene_id()] = &g;
  return m;
}

int cmd_normalize(const Flags& f) {
  const Taxonomy t = load_taxonomy_file(f.taxonomy);
  std::vector<SceneGraph> out;
  for (const SceneGraph& g : load_scene_file(f.scenes)) out.push_back(normalize(g, t));
  Output o(f.out);
  o.stream() << header_line("scenes", f.seed, {{"taxonomy", digest(t.to_json())}}) << '\n';
  for (const auto& g : out) o.stream() << scene_to_json(g).dump() << '\n';
  return 0;
}

int cmd_synth(const Flags& f) {
  const Taxonomy t = load_taxonomy_file(f.taxonomy);
  if (f.min_objects > f.max_objects) throw UsageError("--min-objects exceeds --max-objects");
  const auto scenes = synth_scenes(f.seed, f.count, f.min_objects, f.max_objects, t);
  const Json config{{"count", f.count}, {"min_objects", f.min_objects}, {"max_objects", f.max_objects},
                    {"taxonomy", digest(t.to_json())}};
  Output o(f.out);
  o.stream() << header_line("scenes", f.seed, config) << '\n';
  for (const auto& g : scenes) o.stream() << scene_to_json(g).dump() << '\n';
  return 0;
}

int cmd_generate(const Flags& f) {
  const Taxonomy t = load_taxonomy_file(f.taxonomy);
  const FamilyRegistry registry = load_families_file(f.families, t);
  const auto scenes = load_checked_scenes(f.scenes, t);
  GenerationConfig cfg;
  cfg.seed = f.seed;
  cfg.per_scene_target = f.per_scene;
  cfg.flatness_cap = f.flatness_cap;
  cfg.balance_threshold = f.balance_threshold;
  cfg.balance_per_family = f.balance_per_family;
  cfg.flatten = !f.no_flatten;
  cfg.validate();
  const Corpus corpus = generate_corpus(scenes, registry, cfg, f.threads);

  Json families = Json::array();
  for (const auto& fam : registry.families()) families.push_back(family_to_json(fam));
  const Json config{{"generation", cfg.to_json()}, {"taxonomy", digest(t.to_json())}, {"families", digest(families)}};
  {
    Output o(f.out);
    write_records(o.stream(), corpus.records, header_line("qa_records", f.seed, config));
  }
  if (!f.summary.empty()) {
    Output s(f.summary);
    s.stream() << header_line("generation_summary", f.seed, config) << '\n' << corpus.summary.to_json().dump() << '\n';
  }
  if (!f.out.empty()) std::cout << corpus.summary.to_json().dump() << '\n';
  return 0;
}

int cmd_execute(const Flags& f) {
  const auto scenes = load_scene_file(f.scenes);
  const SceneGraph* g = nullptr;
  if (f.scene.empty()) {
    if (scenes.size() != 1) throw UsageError("--scene is required when the file holds " + std::to_string(scenes.size()) + " scenes");
    g = &scenes.front();
  } else {
    for (const auto& s : scenes)
      if (s.scene_id() == f.scene) g = &s;
    if (!g) throw DataError(f.scenes + ": no scene '" + f.scene + "'");
  }
  QuestionProgram p = parse_program(f.program);
  typecheck(p);
  std::cout << describe(execute(p, *g)) << '\n';
  return 0;
}

int cmd_stats(const Flags& f) {
  const RecordFile records = load_records_file(f.records);
  const auto scenes = load_scene_file(f.scenes);
  const StatsReport report = compute_stats(records.records, scenes);
  Output o(f.out);
  o.stream() << header_line("stats", f.seed, {{"records", f.records}, {"scenes", f.scenes}}) << '\n'
             << report.to_json().dump() << '\n';
  return 0;
}

int cmd_baseline(const Flags& f) {
  const RecordFile records = load_records_file(f.records);
  SceneSplit scene_split;
  if (!f.split.empty()) {
    auto docs = read_documents(f.split);
    if (docs.size() != 1) throw DataError(f.split + ": expected one split document");
    scene_split = split_from_json(docs.front().value);
  } else {
    std::set<std::string> ids;
    for (const auto& r : records.records) ids.insert(r.scene_id);
    scene_split = random_scene_split({ids.begin(), ids.end()}, f.test_fraction, f.seed);
  }
  const auto [train, test] = split(records.records, scene_split);
  const BaselineReport report = blind_baseline(train, test);
  const Json config{{"records", f.records}, {"split", f.split.empty() ? Json(f.test_fraction) : Json(f.split)}};
  Output o(f.out);
  o.stream() << header_line("baseline", f.seed, config) << '\n' << report.to_json().dump() << '\n';
  return 0;
}

int cmd_validate(const Flags& f) {
  const RecordFile records = load_records_file(f.records);
  const auto scenes = load_scene_file(f.scenes);
  const auto bad = validate_records(records.records, records.where, index_scenes(scenes));
  for (const auto& m : bad) std::cerr << m.where << ": " << m.reason << '\n';
  std::cout << (bad.empty() ? "ok" : "FAILED") << ": " << records.records.size() - bad.size() << "/"
            << records.records.size() << " records match\n";
  return bad.empty() ? 0 : 1;
}

kernels::KernelDims parse_dims(const std::string& text) {
  std::vector<std::size_t> v;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ',');) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoul(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--dims expects m,l,d as positive integers, got '" + text + "'");
    }
  }
  if (v.size() != 3) throw UsageError("--dims expects m,l,d, got '" + text + "'");
  kernels::KernelDims d;
  d.objects = v[0];
  d.tokens = v[1];
  d.width = v[2];
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return d;
}

int cmd_kernel_check(const Flags& f) {
  kernels::GradCheckOptions opt;
  opt.seed = f.seed;
  opt.dims = parse_dims(f.dims);
  opt.h = f.h;
  opt.tol = f.tol;
  opt.corrupt = f.corrupt;
  std::vector<std::string> ops;
  if (f.op == "all")
    ops = f.corrupt.empty() ? kernels::grad_check_ops() : std::vector<std::string>{"pipeline"};
  else
    ops = {f.op};
  int failed = 0;
  for (const auto& op : ops) {
    kernels::GradCheckOptions o = opt;
    // Central differences are exact on a linear map, so a wide step only
    // removes rounding noise and the tolerance can be tight.
    if (op == "positional_linear") {
      o.tol = std::min(o.tol, 1e-8);
      o.h = std::max(o.h, 1e-3);
    }
    kernels::GradCheckReport r;
    try {
      r = kernels::grad_check(op, o);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    Json j = r.to_json();
    j["tol"] = o.tol;
    j["h"] = o.h;
    std::cout << j.dump() << '\n';
    failed += r.passed ? 0 : 1;
  }
  std::cout << "kernel-check: " << ops.size() - failed << "/" << ops.size() << " passed\n";
  return failed ? 1 : 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Scene-graph question generation and auditing"};
  app.set_help_flag("--help", "Print this help message and exit");  // -h would clash with the step flag --h
  app.require_subcommand(1);
  Flags f;

  auto taxonomy = [&](CLI::App* c) { c->add_option("--taxonomy", f.taxonomy, "Taxonomy file")->check(CLI::ExistingFile); };
  auto scenes = [&](CLI::App* c) { c->add_option("--scenes", f.scenes, "Scene file")->required()->check(CLI::ExistingFile); };
  auto out = [&](CLI::App* c) { c->add_option("--out", f.out, "Output file (default: standard output)"); };
  auto seed = [&](CLI::App* c) { c->add_option("--seed", f.seed, "Random seed"); };
  auto records = [&](CLI::App* c) { c->add_option("records", f.records, "Record file")->required()->check(CLI::ExistingFile); };

  auto* normalize = app.add_subcommand("normalize", "Remap classes and drop excluded objects");
  scenes(normalize), taxonomy(normalize), out(normalize), seed(normalize);

  auto* synth = app.add_subcommand("synth", "Write synthetic fixture scenes");
  taxonomy(synth), out(synth), seed(synth);
  synth->add_option("--count", f.count, "Number of scenes");
  synth->add_option("--min-objects", f.min_objects, "Fewest objects per scene");
  synth->add_option("--max-objects", f.max_objects, "Most objects per scene");

  auto* generate = app.add_subcommand("generate", "Generate question-answer records");
  scenes(generate), taxonomy(generate), out(generate), seed(generate);
  generate->add_option("--families", f.families, "Question family file")->check(CLI::ExistingFile);
  generate->add_option("--per-scene", f.per_scene, "Target records per scene")->check(CLI::PositiveNumber);
  generate->add_option("--flatness-cap", f.flatness_cap, "Max/min answer count ratio per family")->check(CLI::Range(1.0, 1e9));
  generate->add_option("--balance-threshold", f.balance_threshold, "Drop answers rarer than this");
  generate->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
  generate->add_option("--summary", f.summary, "Also write the generation summary here");
  generate->add_flag("--no-flatten", f.no_flatten, "Accept every non-degenerate proposal");
  generate->add_flag("--balance-per-family", f.balance_per_family, "Count answers per family when balancing");

  auto* execute = app.add_subcommand("execute", "Run one program against a scene");
  scenes(execute);
  execute->add_option("--scene", f.scene, "Scene id (optional for single-scene files)");
  execute->add_option("--program", f.program, "Program text")->required();

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  records(stats), scenes(stats), out(stats), seed(stats);

  auto* baseline = app.add_subcommand("baseline", "Blind per-family majority baseline");
  records(baseline), out(baseline), seed(baseline);
  baseline->add_option("--split", f.split, "Scene split file; default is a seeded random split")->check(CLI::ExistingFile);
  baseline->add_option("--test-fraction", f.test_fraction, "Test share of scenes for the random split")->check(CLI::Range(0.0, 1.0));

  auto* validate = app.add_subcommand("validate", "Re-execute every record and compare answers");
  records(validate), scenes(validate);

  auto* kernel = app.add_subcommand("kernel-check", "Finite-difference gradient checks of the attention kernels");
  seed(kernel);
  kernel->add_option("--dims", f.dims, "Objects, language tokens and width as m,l,d");
  kernel->add_option("--h,--step", f.h, "Finite-difference step")->check(CLI::PositiveNumber);
  kernel->add_option("--tol", f.tol, "Relative error tolerance")->check(CLI::PositiveNumber);
  kernel->add_option("--op", f.op, "Operation to check, or all");
  kernel->add_option("--corrupt", f.corrupt, "Scale this variable's analytic gradient by 1.1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*normalize) return cmd_normalize(f);
  if (*synth) return cmd_synth(f);
  if (*generate) return cmd_generate(f);
  if (*execute) return cmd_execute(f);
  if (*stats) return cmd_stats(f);
  if (*baseline) return cmd_baseline(f);
  if (*validate) return cmd_validate(f);
  return cmd_kernel_check(f);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
