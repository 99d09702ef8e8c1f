#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "sgqa/families.hpp"
#include "sgqa/interpreter.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa {

struct GenerationConfig {
  std::uint64_t seed = 0;
  std::size_t per_scene_target = 50;
  /// Scene attempt budget is this times per_scene_target.
  std::size_t max_attempts_per_question = 100;
  /// Largest allowed max/min ratio of nonzero answer counts within a family.
  double flatness_cap = 2.0;
  std::size_t balance_threshold = 20;
  bool balance_per_family = false;
  std::map<std::string, double> family_weights;
  /// Off: every non-degenerate proposal is accepted and nothing is trimmed.
  bool flatten = true;
  std::int64_t max_count_answer = 10;
  double optional_slot_probability = 0.5;
  /// Chance that a slot value is drawn from values present in the scene
  /// rather than from the whole vocabulary.
  double grounded_slot_probability = 0.8;
  /// Answers proposed less often than this fraction of a family's most
  /// frequent answer are kept out of its support.
  double tail_fraction = 0.05;

  std::size_t attempt_budget() const { return max_attempts_per_question * per_scene_target; }

  void validate() const {
    if (per_scene_target == 0) throw DataError("config: per_scene_target must be positive");
    if (max_attempts_per_question == 0) throw DataError("config: max_attempts_per_question must be positive");
    if (!(flatness_cap >= 1.0)) throw DataError("config: flatness_cap must be >= 1");
    if (optional_slot_probability < 0 || optional_slot_probability > 1)
      throw DataError("config: optional_slot_probability must be in [0, 1]");
    if (grounded_slot_probability < 0 || grounded_slot_probability > 1)
      throw DataError("config: grounded_slot_probability must be in [0, 1]");
    if (tail_fraction < 0 || tail_fraction > 1) throw DataError("config: tail_fraction must be in [0, 1]");
    for (const auto& [id, w] : family_weights)
      if (!(w >= 0) || !std::isfinite(w)) throw DataError("config: bad weight for family " + id);
  }

  Json to_json() const {
    return {{"seed", seed},
            {"per_scene_target", per_scene_target},
            {"max_attempts_per_question", max_attempts_per_question},
            {"flatness_cap", flatness_cap},
            {"balance_threshold", balance_threshold},
            {"balance_per_family", balance_per_family},
            {"family_weights", family_weights},
            {"flatten", flatten},
            {"max_count_answer", max_count_answer},
            {"optional_slot_probability", optional_slot_probability},
            {"grounded_slot_probability", grounded_slot_probability},
            {"tail_fraction", tail_fraction}};
  }
};

struct QARecord {
  std::string scene_id;
  std::string question;
  std::string program;
  Answer answer = Answer::boolean(false);
  std::string question_type;
  std::string family_id;
  Binding binding;

  Json to_json() const {
    return {{"scene_id", scene_id}, {"question", question},           {"program", program},
            {"answer", answer.to_json()}, {"question_type", question_type}, {"family_id", family_id},
            {"binding", binding}};
  }

  static QARecord from_json(const Json& j) {
    QARecord r;
    try {
      r.scene_id = j.at("scene_id").get<std::string>();
      r.question = j.at("question").get<std::string>();
      r.program = j.at("program").get<std::string>();
      r.answer = Answer::from_json(j.at("answer"));
      r.question_type = j.at("question_type").get<std::string>();
      r.family_id = j.at("family_id").get<std::string>();
      r.binding = j.at("binding").get<Binding>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed record: ") + e.what());
    }
    return r;
  }

  bool operator==(const QARecord&) const = default;
};

/// Key used when counting answers globally; a family's answers share a kind.
inline std::string answer_key(const Answer& a) { return std::string(Answer::kind_name(a.kind())) + ":" + a.text(); }

// ---------------------------------------------------------------------------
// Answer histogram and online rejection

struct FlatnessReport {
  std::string family_id;
  std::size_t total = 0;
  std::size_t support = 0;  // answers with nonzero count
  double ratio = 1.0;       // max / min nonzero count
  double entropy = 1.0;     // Shannon entropy over the support / ln(support); 1 when support is 1
};

/// Running per-family answer counts. `accepted` matches emitted records;
/// `proposed` counts every non-degenerate candidate and drives the rejection
/// probabilities.
class AnswerHistogram {
 public:
  struct Counts {
    std::map<std::string, std::size_t> accepted;
    std::map<std::string, std::size_t> proposed;
  };

  void add(const std::string& family, const std::string& answer, std::size_t n = 1) {
    families_[family].accepted[answer] += n;
  }

  std::size_t count(const std::string& family, const std::string& answer) const {
    auto f = families_.find(family);
    if (f == families_.end()) return 0;
    auto a = f->second.accepted.find(answer);
    return a == f->second.accepted.end() ? 0 : a->second;
  }

  const std::map<std::string, Counts>& families() const { return families_; }

  /// Records a proposal and decides whether to accept it. `u` is a uniform
  /// draw in [0, 1) owned by the candidate, so decisions replay exactly.
  ///
  /// The support is every answer whose proposal count reaches tail_fraction
  /// of the family's most proposed answer. A supported answer is accepted
  /// with probability min_proposed / proposed(answer), which flattens the
  /// accepted distribution toward uniform, and only while its accepted count
  /// stays within flatness_cap of the least accepted supported answer.
  bool offer(const std::string& family, const std::string& answer, double u, const GenerationConfig& cfg) {
    Counts& c = families_[family];
    std::size_t& proposed = ++c.proposed[answer];
    if (!cfg.flatten) {
      ++c.accepted[answer];
      return true;
    }
    std::size_t max_proposed = 0;
    for (const auto& [a, n] : c.proposed) max_proposed = std::max(max_proposed, n);
    const double floor = cfg.tail_fraction * static_cast<double>(max_proposed);
    if (static_cast<double>(proposed) < floor) return false;

    std::size_t min_proposed = SIZE_MAX;
    std::size_t min_accepted = SIZE_MAX;
    for (const auto& [a, n] : c.proposed) {
      if (static_cast<double>(n) < floor) continue;
      min_proposed = std::min(min_proposed, n);
      auto it = c.accepted.find(a);
      min_accepted = std::min(min_accepted, it == c.accepted.end() ? std::size_t{0} : it->second);
    }
    if (u * static_cast<double>(proposed) >= static_cast<double>(min_proposed)) return false;
    std::size_t& accepted = c.accepted[answer];
    if (static_cast<double>(accepted + 1) > cfg.flatness_cap * static_cast<double>(std::max<std::size_t>(1, min_accepted)))
      return false;
    ++accepted;
    return true;
  }

  static AnswerHistogram from_records(const std::vector<QARecord>& records) {
    AnswerHistogram h;
    for (const auto& r : records) h.add(r.family_id, r.answer.text());
    return h;
  }

 private:
  std::map<std::string, Counts> families_;
};

inline FlatnessReport flatten_check(const AnswerHistogram& hist, const std::string& family_id) {
  auto it = hist.families().find(family_id);
  if (it == hist.families().end()) throw DataError("flatten_check: unknown family '" + family_id + "'");
  FlatnessReport r;
  r.family_id = family_id;
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [a, n] : it->second.accepted) {
    if (n == 0) continue;
    r.total += n;
    ++r.support;
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  if (r.support == 0) throw DataError("flatten_check: family '" + family_id + "' has no emitted answers");
  r.ratio = static_cast<double>(hi) / static_cast<double>(lo);
  if (r.support > 1) {
    double h = 0;
    for (const auto& [a, n] : it->second.accepted) {
      if (n == 0) continue;
      double p = static_cast<double>(n) / static_cast<double>(r.total);
      h -= p * std::log(p);
    }
    r.entropy = h / std::log(static_cast<double>(r.support));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Proposals

/// One sampled question for a scene, before the flatness decision.
struct Candidate {
  std::size_t family = 0;
  std::size_t template_index = 0;
  Binding binding;
  std::optional<Answer> answer;  // empty when degenerate
  double u = 0.0;
};

/// Distinct literal values that occur in a scene, per literal kind.
struct SceneValues {
  std::map<LiteralKind, std::vector<std::string>> values;

  explicit SceneValues(const SceneGraph& g) {
    std::map<LiteralKind, std::set<std::string>> seen;
    for (const ObjectNode& n : g.nodes()) {
      seen[LiteralKind::class_label].insert(n.class_label);
      for (Attribute a : kAttributes)
        if (n.attribute(a)) seen[literal_kind_of(a)].insert(*n.attribute(a));
    }
    for (const RelationEdge& e : g.edges()) seen[LiteralKind::predicate].insert(e.predicate);
    for (auto& [k, v] : seen) values[k] = {v.begin(), v.end()};
  }

  const std::vector<std::string>* find(LiteralKind k) const {
    auto it = values.find(k);
    return it == values.end() || it->second.empty() ? nullptr : &it->second;
  }
};

/// Optional slots are bound with optional_slot_probability. Each value comes
/// from the scene's own values with grounded_slot_probability when `scene`
/// is given and has any, otherwise from the taxonomy vocabulary.
inline Binding sample_binding(const QuestionFamily& f, const Taxonomy& t, const GenerationConfig& cfg, Rng& rng,
                              const SceneValues* scene = nullptr) {
  Binding b;
  for (const SlotSpec& s : f.slots) {
    if (s.optional && !rng.bernoulli(cfg.optional_slot_probability)) continue;
    const LiteralKind kind = literal_kind_of(s.kind);
    const auto& vocab = vocabulary(t, kind);
    if (vocab.empty()) throw DataError("empty vocabulary for slot " + s.name + " of family " + f.family_id);
    const std::vector<std::string>* pool = &vocab;
    if (scene && rng.bernoulli(cfg.grounded_slot_probability))
      if (const auto* local = scene->find(kind)) pool = local;
    b[s.name] = (*pool)[rng.below(pool->size())];
  }
  return b;
}

/// Deterministic candidate sequence for one scene. Candidates can be drawn
/// ahead of time (prefetch) and consumed later; the sequence is the same.
class CandidateStream {
 public:
  CandidateStream(const SceneGraph& g, const FamilyRegistry& registry, const GenerationConfig& cfg)
      : executor_(g), values_(g), registry_(registry), cfg_(cfg), rng_(Rng::stream(cfg.seed, g.scene_id())) {
    double total = 0;
    for (const auto& f : registry.families()) {
      auto w = cfg.family_weights.find(f.family_id);
      total += w == cfg.family_weights.end() ? 1.0 : w->second;
      cumulative_.push_back(total);
    }
  }

  const SceneGraph& graph() const { return executor_.graph(); }
  const Executor& executor() const { return executor_; }

  void prefetch(std::size_t n) {
    while (buffer_.size() < n) buffer_.push_back(draw());
  }

  Candidate next() {
    if (buffer_.empty()) return draw();
    Candidate c = std::move(buffer_.front());
    buffer_.pop_front();
    return c;
  }

 private:
  Candidate draw() {
    Candidate c;
    if (cumulative_.empty() || cumulative_.back() <= 0) throw DataError("no family has positive weight");
    const double x = rng_.uniform() * cumulative_.back();
    c.family = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), x) - cumulative_.begin());
    c.family = std::min(c.family, cumulative_.size() - 1);
    const QuestionFamily& f = registry_.families()[c.family];
    c.template_index = f.templates.size() > 1 ? rng_.below(f.templates.size()) : 0;
    c.binding = sample_binding(f, registry_.taxonomy(), cfg_, rng_, &values_);
    c.u = rng_.uniform();
    Instantiation inst = instantiate(f, c.binding, registry_.taxonomy(), c.template_index);
    ExecOutcome out = executor_.execute(inst.program);
    if (auto* a = std::get_if<Answer>(&out)) c.answer = *a;
    return c;
  }

  Executor executor_;
  SceneValues values_;
  const FamilyRegistry& registry_;
  const GenerationConfig& cfg_;
  Rng rng_;
  std::vector<double> cumulative_;
  std::deque<Candidate> buffer_;
};

struct SceneGeneration {
  std::vector<QARecord> records;  // acceptance order
  std::size_t attempts = 0;
  std::size_t rejected_degenerate = 0;
  std::size_t rejected_flatness = 0;
};

inline SceneGeneration run_scene(CandidateStream& stream, const FamilyRegistry& registry, const GenerationConfig& cfg,
                                 AnswerHistogram& hist) {
  SceneGeneration out;
  const std::size_t budget = cfg.attempt_budget();
  while (out.records.size() < cfg.per_scene_target && out.attempts < budget) {
    Candidate c = stream.next();
    ++out.attempts;
    if (!c.answer) {
      ++out.rejected_degenerate;
      continue;
    }
    if (c.answer->kind() == Answer::Kind::integer && c.answer->as_int() > cfg.max_count_answer) {
      ++out.rejected_flatness;
      continue;
    }
    const QuestionFamily& f = registry.families()[c.family];
    if (!hist.offer(f.family_id, c.answer->text(), c.u, cfg)) {
      ++out.rejected_flatness;
      continue;
    }
    Instantiation inst = instantiate(f, c.binding, registry.taxonomy(), c.template_index);
    out.records.push_back({stream.graph().scene_id(), std::move(inst.question), render(inst.program), *c.answer,
                           f.question_type, f.family_id, std::move(c.binding)});
  }
  return out;
}

/// Question synthesis for one scene with degeneracy and flatness rejection.
/// The candidate stream is seeded from (cfg.seed, scene_id).
inline SceneGeneration generate_for_scene(const SceneGraph& g, const FamilyRegistry& registry,
                                          const GenerationConfig& cfg, AnswerHistogram& hist) {
  cfg.validate();
  CandidateStream stream(g, registry, cfg);
  return run_scene(stream, registry, cfg, hist);
}

// ---------------------------------------------------------------------------
// Post-processing

/// Per family, keeps the answer subset and per-answer truncation that retain
/// the most records while max/min count stays within `cap`. Truncation keeps
/// the earliest records. Order of survivors is preserved.
inline std::vector<QARecord> trim_to_cap(const std::vector<QARecord>& records, double cap) {
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (const auto& r : records) ++counts[r.family_id][r.answer.text()];

  std::map<std::string, std::pair<std::size_t, std::size_t>> keep;  // family -> (min count, limit)
  for (const auto& [family, answers] : counts) {
    std::vector<std::size_t> values;
    for (const auto& [a, n] : answers) values.push_back(n);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::size_t best = 0, best_m = values.front(), best_limit = values.back();
    for (std::size_t m : values) {
      auto limit = static_cast<std::size_t>(std::floor(cap * static_cast<double>(m)));
      std::size_t retained = 0;
      for (const auto& [a, n] : answers)
        if (n >= m) retained += std::min(n, limit);
      if (retained > best) {
        best = retained;
        best_m = m;
        best_limit = limit;
      }
    }
    keep[family] = {best_m, best_limit};
  }

  std::vector<QARecord> out;
  std::map<std::string, std::map<std::string, std::size_t>> taken;
  for (const auto& r : records) {
    const auto [m, limit] = keep[r.family_id];
    const std::string a = r.answer.text();
    if (counts[r.family_id][a] < m) continue;
    std::size_t& t = taken[r.family_id][a];
    if (t >= limit) continue;
    ++t;
    out.push_back(r);
  }
  return out;
}

/// Drops every record whose answer occurs fewer than `threshold` times,
/// counted over the whole corpus or, with `per_family`, within its family.
inline std::vector<QARecord> balance(const std::vector<QARecord>& records, std::size_t threshold,
                                     bool per_family = false) {
  auto key = [&](const QARecord& r) { return (per_family ? r.family_id + "\x1f" : std::string()) + answer_key(r.answer); };
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[key(r)];
  std::vector<QARecord> out;
  for (const auto& r : records)
    if (counts[key(r)] >= threshold) out.push_back(r);
  return out;
}

enum class Split { train, test };

using SceneSplit = std::map<std::string, Split>;

inline std::pair<std::vector<QARecord>, std::vector<QARecord>> split(const std::vector<QARecord>& records,
                                                                     const SceneSplit& scene_split) {
  std::pair<std::vector<QARecord>, std::vector<QARecord>> out;
  for (const auto& r : records) {
    auto it = scene_split.find(r.scene_id);
    if (it == scene_split.end()) throw DataError("split: scene '" + r.scene_id + "' is not assigned to a split");
    (it->second == Split::train ? out.first : out.second).push_back(r);
  }
  return out;
}

inline SceneSplit split_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("split document: expected an object of scene_id -> train|test");
  SceneSplit s;
  for (const auto& [id, side] : j.items()) {
    if (!side.is_string()) throw DataError("split: scene '" + id + "' needs \"train\" or \"test\"");
    auto v = side.get<std::string>();
    if (v == "train") s[id] = Split::train;
    else if (v == "test") s[id] = Split::test;
    else throw DataError("split: scene '" + id + "' has unknown side '" + v + "'");
  }
  return s;
}

inline Json split_to_json(const SceneSplit& s) {
  Json j = Json::object();
  for (const auto& [id, side] : s) j[id] = side == Split::train ? "train" : "test";
  return j;
}

/// Random scene-level split; ids are shuffled with a seeded stream and the
/// first round(test_fraction * n) go to test.
inline SceneSplit random_scene_split(std::vector<std::string> scene_ids, double test_fraction, std::uint64_t seed) {
  std::sort(scene_ids.begin(), scene_ids.end());
  Rng rng = Rng::stream(seed, "scene-split");
  for (std::size_t i = scene_ids.size(); i > 1; --i) std::swap(scene_ids[i - 1], scene_ids[rng.below(i)]);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(scene_ids.size())));
  SceneSplit s;
  for (std::size_t i = 0; i < scene_ids.size(); ++i) s[scene_ids[i]] = i < n_test ? Split::test : Split::train;
  return s;
}

// ---------------------------------------------------------------------------
// Corpus generation

struct GenerationSummary {
  std::size_t emitted = 0;
  std::size_t rejected_degenerate = 0;
  std::size_t rejected_flatness = 0;
  std::size_t removed_by_balance = 0;
  std::size_t scenes = 0;
  std::size_t under_produced_scenes = 0;

  Json to_json() const {
    return {{"emitted", emitted},
            {"rejected_degenerate", rejected_degenerate},
            {"rejected_flatness", rejected_flatness},
            {"removed_by_balance", removed_by_balance},
            {"scenes", scenes},
            {"under_produced_scenes", under_produced_scenes}};
  }
};

struct Corpus {
  std::vector<QARecord> records;
  GenerationSummary summary;
};

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Full pipeline over many scenes: per-scene sampling, cap trimming, and
/// balancing. Candidates are drawn in parallel; acceptance runs in ascending
/// scene_id order against one histogram, so output does not depend on
/// `threads`. Records are ordered by (scene_id, family_id, acceptance index).
inline Corpus generate_corpus(const std::vector<SceneGraph>& scenes, const FamilyRegistry& registry,
                              const GenerationConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  std::vector<const SceneGraph*> order;
  for (const auto& g : scenes) order.push_back(&g);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->scene_id() < b->scene_id(); });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i]->scene_id() == order[i - 1]->scene_id())
      throw DataError("duplicate scene_id '" + order[i]->scene_id() + "'");

  std::vector<std::optional<CandidateStream>> streams(order.size());
  const std::size_t prefetch = std::min(cfg.attempt_budget(), 8 * cfg.per_scene_target);
  parallel_for(order.size(), threads, [&](std::size_t i) {
    streams[i].emplace(*order[i], registry, cfg);
    streams[i]->prefetch(prefetch);
  });

  Corpus corpus;
  AnswerHistogram hist;
  std::vector<QARecord> all;
  for (std::size_t i = 0; i < order.size(); ++i) {
    SceneGeneration sg = run_scene(*streams[i], registry, cfg, hist);
    streams[i].reset();
    corpus.summary.rejected_degenerate += sg.rejected_degenerate;
    corpus.summary.rejected_flatness += sg.rejected_flatness;
    if (sg.records.size() < cfg.per_scene_target) ++corpus.summary.under_produced_scenes;
    std::stable_sort(sg.records.begin(), sg.records.end(),
                     [](const QARecord& a, const QARecord& b) { return a.family_id < b.family_id; });
    for (auto& r : sg.records) all.push_back(std::move(r));
  }
  corpus.summary.scenes = order.size();

  if (cfg.flatten) {
    const std::size_t before = all.size();
    all = trim_to_cap(all, cfg.flatness_cap);
    corpus.summary.rejected_flatness += before - all.size();
  }
  const std::size_t before_balance = all.size();
  corpus.records = balance(all, cfg.balance_threshold, cfg.balance_per_family);
  corpus.summary.removed_by_balance = before_balance - corpus.records.size();
  corpus.summary.emitted = corpus.records.size();
  return corpus;
}

// ---------------------------------------------------------------------------
// Record files

inline void write_records(std::ostream& out, const std::vector<QARecord>& records, const std::string& header) {
  out << header << '\n';
  for (const auto& r : records) out << r.to_json().dump() << '\n';
}

struct RecordFile {
  std::vector<QARecord> records;
  std::vector<std::string> where;  // "path:line" per record
};

inline RecordFile load_records_file(const std::filesystem::path& path) {
  RecordFile f;
  for (const Document& d : read_documents(path)) {
    try {
      f.records.push_back(QARecord::from_json(d.value));
    } catch (const DataError& e) {
      throw DataError(d.where() + ": " + e.what());
    }
    f.where.push_back(d.where());
  }
  return f;
}

struct RecordMismatch {
  std::size_t index = 0;
  std::string where;
  std::string reason;
};

/// Re-executes every record against its scene.
inline std::vector<RecordMismatch> validate_records(const std::vector<QARecord>& records,
                                                    const std::vector<std::string>& where,
                                                    const std::map<std::string, const SceneGraph*>& scenes) {
  std::vector<RecordMismatch> bad;
  std::map<std::string, Executor> executors;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const QARecord& r = records[i];
    const std::string loc = i < where.size() ? where[i] : "record " + std::to_string(i);
    auto s = scenes.find(r.scene_id);
    if (s == scenes.end()) {
      bad.push_back({i, loc, "unknown scene '" + r.scene_id + "'"});
      continue;
    }
    auto ex = executors.try_emplace(r.scene_id, *s->second).first;
    try {
      QuestionProgram p = parse_program(r.program);
      typecheck(p);
      ExecOutcome o = ex->second.execute(p);
      if (is_degenerate(o)) {
        bad.push_back({i, loc, "program is degenerate: " + describe(o)});
      } else if (std::get<Answer>(o) != r.answer) {
        bad.push_back({i, loc, "stored answer " + r.answer.describe() + " but program yields " + describe(o)});
      }
    } catch (const std::exception& e) {
      bad.push_back({i, loc, e.what()});
    }
  }
  return bad;
}

}  // namespace sgqa
