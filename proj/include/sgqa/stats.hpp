#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sgqa/generator.hpp"

namespace sgqa {

struct StatsReport {
  std::size_t total_questions = 0;
  std::size_t total_scenes = 0;
  double avg_questions_per_scene = 0;
  double avg_question_length = 0;  // whitespace-separated tokens
  double avg_instances_per_scene = 0;
  std::map<std::string, std::size_t> vocab_counts;  // size, color, material, shape, object, relation
  std::map<std::string, std::size_t> per_question_type;
  std::map<std::string, std::map<std::string, std::size_t>> answers_per_family;

  Json to_json() const {
    return {{"total_questions", total_questions},
            {"total_scenes", total_scenes},
            {"avg_questions_per_scene", avg_questions_per_scene},
            {"avg_question_length", avg_question_length},
            {"avg_instances_per_scene", avg_instances_per_scene},
            {"vocab_counts", vocab_counts},
            {"per_question_type", per_question_type},
            {"answers_per_family", answers_per_family}};
  }
};

inline std::size_t token_count(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

/// Corpus statistics. Scene-level figures cover every supplied scene; vocab
/// counts are distinct values observed in those scenes.
inline StatsReport compute_stats(const std::vector<QARecord>& records, const std::vector<SceneGraph>& scenes) {
  StatsReport s;
  std::set<std::string> ids;
  std::size_t instances = 0;
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& g : scenes) {
    ids.insert(g.scene_id());
    instances += g.nodes().size();
    for (const auto& n : g.nodes()) {
      seen["object"].insert(n.class_label);
      for (Attribute a : kAttributes)
        if (n.attribute(a)) seen[std::string(attribute_name(a))].insert(*n.attribute(a));
    }
    for (const auto& e : g.edges()) seen["relation"].insert(e.predicate);
  }
  for (const char* k : {"size", "color", "material", "shape", "object", "relation"}) s.vocab_counts[k] = seen[k].size();

  std::size_t tokens = 0;
  for (const auto& r : records) {
    if (!ids.count(r.scene_id)) throw DataError("stats: record references missing scene '" + r.scene_id + "'");
    tokens += token_count(r.question);
    ++s.per_question_type[r.question_type];
    ++s.answers_per_family[r.family_id][r.answer.text()];
  }
  s.total_questions = records.size();
  s.total_scenes = scenes.size();
  if (!scenes.empty()) {
    s.avg_questions_per_scene = static_cast<double>(records.size()) / static_cast<double>(scenes.size());
    s.avg_instances_per_scene = static_cast<double>(instances) / static_cast<double>(scenes.size());
  }
  if (!records.empty()) s.avg_question_length = static_cast<double>(tokens) / static_cast<double>(records.size());
  return s;
}

// ---------------------------------------------------------------------------
// Blind baseline

struct AccuracyCell {
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct FamilyBaseline {
  std::string prediction;
  std::size_t support = 0;  // distinct answers of the family over train and test
  AccuracyCell test;
};

struct BaselineReport {
  std::map<std::string, AccuracyCell> per_type;
  std::map<std::string, FamilyBaseline> per_family;
  AccuracyCell overall;
  std::string global_prediction;

  Json to_json() const {
    Json types = Json::object();
    for (const auto& [t, c] : per_type) types[t] = {{"accuracy", c.accuracy()}, {"n", c.total}};
    Json fams = Json::object();
    for (const auto& [f, b] : per_family)
      fams[f] = {{"accuracy", b.test.accuracy()}, {"n", b.test.total}, {"support", b.support}, {"prediction", b.prediction}};
    return {{"overall", {{"accuracy", overall.accuracy()}, {"n", overall.total}}},
            {"per_question_type", types},
            {"per_family", fams},
            {"global_prediction", global_prediction}};
  }
};

namespace detail {
/// Most frequent key; ties go to the lexicographically smallest.
inline std::string majority(const std::map<std::string, std::size_t>& counts) {
  std::string best;
  std::size_t best_n = 0;
  for (const auto& [k, n] : counts)
    if (n > best_n) {
      best = k;
      best_n = n;
    }
  return best;
}
}  // namespace detail

/// Predicts each test question's answer as the most common training answer of
/// its family, ignoring the scene. Families absent from training fall back to
/// the global training majority.
inline BaselineReport blind_baseline(const std::vector<QARecord>& train, const std::vector<QARecord>& test) {
  if (train.empty() || test.empty()) throw DataError("blind baseline: train and test splits must be non-empty");
  std::map<std::string, std::map<std::string, std::size_t>> by_family;
  std::map<std::string, std::size_t> global;
  std::map<std::string, std::set<std::string>> support;
  for (const auto& r : train) {
    ++by_family[r.family_id][answer_key(r.answer)];
    ++global[answer_key(r.answer)];
    support[r.family_id].insert(answer_key(r.answer));
  }
  for (const auto& r : test) support[r.family_id].insert(answer_key(r.answer));

  BaselineReport rep;
  std::map<std::string, std::string> prediction;
  for (const auto& [f, counts] : by_family) prediction[f] = detail::majority(counts);
  const std::string fallback = detail::majority(global);
  auto text_of = [](const std::string& key) { return key.substr(key.find(':') + 1); };
  rep.global_prediction = text_of(fallback);

  for (const auto& r : test) {
    auto it = prediction.find(r.family_id);
    const std::string& guess = it == prediction.end() ? fallback : it->second;
    const bool hit = guess == answer_key(r.answer);
    FamilyBaseline& fb = rep.per_family[r.family_id];
    fb.prediction = text_of(guess);
    fb.support = support[r.family_id].size();
    for (AccuracyCell* c : {&fb.test, &rep.per_type[r.question_type], &rep.overall}) {
      ++c->total;
      c->correct += hit ? 1 : 0;
    }
  }
  return rep;
}

}  // namespace sgqa
