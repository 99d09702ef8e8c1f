#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sgqa/program.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa {

/// Ground-truth answer of a question.
class Answer {
 public:
  enum class Kind { boolean, integer, attribute, class_label };

  static Answer boolean(bool v) { return Answer(Kind::boolean, v ? 1 : 0, {}); }
  static Answer integer(std::int64_t v) { return Answer(Kind::integer, v, {}); }
  static Answer attribute(std::string v) { return Answer(Kind::attribute, 0, std::move(v)); }
  static Answer class_label(std::string v) { return Answer(Kind::class_label, 0, std::move(v)); }

  Kind kind() const { return kind_; }
  bool as_bool() const { return int_ != 0; }
  std::int64_t as_int() const { return int_; }
  const std::string& as_string() const { return str_; }

  /// Surface form: "yes"/"no", a decimal integer, or the vocabulary string.
  std::string text() const {
    switch (kind_) {
      case Kind::boolean: return as_bool() ? "yes" : "no";
      case Kind::integer: return std::to_string(int_);
      default: return str_;
    }
  }

  static std::string_view kind_name(Kind k) {
    switch (k) {
      case Kind::boolean: return "boolean";
      case Kind::integer: return "integer";
      case Kind::attribute: return "attribute";
      case Kind::class_label: return "class";
    }
    return "?";
  }

  Json to_json() const {
    Json j = {{"type", kind_name(kind_)}};
    switch (kind_) {
      case Kind::boolean: j["value"] = as_bool(); break;
      case Kind::integer: j["value"] = int_; break;
      default: j["value"] = str_;
    }
    return j;
  }

  static Answer from_json(const Json& j) {
    try {
      const auto type = j.at("type").get<std::string>();
      const Json& v = j.at("value");
      if (type == "boolean") return boolean(v.get<bool>());
      if (type == "integer") return integer(v.get<std::int64_t>());
      if (type == "attribute") return attribute(v.get<std::string>());
      if (type == "class") return class_label(v.get<std::string>());
      throw DataError("unknown answer type '" + type + "'");
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed answer: ") + e.what());
    }
  }

  /// Human-readable form used by the CLI, e.g. "Integer 3".
  std::string describe() const {
    switch (kind_) {
      case Kind::boolean: return std::string("Boolean ") + (as_bool() ? "true" : "false");
      case Kind::integer: return "Integer " + std::to_string(int_);
      case Kind::attribute: return "AttributeValue " + str_;
      case Kind::class_label: return "ClassLabel " + str_;
    }
    return "?";
  }

  auto operator<=>(const Answer&) const = default;
  bool operator==(const Answer&) const = default;

 private:
  Answer(Kind k, std::int64_t i, std::string s) : kind_(k), int_(i), str_(std::move(s)) {}

  Kind kind_;
  std::int64_t int_;
  std::string str_;
};

/// Why a program has no well-defined answer on a scene. The order is the
/// reporting priority when several subtrees degenerate.
enum class DegenerateReason { empty_reference, non_unique_reference, missing_attribute };

inline std::string_view reason_name(DegenerateReason r) {
  switch (r) {
    case DegenerateReason::empty_reference: return "empty-reference";
    case DegenerateReason::non_unique_reference: return "non-unique-reference";
    case DegenerateReason::missing_attribute: return "missing-attribute";
  }
  return "?";
}

struct Degenerate {
  DegenerateReason reason;
  bool operator==(const Degenerate&) const = default;
};

using ExecOutcome = std::variant<Answer, Degenerate>;

inline bool is_degenerate(const ExecOutcome& o) { return std::holds_alternative<Degenerate>(o); }

inline std::string describe(const ExecOutcome& o) {
  if (auto* a = std::get_if<Answer>(&o)) return a->describe();
  return "Degenerate " + std::string(reason_name(std::get<Degenerate>(o).reason));
}

// ---------------------------------------------------------------------------

/// Sorted node indices into SceneGraph::nodes().
using ObjectSet = std::vector<std::uint32_t>;

struct ObjectRef {
  std::uint32_t index;
  bool operator==(const ObjectRef&) const = default;
};
struct AttributeValue {
  std::string value;
  bool operator==(const AttributeValue&) const = default;
};
struct ClassValue {
  std::string value;
  bool operator==(const ClassValue&) const = default;
};

using Value = std::variant<ObjectSet, ObjectRef, std::int64_t, bool, AttributeValue, ClassValue>;

/// Result of evaluating any subprogram.
struct Evaluation {
  Value value;
  std::optional<DegenerateReason> degenerate;

  bool ok() const { return !degenerate; }
};

/// Evaluates programs against one scene. Holds a reference to the scene,
/// which must outlive the executor.
class Executor {
 public:
  explicit Executor(const SceneGraph& g) : graph_(g), out_(g.nodes().size()), in_(g.nodes().size()) {
    for (const RelationEdge& e : g.edges()) {
      auto s = static_cast<std::uint32_t>(*g.index_of(e.subject_id));
      auto o = static_cast<std::uint32_t>(*g.index_of(e.object_id));
      out_[s].push_back({e.predicate, o});
      in_[o].push_back({e.predicate, s});
    }
  }

  const SceneGraph& graph() const { return graph_; }

  Evaluation evaluate(const ProgramNode& n) const {
    const Signature& sig = signature(n.fn);
    if (n.literal && n.literal->slot)
      throw std::invalid_argument("cannot execute unbound slot '" + n.literal->text + "'");

    std::vector<Evaluation> args;
    args.reserve(n.children.size());
    std::optional<DegenerateReason> bad;
    for (const auto& c : n.children) {
      args.push_back(evaluate(c));
      if (args.back().degenerate && (!bad || *args.back().degenerate < *bad)) bad = args.back().degenerate;
    }
    if (bad) return {default_value(sig.result), bad};

    auto set_arg = [&](std::size_t i) -> ObjectSet& { return std::get<ObjectSet>(args[i].value); };
    auto ref_arg = [&](std::size_t i) { return std::get<ObjectRef>(args[i].value).index; };
    auto int_arg = [&](std::size_t i) { return std::get<std::int64_t>(args[i].value); };
    auto attr_arg = [&](std::size_t i) -> const std::string& { return std::get<AttributeValue>(args[i].value).value; };

    switch (n.fn) {
      case Fn::scene: {
        ObjectSet all(graph_.nodes().size());
        for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
        return {std::move(all), {}};
      }
      case Fn::filter_class: {
        ObjectSet& s = set_arg(0);
        std::erase_if(s, [&](std::uint32_t i) { return graph_.nodes()[i].class_label != n.literal->text; });
        return {std::move(s), {}};
      }
      case Fn::filter_color:
      case Fn::filter_material:
      case Fn::filter_shape:
      case Fn::filter_size: {
        Attribute a = *attribute_of(n.fn);
        ObjectSet& s = set_arg(0);
        std::erase_if(s, [&](std::uint32_t i) {
          const auto& v = graph_.nodes()[i].attribute(a);
          return !v || *v != n.literal->text;
        });
        return {std::move(s), {}};
      }
      case Fn::relate:
      case Fn::relate_inverse: {
        const auto& fan = n.fn == Fn::relate ? out_[ref_arg(0)] : in_[ref_arg(0)];
        ObjectSet s;
        for (const auto& [pred, other] : fan)
          if (pred == n.literal->text) s.push_back(other);
        std::sort(s.begin(), s.end());
        return {std::move(s), {}};
      }
      case Fn::unique: {
        const ObjectSet& s = set_arg(0);
        if (s.empty()) return {ObjectRef{0}, DegenerateReason::empty_reference};
        if (s.size() > 1) return {ObjectRef{0}, DegenerateReason::non_unique_reference};
        return {ObjectRef{s.front()}, {}};
      }
      case Fn::count: return {static_cast<std::int64_t>(set_arg(0).size()), {}};
      case Fn::exist: return {!set_arg(0).empty(), {}};
      case Fn::query_color:
      case Fn::query_material:
      case Fn::query_shape:
      case Fn::query_size: {
        const auto& v = graph_.nodes()[ref_arg(0)].attribute(*attribute_of(n.fn));
        if (!v) return {AttributeValue{}, DegenerateReason::missing_attribute};
        return {AttributeValue{*v}, {}};
      }
      case Fn::query_class: return {ClassValue{graph_.nodes()[ref_arg(0)].class_label}, {}};
      case Fn::equal_integer: return {int_arg(0) == int_arg(1), {}};
      case Fn::greater_than: return {int_arg(0) > int_arg(1), {}};
      case Fn::less_than: return {int_arg(0) < int_arg(1), {}};
      case Fn::equal_color:
      case Fn::equal_material:
      case Fn::equal_shape:
      case Fn::equal_size: return {attr_arg(0) == attr_arg(1), {}};
      case Fn::intersect: {
        ObjectSet out;
        std::set_intersection(set_arg(0).begin(), set_arg(0).end(), set_arg(1).begin(), set_arg(1).end(),
                              std::back_inserter(out));
        return {std::move(out), {}};
      }
      case Fn::union_: {
        ObjectSet out;
        std::set_union(set_arg(0).begin(), set_arg(0).end(), set_arg(1).begin(), set_arg(1).end(),
                       std::back_inserter(out));
        return {std::move(out), {}};
      }
    }
    throw std::logic_error("unhandled function");
  }

  /// Runs a program whose root yields an answer type.
  ExecOutcome execute(const QuestionProgram& p) const {
    Evaluation e = evaluate(p.root);
    if (e.degenerate) return Degenerate{*e.degenerate};
    return std::visit(
        [](auto&& v) -> ExecOutcome {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, bool>) return Answer::boolean(v);
          else if constexpr (std::is_same_v<T, std::int64_t>) return Answer::integer(v);
          else if constexpr (std::is_same_v<T, AttributeValue>) return Answer::attribute(v.value);
          else if constexpr (std::is_same_v<T, ClassValue>) return Answer::class_label(v.value);
          else throw std::invalid_argument("program root does not produce an answer");
        },
        e.value);
  }

 private:
  static Value default_value(ValueType t) {
    switch (t) {
      case ValueType::object_set: return ObjectSet{};
      case ValueType::object_ref: return ObjectRef{0};
      case ValueType::integer: return std::int64_t{0};
      case ValueType::boolean: return false;
      case ValueType::attribute_value: return AttributeValue{};
      case ValueType::class_label: return ClassValue{};
    }
    return false;
  }

  const SceneGraph& graph_;
  std::vector<std::vector<std::pair<std::string, std::uint32_t>>> out_;
  std::vector<std::vector<std::pair<std::string, std::uint32_t>>> in_;
};

inline ExecOutcome execute(const QuestionProgram& p, const SceneGraph& g) { return Executor(g).execute(p); }

}  // namespace sgqa
