#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sgqa/error.hpp"
#include "sgqa/program.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa {

enum class SlotKind { color, material, shape, size, relation, object };

inline std::string_view slot_kind_letter(SlotKind k) {
  switch (k) {
    case SlotKind::color: return "C";
    case SlotKind::material: return "M";
    case SlotKind::shape: return "S";
    case SlotKind::size: return "Z";
    case SlotKind::relation: return "R";
    case SlotKind::object: return "O";
  }
  return "?";
}

inline std::optional<SlotKind> slot_kind_from_name(std::string_view s) {
  static const std::pair<std::string_view, SlotKind> names[] = {
      {"C", SlotKind::color},    {"color", SlotKind::color},       {"M", SlotKind::material},
      {"material", SlotKind::material}, {"S", SlotKind::shape},    {"shape", SlotKind::shape},
      {"Z", SlotKind::size},     {"size", SlotKind::size},         {"R", SlotKind::relation},
      {"relation", SlotKind::relation}, {"O", SlotKind::object},   {"object", SlotKind::object}};
  for (const auto& [n, k] : names)
    if (n == s) return k;
  return std::nullopt;
}

inline LiteralKind literal_kind_of(SlotKind k) {
  switch (k) {
    case SlotKind::color: return LiteralKind::color;
    case SlotKind::material: return LiteralKind::material;
    case SlotKind::shape: return LiteralKind::shape;
    case SlotKind::size: return LiteralKind::size;
    case SlotKind::relation: return LiteralKind::predicate;
    case SlotKind::object: return LiteralKind::class_label;
  }
  return LiteralKind::class_label;
}

inline const std::vector<std::string>& vocabulary(const Taxonomy& t, LiteralKind k) {
  switch (k) {
    case LiteralKind::class_label: return t.object_vocab;
    case LiteralKind::color: return t.vocab(Attribute::color);
    case LiteralKind::material: return t.vocab(Attribute::material);
    case LiteralKind::shape: return t.vocab(Attribute::shape);
    case LiteralKind::size: return t.vocab(Attribute::size);
    case LiteralKind::predicate: return t.relation_vocab;
  }
  return t.object_vocab;
}

struct SlotSpec {
  std::string name;
  SlotKind kind = SlotKind::object;
  bool optional = false;
};

struct QuestionFamily {
  std::string family_id;
  std::string question_type;
  std::vector<std::string> templates;
  QuestionProgram skeleton;
  std::vector<SlotSpec> slots;

  const SlotSpec* slot(std::string_view name) const {
    for (const auto& s : slots)
      if (s.name == name) return &s;
    return nullptr;
  }
};

/// Slot name to vocabulary value. Optional slots may be left out.
using Binding = std::map<std::string, std::string>;

/// Placeholder names in a template, in order of appearance.
inline std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string_view::npos) {
    std::size_t close = text.find('>', pos);
    if (close == std::string_view::npos) throw DataError("unterminated placeholder in template '" + std::string(text) + "'");
    out.emplace_back(text.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  if (text.find('>', pos) != std::string_view::npos)
    throw DataError("stray '>' in template '" + std::string(text) + "'");
  return out;
}

/// Checks placeholder closure, slot/literal kinds, and that the skeleton
/// typechecks to an answer type. Throws DataError naming the family.
inline void validate_family(const QuestionFamily& f, const Taxonomy& t) {
  auto fail = [&](const std::string& msg) { throw DataError("family '" + f.family_id + "': " + msg); };
  if (f.family_id.empty()) throw DataError("family with empty family_id");
  if (f.question_type.empty()) fail("empty question_type");
  if (f.templates.empty()) fail("no templates");

  std::set<std::string> declared;
  for (const auto& s : f.slots)
    if (!declared.insert(s.name).second) fail("duplicate slot " + s.name);

  for (const auto& text : f.templates) {
    std::set<std::string> used;
    for (const auto& p : placeholders(text)) {
      if (!declared.count(p)) fail("template references undeclared slot " + p);
      used.insert(p);
    }
    for (const auto& s : f.slots)
      if (!used.count(s.name)) fail("template '" + text + "' does not mention slot " + s.name);
  }

  ValueType root;
  try {
    root = typecheck(f.skeleton);
  } catch (const TypeError& e) {
    fail(std::string("skeleton type error: ") + e.what());
  }
  if (root == ValueType::object_set || root == ValueType::object_ref)
    fail("skeleton yields " + std::string(type_name(root)) + ", not an answer");

  std::set<std::string> in_skeleton;
  visit(f.skeleton.root, [&](const ProgramNode& n) {
    if (!n.literal) return;
    const LiteralKind want = *signature(n.fn).literal;
    if (!n.literal->slot) {
      if (!Taxonomy::contains(vocabulary(t, want), n.literal->text))
        fail("constant '" + n.literal->text + "' is not a " + std::string(literal_kind_name(want)));
      return;
    }
    const SlotSpec* s = f.slot(n.literal->text);
    if (!s) fail("skeleton references undeclared slot " + n.literal->text);
    if (literal_kind_of(s->kind) != want)
      fail("slot " + s->name + " of kind " + std::string(slot_kind_letter(s->kind)) + " used as " +
           std::string(literal_kind_name(want)) + " in " + std::string(function_name(n.fn)));
    if (s->optional && !(n.fn >= Fn::filter_class && n.fn <= Fn::filter_size))
      fail("optional slot " + s->name + " must sit in a filter");
    in_skeleton.insert(s->name);
  });
  for (const auto& s : f.slots)
    if (!in_skeleton.count(s.name)) fail("slot " + s.name + " unused by the skeleton");
}

class FamilyRegistry {
 public:
  FamilyRegistry() = default;

  FamilyRegistry(std::vector<QuestionFamily> families, Taxonomy taxonomy)
      : families_(std::move(families)), taxonomy_(std::move(taxonomy)) {
    for (std::size_t i = 0; i < families_.size(); ++i) {
      validate_family(families_[i], taxonomy_);
      if (!by_id_.emplace(families_[i].family_id, i).second)
        throw DataError("duplicate family_id '" + families_[i].family_id + "'");
      by_type_[families_[i].question_type].push_back(i);
    }
  }

  const std::vector<QuestionFamily>& families() const { return families_; }
  const Taxonomy& taxonomy() const { return taxonomy_; }
  std::size_t size() const { return families_.size(); }

  const QuestionFamily* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &families_[it->second];
  }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<const QuestionFamily*> of_type(std::string_view type) const {
    std::vector<const QuestionFamily*> out;
    auto it = by_type_.find(std::string(type));
    if (it != by_type_.end())
      for (std::size_t i : it->second) out.push_back(&families_[i]);
    return out;
  }

  std::vector<std::string> question_types() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : by_type_) out.push_back(k);
    return out;
  }

  double mean_slot_count() const {
    if (families_.empty()) return 0.0;
    double total = 0;
    for (const auto& f : families_) total += static_cast<double>(f.slots.size());
    return total / static_cast<double>(families_.size());
  }

 private:
  std::vector<QuestionFamily> families_;
  Taxonomy taxonomy_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<std::size_t>> by_type_;
};

inline QuestionFamily family_from_json(const Json& j) {
  QuestionFamily f;
  try {
    f.family_id = j.at("family_id").get<std::string>();
    f.question_type = j.at("question_type").get<std::string>();
    f.templates = j.at("templates").get<std::vector<std::string>>();
    for (const Json& s : j.at("slots")) {
      SlotSpec spec;
      spec.name = s.at("name").get<std::string>();
      auto kind = slot_kind_from_name(s.at("kind").get<std::string>());
      if (!kind) throw DataError("slot " + spec.name + ": unknown kind '" + s.at("kind").get<std::string>() + "'");
      spec.kind = *kind;
      spec.optional = s.value("optional", false);
      f.slots.push_back(std::move(spec));
    }
    f.skeleton = parse_program(j.at("skeleton").get<std::string>(), ParseOptions{.allow_slots = true});
  } catch (const nlohmann::json::exception& e) {
    throw DataError("family '" + f.family_id + "': malformed document: " + e.what());
  } catch (const ParseError& e) {
    throw DataError("family '" + f.family_id + "': skeleton: " + e.what());
  }
  return f;
}

inline Json family_to_json(const QuestionFamily& f) {
  Json slots = Json::array();
  for (const auto& s : f.slots)
    slots.push_back({{"name", s.name}, {"kind", slot_kind_letter(s.kind)}, {"optional", s.optional}});
  return {{"family_id", f.family_id},
          {"question_type", f.question_type},
          {"templates", f.templates},
          {"skeleton", render(f.skeleton)},
          {"slots", slots}};
}

/// Accepts a list of families, or an object with a "families" list.
inline FamilyRegistry load_families(const Json& doc, const Taxonomy& taxonomy) {
  const Json& list = doc.is_object() && doc.contains("families") ? doc.at("families") : doc;
  if (!list.is_array()) throw DataError("family document: expected a list of families");
  std::vector<QuestionFamily> families;
  for (const Json& j : list) families.push_back(family_from_json(j));
  return FamilyRegistry(std::move(families), taxonomy);
}

inline FamilyRegistry load_families_file(const std::filesystem::path& path, const Taxonomy& taxonomy) {
  Json doc = Json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw DataError(path.string() + ": malformed JSON");
  try {
    return load_families(doc, taxonomy);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Instantiation

struct Instantiation {
  std::string question;
  QuestionProgram program;
};

namespace detail {

inline ProgramNode bind_node(const ProgramNode& n, const Binding& b) {
  if (n.literal && n.literal->slot) {
    auto it = b.find(n.literal->text);
    if (it == b.end()) return bind_node(n.children.front(), b);  // elide the filter
    ProgramNode out;
    out.fn = n.fn;
    out.literal = Literal{it->second, false};
    for (const auto& c : n.children) out.children.push_back(bind_node(c, b));
    return out;
  }
  ProgramNode out;
  out.fn = n.fn;
  out.literal = n.literal;
  for (const auto& c : n.children) out.children.push_back(bind_node(c, b));
  return out;
}

inline std::string render_text(std::string_view text, const Binding& b) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find('<', pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    std::size_t close = text.find('>', open);
    out.append(text.substr(pos, open - pos));
    std::string name(text.substr(open + 1, close - open - 1));
    pos = close + 1;
    auto it = b.find(name);
    if (it != b.end()) {
      out += it->second;
    } else if (pos < text.size() && text[pos] == ' ') {
      ++pos;
    } else if (!out.empty() && out.back() == ' ') {
      out.pop_back();
    }
  }
  return out;
}

}  // namespace detail

/// Renders one template and binds the skeleton. Unbound optional slots vanish
/// from the text together with one adjacent space, and their filter nodes are
/// dropped from the program.
inline Instantiation instantiate(const QuestionFamily& f, const Binding& b, const Taxonomy& t,
                                 std::size_t template_index = 0) {
  for (const auto& s : f.slots) {
    auto it = b.find(s.name);
    if (it == b.end()) {
      if (!s.optional) throw DataError("family '" + f.family_id + "': unbound required slot " + s.name);
      continue;
    }
    if (!Taxonomy::contains(vocabulary(t, literal_kind_of(s.kind)), it->second))
      throw DataError("family '" + f.family_id + "': value '" + it->second + "' is not a valid " +
                      std::string(literal_kind_name(literal_kind_of(s.kind))) + " for slot " + s.name);
  }
  for (const auto& [name, value] : b)
    if (!f.slot(name)) throw DataError("family '" + f.family_id + "': binding for undeclared slot " + name);
  if (template_index >= f.templates.size())
    throw std::out_of_range("template index " + std::to_string(template_index));

  return {detail::render_text(f.templates[template_index], b), {detail::bind_node(f.skeleton.root, b)}};
}

}  // namespace sgqa
