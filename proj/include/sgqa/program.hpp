#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgqa/error.hpp"
#include "sgqa/scene_graph.hpp"

namespace sgqa {

enum class Fn {
  scene,
  filter_class,
  filter_color,
  filter_material,
  filter_shape,
  filter_size,
  relate,
  relate_inverse,
  unique,
  count,
  exist,
  query_color,
  query_material,
  query_shape,
  query_size,
  query_class,
  equal_integer,
  greater_than,
  less_than,
  equal_color,
  equal_material,
  equal_shape,
  equal_size,
  intersect,
  union_,
};

enum class ValueType { object_set, object_ref, integer, boolean, attribute_value, class_label };

inline std::string_view type_name(ValueType t) {
  switch (t) {
    case ValueType::object_set: return "ObjectSet";
    case ValueType::object_ref: return "ObjectRef";
    case ValueType::integer: return "Integer";
    case ValueType::boolean: return "Boolean";
    case ValueType::attribute_value: return "AttributeValue";
    case ValueType::class_label: return "ClassLabel";
  }
  return "?";
}

/// Vocabulary a literal argument is drawn from.
enum class LiteralKind { class_label, color, material, shape, size, predicate };

inline std::string_view literal_kind_name(LiteralKind k) {
  switch (k) {
    case LiteralKind::class_label: return "object";
    case LiteralKind::color: return "color";
    case LiteralKind::material: return "material";
    case LiteralKind::shape: return "shape";
    case LiteralKind::size: return "size";
    case LiteralKind::predicate: return "relation";
  }
  return "?";
}

inline LiteralKind literal_kind_of(Attribute a) {
  switch (a) {
    case Attribute::color: return LiteralKind::color;
    case Attribute::material: return LiteralKind::material;
    case Attribute::shape: return LiteralKind::shape;
    case Attribute::size: return LiteralKind::size;
  }
  return LiteralKind::color;
}

/// Text form: subprogram arguments come first, then at most one literal.
struct Signature {
  Fn fn;
  std::string_view name;
  ValueType result;
  int arity;  // number of subprogram arguments
  std::array<ValueType, 2> inputs;
  std::optional<LiteralKind> literal;
};

namespace detail {
using VT = ValueType;
using LK = LiteralKind;
inline constexpr VT kSet = VT::object_set;
inline constexpr VT kRef = VT::object_ref;
inline constexpr VT kInt = VT::integer;
inline constexpr VT kAttr = VT::attribute_value;

inline const std::array<Signature, 25>& signature_table() {
  static const std::array<Signature, 25> table = {{
      {Fn::scene, "scene", kSet, 0, {}, std::nullopt},
      {Fn::filter_class, "filter_class", kSet, 1, {kSet}, LK::class_label},
      {Fn::filter_color, "filter_color", kSet, 1, {kSet}, LK::color},
      {Fn::filter_material, "filter_material", kSet, 1, {kSet}, LK::material},
      {Fn::filter_shape, "filter_shape", kSet, 1, {kSet}, LK::shape},
      {Fn::filter_size, "filter_size", kSet, 1, {kSet}, LK::size},
      {Fn::relate, "relate", kSet, 1, {kRef}, LK::predicate},
      {Fn::relate_inverse, "relate_inverse", kSet, 1, {kRef}, LK::predicate},
      {Fn::unique, "unique", kRef, 1, {kSet}, std::nullopt},
      {Fn::count, "count", kInt, 1, {kSet}, std::nullopt},
      {Fn::exist, "exist", VT::boolean, 1, {kSet}, std::nullopt},
      {Fn::query_color, "query_color", kAttr, 1, {kRef}, std::nullopt},
      {Fn::query_material, "query_material", kAttr, 1, {kRef}, std::nullopt},
      {Fn::query_shape, "query_shape", kAttr, 1, {kRef}, std::nullopt},
      {Fn::query_size, "query_size", kAttr, 1, {kRef}, std::nullopt},
      {Fn::query_class, "query_class", VT::class_label, 1, {kRef}, std::nullopt},
      {Fn::equal_integer, "equal_integer", VT::boolean, 2, {kInt, kInt}, std::nullopt},
      {Fn::greater_than, "greater_than", VT::boolean, 2, {kInt, kInt}, std::nullopt},
      {Fn::less_than, "less_than", VT::boolean, 2, {kInt, kInt}, std::nullopt},
      {Fn::equal_color, "equal_color", VT::boolean, 2, {kAttr, kAttr}, std::nullopt},
      {Fn::equal_material, "equal_material", VT::boolean, 2, {kAttr, kAttr}, std::nullopt},
      {Fn::equal_shape, "equal_shape", VT::boolean, 2, {kAttr, kAttr}, std::nullopt},
      {Fn::equal_size, "equal_size", VT::boolean, 2, {kAttr, kAttr}, std::nullopt},
      {Fn::intersect, "intersect", kSet, 2, {kSet, kSet}, std::nullopt},
      {Fn::union_, "union", kSet, 2, {kSet, kSet}, std::nullopt},
  }};
  return table;
}
}  // namespace detail

inline const Signature& signature(Fn fn) { return detail::signature_table()[static_cast<std::size_t>(fn)]; }

inline std::string_view function_name(Fn fn) { return signature(fn).name; }

inline std::optional<Fn> function_from_name(std::string_view name) {
  for (const Signature& s : detail::signature_table())
    if (s.name == name) return s.fn;
  return std::nullopt;
}

/// Attribute touched by a filter_/query_/equal_ function, if any.
inline std::optional<Attribute> attribute_of(Fn fn) {
  switch (fn) {
    case Fn::filter_color: case Fn::query_color: case Fn::equal_color: return Attribute::color;
    case Fn::filter_material: case Fn::query_material: case Fn::equal_material: return Attribute::material;
    case Fn::filter_shape: case Fn::query_shape: case Fn::equal_shape: return Attribute::shape;
    case Fn::filter_size: case Fn::query_size: case Fn::equal_size: return Attribute::size;
    default: return std::nullopt;
  }
}

/// A literal argument. Slot literals are unbound template placeholders that
/// only appear in family skeletons.
struct Literal {
  std::string text;
  bool slot = false;

  bool operator==(const Literal&) const = default;
};

struct ProgramNode {
  Fn fn = Fn::scene;
  std::vector<ProgramNode> children;
  std::optional<Literal> literal;
  std::size_t offset = 0;  // source position; not part of equality

  bool operator==(const ProgramNode& o) const {
    return fn == o.fn && literal == o.literal && children == o.children;
  }

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& c : children) d = std::max(d, c.depth());
    return d + 1;
  }

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& c : children) n += c.size();
    return n;
  }
};

struct QuestionProgram {
  ProgramNode root;

  bool operator==(const QuestionProgram&) const = default;
};

// ---------------------------------------------------------------------------
// Rendering

inline void render_literal(const Literal& lit, std::string& out) {
  if (lit.slot) {
    out += lit.text;
    return;
  }
  out += '"';
  for (char c : lit.text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
}

inline void render(const ProgramNode& n, std::string& out) {
  out += '(';
  out += function_name(n.fn);
  for (const auto& c : n.children) {
    out += ' ';
    render(c, out);
  }
  if (n.literal) {
    out += ' ';
    render_literal(*n.literal, out);
  }
  out += ')';
}

inline std::string render(const QuestionProgram& p) {
  std::string out;
  render(p.root, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing
//
//   expr := "(" fname arg* ")"
//   arg  := expr | '"' literal '"' | SLOT      (SLOT only in skeletons)

struct ParseOptions {
  bool allow_slots = false;
  std::size_t max_depth = 256;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, ParseOptions opt) : src_(src), opt_(opt) {}

  QuestionProgram parse() {
    skip_ws();
    if (at_end()) throw ParseError("empty program", pos_);
    if (peek() != '(') throw ParseError("expected '('", pos_);
    QuestionProgram p{expr(0)};
    skip_ws();
    if (!at_end()) {
      if (peek() == ')') throw ParseError("unbalanced parentheses: unexpected ')'", pos_);
      throw ParseError("trailing input after program", pos_);
    }
    return p;
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }

  static bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  std::string_view word() {
    std::size_t start = pos_;
    while (!at_end() && word_char(peek())) ++pos_;
    return src_.substr(start, pos_ - start);
  }

  std::string quoted() {
    std::size_t start = pos_;
    ++pos_;  // opening quote
    std::string out;
    while (true) {
      if (at_end()) throw ParseError("unterminated string literal", start);
      char c = src_[pos_++];
      if (c == '"') return out;
      if (c == '\\') {
        if (at_end()) throw ParseError("unterminated string literal", start);
        c = src_[pos_++];
      }
      out += c;
    }
  }

  ProgramNode expr(std::size_t depth) {
    if (depth >= opt_.max_depth) throw ParseError("program nested too deeply", pos_);
    ProgramNode node;
    node.offset = pos_;
    ++pos_;  // '('
    skip_ws();
    std::size_t name_at = pos_;
    std::string_view name = word();
    if (name.empty()) throw ParseError("expected function name", name_at);
    auto fn = function_from_name(name);
    if (!fn) throw ParseError("unknown function '" + std::string(name) + "'", name_at);
    node.fn = *fn;
    const Signature& sig = signature(*fn);
    const int expected = sig.arity + (sig.literal ? 1 : 0);

    int index = 0;
    while (true) {
      skip_ws();
      if (at_end()) throw ParseError("unbalanced parentheses: missing ')'", pos_);
      char c = peek();
      if (c == ')') {
        if (index < expected)
          throw ParseError("arity mismatch: '" + std::string(name) + "' takes " + std::to_string(expected) +
                               " argument(s), got " + std::to_string(index),
                           pos_);
        ++pos_;
        return node;
      }
      std::size_t arg_at = pos_;
      if (index >= expected)
        throw ParseError("arity mismatch: '" + std::string(name) + "' takes " + std::to_string(expected) +
                             " argument(s)",
                         arg_at);
      const bool want_expr = index < sig.arity;
      if (c == '(') {
        if (!want_expr) throw ParseError("expected a literal argument to '" + std::string(name) + "'", arg_at);
        node.children.push_back(expr(depth + 1));
      } else if (c == '"') {
        if (want_expr) throw ParseError("expected a subprogram argument to '" + std::string(name) + "'", arg_at);
        node.literal = Literal{quoted(), false};
      } else if (word_char(c)) {
        std::string_view w = word();
        if (!opt_.allow_slots) throw ParseError("unquoted literal '" + std::string(w) + "'", arg_at);
        if (want_expr) throw ParseError("expected a subprogram argument to '" + std::string(name) + "'", arg_at);
        node.literal = Literal{std::string(w), true};
      } else {
        throw ParseError(std::string("unexpected character '") + c + "'", arg_at);
      }
      ++index;
    }
  }

  std::string_view src_;
  ParseOptions opt_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline QuestionProgram parse_program(std::string_view text, ParseOptions opt = {}) {
  return detail::Parser(text, opt).parse();
}

// ---------------------------------------------------------------------------
// Type checking

inline ValueType typecheck(const ProgramNode& n) {
  const Signature& sig = signature(n.fn);
  if (static_cast<int>(n.children.size()) != sig.arity)
    throw TypeError(std::string(sig.name) + ": expected " + std::to_string(sig.arity) + " subprogram(s), got " +
                    std::to_string(n.children.size()));
  if (sig.literal.has_value() != n.literal.has_value())
    throw TypeError(std::string(sig.name) + (sig.literal ? ": missing literal argument" : ": unexpected literal"));
  for (int i = 0; i < sig.arity; ++i) {
    ValueType got = typecheck(n.children[static_cast<std::size_t>(i)]);
    ValueType want = sig.inputs[static_cast<std::size_t>(i)];
    if (got != want)
      throw TypeError(std::string(sig.name) + ": argument " + std::to_string(i + 1) + " expected " +
                      std::string(type_name(want)) + ", got " + std::string(type_name(got)));
  }
  return sig.result;
}

inline ValueType typecheck(const QuestionProgram& p) { return typecheck(p.root); }

/// Calls `f(node)` for every node, parents before children.
template <typename F>
void visit(const ProgramNode& n, F&& f) {
  f(n);
  for (const auto& c : n.children) visit(c, f);
}

}  // namespace sgqa
