#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sgqa/error.hpp"
#include "sgqa/json_io.hpp"
#include "sgqa/rng.hpp"

namespace sgqa {

enum class Attribute { color, material, shape, size };

inline constexpr std::array<Attribute, 4> kAttributes = {Attribute::color, Attribute::material,
                                                         Attribute::shape, Attribute::size};

inline std::string_view attribute_name(Attribute a) {
  switch (a) {
    case Attribute::color: return "color";
    case Attribute::material: return "material";
    case Attribute::shape: return "shape";
    case Attribute::size: return "size";
  }
  return "?";
}

inline std::optional<Attribute> attribute_from_name(std::string_view name) {
  for (Attribute a : kAttributes)
    if (attribute_name(a) == name) return a;
  return std::nullopt;
}

/// A scene object. Box extents are in meters, orientation is yaw in radians.
struct ObjectNode {
  int id = 0;
  std::string class_label;
  std::array<std::optional<std::string>, 4> attributes;
  std::array<double, 3> center{};
  std::array<double, 3> size{1.0, 1.0, 1.0};  // width, length, height
  double orientation = 0.0;

  const std::optional<std::string>& attribute(Attribute a) const {
    return attributes[static_cast<std::size_t>(a)];
  }
  std::optional<std::string>& attribute(Attribute a) { return attributes[static_cast<std::size_t>(a)]; }

  double volume() const { return size[0] * size[1] * size[2]; }

  bool operator==(const ObjectNode&) const = default;
};

struct RelationEdge {
  int subject_id = 0;
  std::string predicate;
  int object_id = 0;

  auto operator<=>(const RelationEdge&) const = default;
};

/// Wraps a yaw angle into [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0) w += two_pi;
  w -= std::numbers::pi;
  return w >= std::numbers::pi ? -std::numbers::pi : w;
}

/// Objects plus directed predicate edges. Construction validates every
/// invariant; nodes are kept sorted by id and edges by (subject, predicate,
/// object), so two graphs with the same content compare equal.
class SceneGraph {
 public:
  SceneGraph() = default;

  SceneGraph(std::string scene_id, std::vector<ObjectNode> nodes, std::vector<RelationEdge> edges)
      : scene_id_(std::move(scene_id)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::sort(nodes_.begin(), nodes_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const ObjectNode& n = nodes_[i];
      if (n.id <= 0) fail("non-positive node id " + std::to_string(n.id));
      if (i > 0 && nodes_[i - 1].id == n.id) fail("duplicate node id " + std::to_string(n.id));
      for (double s : n.size)
        if (!(s > 0) || !std::isfinite(s)) fail("non-positive box size on node " + std::to_string(n.id));
      for (double c : n.center)
        if (!std::isfinite(c)) fail("non-finite center on node " + std::to_string(n.id));
      if (!std::isfinite(n.orientation)) fail("non-finite orientation on node " + std::to_string(n.id));
    }
    std::sort(edges_.begin(), edges_.end());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const RelationEdge& e = edges_[i];
      if (!index_of(e.subject_id)) fail("dangling edge endpoint " + std::to_string(e.subject_id));
      if (!index_of(e.object_id)) fail("dangling edge endpoint " + std::to_string(e.object_id));
      if (e.subject_id == e.object_id) fail("self edge on node " + std::to_string(e.subject_id));
      if (i > 0 && edges_[i - 1] == e)
        fail("duplicate edge (" + std::to_string(e.subject_id) + ", " + e.predicate + ", " +
             std::to_string(e.object_id) + ")");
    }
  }

  const std::string& scene_id() const { return scene_id_; }
  const std::vector<ObjectNode>& nodes() const { return nodes_; }
  const std::vector<RelationEdge>& edges() const { return edges_; }

  std::optional<std::size_t> index_of(int id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                               [](const ObjectNode& n, int v) { return n.id < v; });
    if (it == nodes_.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
  }

  bool operator==(const SceneGraph&) const = default;

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError("scene '" + scene_id_ + "': " + msg);
  }

  std::string scene_id_;
  std::vector<ObjectNode> nodes_;
  std::vector<RelationEdge> edges_;
};

// ---------------------------------------------------------------------------
// Taxonomy

struct Taxonomy {
  std::map<std::string, std::string> class_remap;
  std::vector<std::string> object_vocab;
  std::array<std::vector<std::string>, 4> attribute_vocabs;
  std::vector<std::string> relation_vocab;
  std::set<std::string> excluded_classes;

  const std::vector<std::string>& vocab(Attribute a) const {
    return attribute_vocabs[static_cast<std::size_t>(a)];
  }

  static bool contains(const std::vector<std::string>& v, std::string_view s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  }

  bool is_object(std::string_view c) const { return contains(object_vocab, c); }
  bool is_relation(std::string_view r) const { return contains(relation_vocab, r); }
  bool is_value(Attribute a, std::string_view v) const { return contains(vocab(a), v); }

  void validate() const {
    auto unique = [](const std::vector<std::string>& v, const std::string& what) {
      std::set<std::string> seen;
      for (const auto& s : v)
        if (!seen.insert(s).second) throw DataError("taxonomy: duplicate " + what + " '" + s + "'");
    };
    unique(object_vocab, "object class");
    unique(relation_vocab, "relation");
    for (Attribute a : kAttributes) unique(vocab(a), std::string(attribute_name(a)) + " value");
    for (const auto& c : excluded_classes)
      if (is_object(c)) throw DataError("taxonomy: class '" + c + "' is both excluded and questionable");
    for (const auto& [raw, target] : class_remap)
      if (!is_object(target) && !excluded_classes.count(target))
        throw DataError("taxonomy: remap target '" + target + "' for '" + raw + "' is not in the vocabulary");
  }

  /// Same vocabularies, with a remap that sends every known class to itself.
  Taxonomy identity() const {
    Taxonomy t = *this;
    t.class_remap.clear();
    for (const auto& c : object_vocab) t.class_remap[c] = c;
    for (const auto& c : excluded_classes) t.class_remap[c] = c;
    return t;
  }

  static Taxonomy from_json(const Json& j) {
    if (!j.is_object()) throw DataError("taxonomy: expected an object");
    Taxonomy t;
    try {
      if (j.contains("remap")) t.class_remap = j.at("remap").get<std::map<std::string, std::string>>();
      t.object_vocab = j.at("objects").get<std::vector<std::string>>();
      const Json& attrs = j.at("attributes");
      for (Attribute a : kAttributes) {
        auto key = std::string(attribute_name(a));
        if (attrs.contains(key)) t.attribute_vocabs[static_cast<std::size_t>(a)] = attrs.at(key).get<std::vector<std::string>>();
      }
      t.relation_vocab = j.at("relations").get<std::vector<std::string>>();
      if (j.contains("excluded")) {
        for (const auto& c : j.at("excluded")) t.excluded_classes.insert(c.get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("taxonomy: ") + e.what());
    }
    t.validate();
    return t;
  }

  Json to_json() const {
    Json attrs = Json::object();
    for (Attribute a : kAttributes) attrs[std::string(attribute_name(a))] = vocab(a);
    return {{"remap", class_remap},
            {"objects", object_vocab},
            {"attributes", attrs},
            {"relations", relation_vocab},
            {"excluded", excluded_classes}};
  }
};

// ---------------------------------------------------------------------------
// Scene documents

inline SceneGraph scene_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("scene document: expected an object");
  std::string scene_id = "?";
  try {
    scene_id = j.at("scene_id").get<std::string>();
    std::vector<ObjectNode> nodes;
    for (const Json& o : j.at("objects")) {
      ObjectNode n;
      n.id = o.at("id").get<int>();
      n.class_label = o.at("class").get<std::string>();
      if (o.contains("attributes")) {
        for (const auto& [key, value] : o.at("attributes").items()) {
          auto a = attribute_from_name(key);
          if (!a) throw DataError("unknown attribute '" + key + "' on node " + std::to_string(n.id));
          if (!value.is_null()) n.attribute(*a) = value.get<std::string>();
        }
      }
      if (o.contains("center")) n.center = o.at("center").get<std::array<double, 3>>();
      if (o.contains("size")) n.size = o.at("size").get<std::array<double, 3>>();
      if (o.contains("orientation")) n.orientation = wrap_angle(o.at("orientation").get<double>());
      nodes.push_back(std::move(n));
    }
    std::vector<RelationEdge> edges;
    if (j.contains("relations")) {
      for (const Json& r : j.at("relations")) {
        if (!r.is_array() || r.size() != 3) throw DataError("relation must be [subject, predicate, object]");
        edges.push_back({r[0].get<int>(), r[1].get<std::string>(), r[2].get<int>()});
      }
    }
    return SceneGraph(scene_id, std::move(nodes), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("scene '" + scene_id + "': malformed document: " + e.what());
  } catch (const DataError& e) {
    std::string msg = e.what();
    if (msg.rfind("scene '", 0) == 0) throw;
    throw DataError("scene '" + scene_id + "': " + msg);
  }
}

inline Json scene_to_json(const SceneGraph& g) {
  Json objects = Json::array();
  for (const ObjectNode& n : g.nodes()) {
    Json attrs = Json::object();
    for (Attribute a : kAttributes)
      if (n.attribute(a)) attrs[std::string(attribute_name(a))] = *n.attribute(a);
    objects.push_back({{"id", n.id},
                       {"class", n.class_label},
                       {"attributes", attrs},
                       {"center", n.center},
                       {"size", n.size},
                       {"orientation", n.orientation}});
  }
  Json relations = Json::array();
  for (const RelationEdge& e : g.edges()) relations.push_back(Json::array({e.subject_id, e.predicate, e.object_id}));
  return {{"scene_id", g.scene_id()}, {"objects", objects}, {"relations", relations}};
}

inline SceneGraph load_scene_graph(const std::string& text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("scene document: malformed JSON");
  return scene_from_json(j);
}

/// Loads every scene in a file (single object, array, or JSON Lines).
/// Scene ids must be unique across the file.
inline std::vector<SceneGraph> load_scene_file(const std::filesystem::path& path) {
  std::vector<SceneGraph> scenes;
  std::set<std::string> ids;
  for (const Document& d : read_documents(path)) {
    try {
      scenes.push_back(scene_from_json(d.value));
    } catch (const DataError& e) {
      throw DataError(d.where() + ": " + e.what());
    }
    if (!ids.insert(scenes.back().scene_id()).second)
      throw DataError(d.where() + ": duplicate scene_id '" + scenes.back().scene_id() + "'");
  }
  return scenes;
}

inline Taxonomy load_taxonomy_file(const std::filesystem::path& path) {
  auto docs = read_documents(path);
  if (docs.size() != 1) throw DataError(path.string() + ": expected exactly one taxonomy object");
  try {
    return Taxonomy::from_json(docs.front().value);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Normalization

/// Remaps raw classes through the taxonomy and removes excluded objects with
/// all their incident edges. Attribute values and predicates pass through
/// unchanged but must belong to the taxonomy vocabularies.
inline SceneGraph normalize(const SceneGraph& g, const Taxonomy& t) {
  std::vector<ObjectNode> nodes;
  std::set<int> dropped;
  for (ObjectNode n : g.nodes()) {
    auto it = t.class_remap.find(n.class_label);
    if (it == t.class_remap.end())
      throw DataError("scene '" + g.scene_id() + "': unmapped class '" + n.class_label + "' on node " +
                      std::to_string(n.id));
    n.class_label = it->second;
    if (t.excluded_classes.count(n.class_label)) {
      dropped.insert(n.id);
      continue;
    }
    for (Attribute a : kAttributes) {
      if (n.attribute(a) && !t.is_value(a, *n.attribute(a)))
        throw DataError("scene '" + g.scene_id() + "': " + std::string(attribute_name(a)) + " value '" +
                        *n.attribute(a) + "' on node " + std::to_string(n.id) + " is not in the vocabulary");
    }
    nodes.push_back(std::move(n));
  }
  std::vector<RelationEdge> edges;
  for (const RelationEdge& e : g.edges()) {
    if (dropped.count(e.subject_id) || dropped.count(e.object_id)) continue;
    if (!t.is_relation(e.predicate))
      throw DataError("scene '" + g.scene_id() + "': predicate '" + e.predicate + "' is not in the vocabulary");
    edges.push_back(e);
  }
  return SceneGraph(g.scene_id(), std::move(nodes), std::move(edges));
}

// ---------------------------------------------------------------------------
// Instance partitioning

using Point = std::array<double, 6>;  // x, y, z, r, g, b

/// Point-to-instance labels in {1..instance_count}, one per point.
struct InstanceIndicator {
  std::vector<Point> points;
  std::vector<int> labels;
  int instance_count = 0;
};

/// Splits the point cloud into per-instance clouds; entry i-1 holds the points
/// labeled i, in input order.
inline std::vector<std::vector<Point>> partition_instances(const InstanceIndicator& ind) {
  if (ind.labels.size() != ind.points.size())
    throw DataError("instance indicator: " + std::to_string(ind.labels.size()) + " labels for " +
                    std::to_string(ind.points.size()) + " points");
  if (ind.instance_count < 0) throw DataError("instance indicator: negative instance count");
  std::vector<std::vector<Point>> out(static_cast<std::size_t>(ind.instance_count));
  for (std::size_t n = 0; n < ind.points.size(); ++n) {
    int label = ind.labels[n];
    if (label < 1 || label > ind.instance_count)
      throw DataError("instance indicator: label " + std::to_string(label) + " of point " + std::to_string(n) +
                      " outside 1.." + std::to_string(ind.instance_count));
    out[static_cast<std::size_t>(label - 1)].push_back(ind.points[n]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

/// Derives one predicate from box geometry. Strict rules are irreflexive and
/// antisymmetric; `near` is symmetric.
struct SpatialRule {
  enum class Kind { axis_less, axis_greater, volume_greater, volume_less, near };

  std::string predicate;
  Kind kind = Kind::axis_less;
  int axis = 0;
  double radius = 1.0;

  bool strict() const { return kind != Kind::near; }

  bool holds(const ObjectNode& s, const ObjectNode& o) const {
    switch (kind) {
      case Kind::axis_less: return s.center[axis] < o.center[axis];
      case Kind::axis_greater: return s.center[axis] > o.center[axis];
      case Kind::volume_greater: return s.volume() > o.volume();
      case Kind::volume_less: return s.volume() < o.volume();
      case Kind::near: {
        double d2 = 0;
        for (int k = 0; k < 3; ++k) d2 += (s.center[k] - o.center[k]) * (s.center[k] - o.center[k]);
        return d2 < radius * radius;
      }
    }
    return false;
  }
};

using SpatialRuleSet = std::vector<SpatialRule>;

inline SpatialRuleSet default_spatial_rules() {
  using K = SpatialRule::Kind;
  return {{"left", K::axis_less, 0},          {"right", K::axis_greater, 0},
          {"front", K::axis_less, 1},         {"behind", K::axis_greater, 1},
          {"lower than", K::axis_less, 2},    {"higher than", K::axis_greater, 2},
          {"bigger than", K::volume_greater}, {"smaller than", K::volume_less},
          {"close by", K::near, 0, 1.5}};
}

struct SynthOptions {
  double extent = 4.0;  // centers uniform in [-extent, extent]^2 x [0, extent/2]
  double min_box = 0.2;
  double max_box = 2.0;
  double attribute_presence = 0.85;
};

/// Random scene for tests and desk-scale corpora. Classes and attribute values
/// are uniform over the taxonomy; edges come from `rules` over every ordered
/// pair. Deterministic in `seed`.
inline SceneGraph synth_scene(std::uint64_t seed, std::size_t n_objects, const Taxonomy& taxonomy,
                              const SpatialRuleSet& rules, std::string scene_id = {},
                              const SynthOptions& opt = {}) {
  if (scene_id.empty()) scene_id = "synth-" + std::to_string(seed);
  for (const SpatialRule& r : rules)
    if (!taxonomy.is_relation(r.predicate))
      throw std::invalid_argument("synth_scene: rule predicate '" + r.predicate + "' is not in the taxonomy");
  if (n_objects > 0 && taxonomy.object_vocab.empty())
    throw std::invalid_argument("synth_scene: empty object vocabulary");

  Rng rng(seed);
  std::vector<ObjectNode> nodes;
  nodes.reserve(n_objects);
  for (std::size_t i = 0; i < n_objects; ++i) {
    ObjectNode n;
    n.id = static_cast<int>(i) + 1;
    n.class_label = taxonomy.object_vocab[rng.below(taxonomy.object_vocab.size())];
    for (Attribute a : kAttributes) {
      const auto& v = taxonomy.vocab(a);
      bool present = rng.bernoulli(opt.attribute_presence);
      std::size_t pick = v.empty() ? 0 : rng.below(v.size());
      if (present && !v.empty()) n.attribute(a) = v[pick];
    }
    n.center = {rng.uniform(-opt.extent, opt.extent), rng.uniform(-opt.extent, opt.extent),
                rng.uniform(0.0, opt.extent / 2)};
    for (double& s : n.size) s = rng.uniform(opt.min_box, opt.max_box);
    n.orientation = rng.uniform(-std::numbers::pi, std::numbers::pi);
    nodes.push_back(std::move(n));
  }
  std::vector<RelationEdge> edges;
  for (const SpatialRule& r : rules)
    for (const ObjectNode& s : nodes)
      for (const ObjectNode& o : nodes)
        if (s.id != o.id && r.holds(s, o)) edges.push_back({s.id, r.predicate, o.id});
  return SceneGraph(std::move(scene_id), std::move(nodes), std::move(edges));
}

/// `count` scenes named scene-00000, scene-00001, ... with object counts
/// uniform in [min_objects, max_objects]. Scene i depends only on (seed, i).
inline std::vector<SceneGraph> synth_scenes(std::uint64_t seed, std::size_t count, std::size_t min_objects,
                                            std::size_t max_objects, const Taxonomy& taxonomy,
                                            const SpatialRuleSet& rules = default_spatial_rules(),
                                            const SynthOptions& opt = {}) {
  if (min_objects > max_objects) throw std::invalid_argument("synth_scenes: min_objects > max_objects");
  std::vector<SceneGraph> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "scene-%05zu", i);
    Rng rng = Rng::stream(seed, id);
    const std::size_t n = min_objects + rng.below(max_objects - min_objects + 1);
    scenes.push_back(synth_scene(rng.next(), n, taxonomy, rules, id, opt));
  }
  return scenes;
}

}  // namespace sgqa
