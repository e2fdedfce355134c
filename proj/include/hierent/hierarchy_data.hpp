#ifndef HIERENT_HIERARCHY_DATA_HPP_
#define HIERENT_HIERARCHY_DATA_HPP_

//! \file hierarchy_data.hpp
//! Bounding-box annotations -> entailment pairs -> label hierarchy tree.
//!
//! Within an image the scene entails every box, and a larger box entails a
//! smaller one when enough of the smaller box lies inside it. Scenes also entail
//! up to K same-label boxes sampled from other images. Box-to-box label
//! co-occurrence statistics, thresholded on frequency and proportion, form the
//! per-label hierarchy used as retrieval ground truth.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace hierent {

/// Axis-aligned box in normalized image coordinates.
struct Box {
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;

  static constexpr Box full_image() { return Box{0.0, 0.0, 1.0, 1.0}; }
  double area() const { return std::max(0.0, xmax - xmin) * std::max(0.0, ymax - ymin); }
  bool valid() const {
    return xmin < xmax && ymin < ymax && xmin >= 0.0 && ymin >= 0.0 && xmax <= 1.0 && ymax <= 1.0;
  }
  friend bool operator==(const Box&, const Box&) = default;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double h = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  return w > 0.0 && h > 0.0 ? w * h : 0.0;
}

struct BoundingBox {
  std::string image_id;
  std::string box_id;
  Box box;
  std::string label;
  bool is_group_of = false;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class PairKind { scene_to_box, box_to_box, cross_image };

inline const char* to_string(PairKind k) {
  switch (k) {
    case PairKind::scene_to_box: return "scene_to_box";
    case PairKind::box_to_box: return "box_to_box";
    case PairKind::cross_image: return "cross_image";
  }
  return "?";
}

inline PairKind pair_kind_from_string(const std::string& s) {
  if (s == "scene_to_box") return PairKind::scene_to_box;
  if (s == "box_to_box") return PairKind::box_to_box;
  if (s == "cross_image") return PairKind::cross_image;
  throw std::invalid_argument("unknown pair kind: " + s);
}

struct EntailmentPair {
  std::string parent_id;
  std::string child_id;
  PairKind kind = PairKind::scene_to_box;
  friend bool operator==(const EntailmentPair&, const EntailmentPair&) = default;
  friend auto operator<=>(const EntailmentPair& a, const EntailmentPair& b) {
    return std::tie(a.parent_id, a.child_id, a.kind) <=> std::tie(b.parent_id, b.child_id, b.kind);
  }
};

// ---------------------------------------------------------------------------
// Annotation loading

struct AnnotationDiagnostic {
  std::size_t line = 0;
  std::string message;
};

class AnnotationError : public std::runtime_error {
 public:
  explicit AnnotationError(std::vector<AnnotationDiagnostic> diags)
      : std::runtime_error(format(diags)), diagnostics_(std::move(diags)) {}
  const std::vector<AnnotationDiagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string format(const std::vector<AnnotationDiagnostic>& diags) {
    std::string s = "invalid annotations:";
    for (const auto& d : diags) s += "\n  line " + std::to_string(d.line) + ": " + d.message;
    return s;
  }
  std::vector<AnnotationDiagnostic> diagnostics_;
};

enum class ParseMode { strict, lenient };

struct AnnotationSet {
  std::vector<BoundingBox> boxes;
  std::vector<AnnotationDiagnostic> diagnostics;
};

namespace detail {

inline BoundingBox parse_box_record(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  BoundingBox b;
  b.image_id = j.at("image_id").get<std::string>();
  b.box_id = j.at("box_id").get<std::string>();
  b.label = j.at("label").get<std::string>();
  b.is_group_of = j.value("is_group_of", false);
  const auto& c = j.at("box");
  if (!c.is_array() || c.size() != 4) throw std::invalid_argument("box must be [xmin,ymin,xmax,ymax]");
  b.box = Box{c[0].get<double>(), c[1].get<double>(), c[2].get<double>(), c[3].get<double>()};
  if (b.image_id.empty() || b.box_id.empty()) throw std::invalid_argument("empty image_id or box_id");
  if (b.image_id == b.box_id) throw std::invalid_argument("box_id equals image_id");
  if (!(b.box.xmin < b.box.xmax) || !(b.box.ymin < b.box.ymax)) {
    throw std::invalid_argument("box needs xmin < xmax and ymin < ymax");
  }
  if (!b.box.valid()) throw std::invalid_argument("box coordinates outside [0, 1]");
  return b;
}

}  // namespace detail

/// JSONL, one box per line; blank lines are skipped. Strict mode throws with every
/// offending line; lenient mode keeps valid records and reports the rest.
inline AnnotationSet parse_annotations(std::istream& in, ParseMode mode = ParseMode::strict) {
  AnnotationSet out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto b = detail::parse_box_record(line);
      if (!seen.insert(b.box_id).second) throw std::invalid_argument("duplicate box_id " + b.box_id);
      out.boxes.push_back(std::move(b));
    } catch (const std::exception& e) {
      out.diagnostics.push_back({lineno, e.what()});
    }
  }
  if (mode == ParseMode::strict && !out.diagnostics.empty()) throw AnnotationError(out.diagnostics);
  for (const auto& d : out.diagnostics) spdlog::warn("annotations line {}: {}", d.line, d.message);
  return out;
}

inline AnnotationSet load_annotations(const std::string& path, ParseMode mode = ParseMode::strict) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotations: " + path);
  return parse_annotations(in, mode);
}

inline void write_annotations(std::ostream& os, const std::vector<BoundingBox>& boxes) {
  for (const auto& b : boxes) {
    nlohmann::ordered_json j;
    j["image_id"] = b.image_id;
    j["box_id"] = b.box_id;
    j["box"] = {b.box.xmin, b.box.ymin, b.box.xmax, b.box.ymax};
    j["label"] = b.label;
    j["is_group_of"] = b.is_group_of;
    os << j.dump() << "\n";
  }
}

/// Converts an OpenImages-style box CSV (header with ImageID, LabelName, XMin,
/// XMax, YMin, YMax and optionally IsGroupOf; unquoted fields) to box records.
/// Box ids are "<ImageID>_<row>".
inline std::vector<BoundingBox> convert_openimages_csv(std::istream& in) {
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      f.push_back(cell);
    }
    return f;
  };
  std::string line;
  if (!std::getline(in, line)) return {};
  const auto header = split(line);
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto img = col("ImageID"), lab = col("LabelName"), x0 = col("XMin"), x1 = col("XMax"),
             y0 = col("YMin"), y1 = col("YMax"), grp = col("IsGroupOf");
  if (!img || !lab || !x0 || !x1 || !y0 || !y1) throw std::invalid_argument("CSV header lacks box columns");
  std::vector<BoundingBox> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const auto f = split(line);
    if (f.size() < header.size()) continue;
    BoundingBox b;
    b.image_id = f[*img];
    b.box_id = f[*img] + "_" + std::to_string(row++);
    b.label = f[*lab];
    b.box = Box{std::stod(f[*x0]), std::stod(f[*y0]), std::stod(f[*x1]), std::stod(f[*y1])};
    b.is_group_of = grp && f[*grp] == "1";
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Filtering and containment

/// Drops boxes covering less than min_area_fraction of the image (inclusive keep).
inline std::vector<BoundingBox> filter_boxes(const std::vector<BoundingBox>& boxes,
                                             double min_area_fraction = 0.01) {
  std::vector<BoundingBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    if (b.box.area() >= min_area_fraction - 1e-12) out.push_back(b);
  }
  return out;
}

/// area(inner & outer) / area(inner) >= threshold.
inline bool containment(const Box& outer, const Box& inner, double threshold = 0.80) {
  const double a = inner.area();
  if (!(a > 0.0)) throw std::invalid_argument("containment: zero-area inner box");
  return intersection_area(outer, inner) / a >= threshold - 1e-12;
}

struct PairRules {
  double containment_threshold = 0.80;
  bool drop_group_of_children = true;  // group-of boxes never act as box_to_box children
};

/// Scene->box pairs for every box, then larger->smaller box pairs passing
/// containment. Boxes of equal area never entail each other.
inline std::vector<EntailmentPair> within_image_pairs(const std::string& image_id,
                                                      const std::vector<BoundingBox>& boxes,
                                                      const PairRules& rules = {}) {
  std::vector<EntailmentPair> out;
  for (const auto& b : boxes) {
    if (b.image_id != image_id) throw std::invalid_argument("box " + b.box_id + " is not in image " + image_id);
    out.push_back({image_id, b.box_id, PairKind::scene_to_box});
  }
  for (const auto& big : boxes) {
    for (const auto& small : boxes) {
      if (&big == &small) continue;
      if (rules.drop_group_of_children && small.is_group_of) continue;
      if (!(big.box.area() > small.box.area())) continue;
      if (containment(big.box, small.box, rules.containment_threshold)) {
        out.push_back({big.box_id, small.box_id, PairKind::box_to_box});
      }
    }
  }
  return out;
}

/// Boxes grouped by image and by label, both in a fixed order.
class AnnotationIndex {
 public:
  explicit AnnotationIndex(std::vector<BoundingBox> boxes) : boxes_(std::move(boxes)) {
    std::sort(boxes_.begin(), boxes_.end(), [](const BoundingBox& a, const BoundingBox& b) {
      return std::tie(a.image_id, a.box_id) < std::tie(b.image_id, b.box_id);
    });
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
      by_image_[boxes_[i].image_id].push_back(i);
      by_label_[boxes_[i].label].push_back(i);
      by_id_.emplace(boxes_[i].box_id, i);
    }
  }

  const std::vector<BoundingBox>& boxes() const { return boxes_; }

  std::vector<std::string> image_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, _] : by_image_) ids.push_back(id);
    return ids;
  }

  std::vector<BoundingBox> image_boxes(const std::string& image_id) const {
    std::vector<BoundingBox> out;
    if (auto it = by_image_.find(image_id); it != by_image_.end()) {
      for (std::size_t i : it->second) out.push_back(boxes_[i]);
    }
    return out;
  }

  const std::vector<std::size_t>& label_boxes(const std::string& label) const {
    static const std::vector<std::size_t> none;
    auto it = by_label_.find(label);
    return it == by_label_.end() ? none : it->second;
  }

  const BoundingBox* find_box(const std::string& box_id) const {
    auto it = by_id_.find(box_id);
    return it == by_id_.end() ? nullptr : &boxes_[it->second];
  }

  bool is_image(const std::string& id) const { return by_image_.contains(id); }

 private:
  std::vector<BoundingBox> boxes_;
  std::map<std::string, std::vector<std::size_t>> by_image_;
  std::map<std::string, std::vector<std::size_t>> by_label_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// For each label in the image, up to K same-label boxes from other images,
/// sampled without replacement. Deterministic for a given seed.
inline std::vector<EntailmentPair> cross_image_pairs(const AnnotationIndex& index,
                                                     const std::string& image_id, std::size_t k,
                                                     std::uint64_t seed) {
  std::vector<EntailmentPair> out;
  if (k == 0) return out;
  std::set<std::string> labels;
  for (const auto& b : index.image_boxes(image_id)) labels.insert(b.label);
  for (const auto& label : labels) {
    std::vector<std::size_t> cand;
    for (std::size_t i : index.label_boxes(label)) {
      if (index.boxes()[i].image_id != image_id) cand.push_back(i);
    }
    if (cand.size() < k) {
      spdlog::debug("cross_image_pairs: {} has only {} other-image '{}' boxes", image_id,
                    cand.size(), label);
    }
    std::mt19937_64 rng(seed ^ detail::fnv1a(image_id + '\x1f' + label));
    const std::size_t take = std::min(k, cand.size());
    for (std::size_t t = 0; t < take; ++t) {
      const std::size_t pick = t + static_cast<std::size_t>(rng() % (cand.size() - t));
      std::swap(cand[t], cand[pick]);
      out.push_back({image_id, index.boxes()[cand[t]].box_id, PairKind::cross_image});
    }
  }
  return out;
}

struct PairGenerationConfig {
  PairRules rules;
  double min_area_fraction = 0.01;
  std::size_t cross_image_k = 1;
  std::uint64_t seed = 0;
};

/// Filtering, within-image pairs and cross-image pairs for every image, in
/// image-id order.
inline std::vector<EntailmentPair> make_pairs(const std::vector<BoundingBox>& boxes,
                                              const PairGenerationConfig& cfg) {
  const AnnotationIndex index(filter_boxes(boxes, cfg.min_area_fraction));
  std::vector<EntailmentPair> out;
  for (const auto& image : index.image_ids()) {
    auto w = within_image_pairs(image, index.image_boxes(image), cfg.rules);
    out.insert(out.end(), w.begin(), w.end());
    auto x = cross_image_pairs(index, image, cfg.cross_image_k, cfg.seed);
    out.insert(out.end(), x.begin(), x.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pair files: parent_id<TAB>child_id<TAB>kind

inline void write_pairs(std::ostream& os, const std::vector<EntailmentPair>& pairs) {
  for (const auto& p : pairs) os << p.parent_id << '\t' << p.child_id << '\t' << to_string(p.kind) << '\n';
}

inline std::vector<EntailmentPair> read_pairs(std::istream& in) {
  std::vector<EntailmentPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw std::runtime_error("pairs line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    EntailmentPair p{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), PairKind::scene_to_box};
    p.kind = pair_kind_from_string(line.substr(t2 + 1));
    if (p.parent_id == p.child_id) {
      throw std::runtime_error("pairs line " + std::to_string(lineno) + ": parent equals child");
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label statistics and the hierarchy tree

struct EdgeStats {
  std::size_t frequency = 0;
  double proportion = 0.0;
  friend bool operator==(const EdgeStats&, const EdgeStats&) = default;
};

using LabelEdge = std::pair<std::string, std::string>;
using EdgeStatistics = std::map<LabelEdge, EdgeStats>;

/// frequency: box_to_box occurrences of (parent label, child label).
/// proportion: share of parent-label boxes containing at least one child-label box.
inline EdgeStatistics edge_statistics(const std::vector<EntailmentPair>& pairs,
                                      const std::vector<BoundingBox>& boxes) {
  std::unordered_map<std::string, const BoundingBox*> by_id;
  std::map<std::string, std::size_t> label_count;
  for (const auto& b : boxes) {
    by_id.emplace(b.box_id, &b);
    ++label_count[b.label];
  }
  EdgeStatistics stats;
  std::map<LabelEdge, std::set<std::string>> parents_with_child;
  for (const auto& p : pairs) {
    if (p.kind != PairKind::box_to_box) continue;
    const auto pi = by_id.find(p.parent_id), ci = by_id.find(p.child_id);
    if (pi == by_id.end() || ci == by_id.end()) {
      throw std::invalid_argument("edge_statistics: unresolved box id in pair " + p.parent_id + " -> " + p.child_id);
    }
    const LabelEdge e{pi->second->label, ci->second->label};
    ++stats[e].frequency;
    parents_with_child[e].insert(p.parent_id);
  }
  for (auto& [e, s] : stats) {
    s.proportion = static_cast<double>(parents_with_child[e].size()) /
                   static_cast<double>(label_count[e.first]);
  }
  return stats;
}

class HierarchyTree {
 public:
  void add_edge(const std::string& parent, const std::string& child, EdgeStats s) {
    edges_[{parent, child}] = s;
    nodes_.insert(parent);
    nodes_.insert(child);
  }
  void remove_edge(const LabelEdge& e) { edges_.erase(e); }
  void add_node(const std::string& label) { nodes_.insert(label); }

  const std::set<std::string>& nodes() const { return nodes_; }
  const std::map<LabelEdge, EdgeStats>& edges() const { return edges_; }
  bool empty() const { return edges_.empty(); }
  bool has_edge(const std::string& p, const std::string& c) const { return edges_.contains({p, c}); }

  std::vector<std::string> children(const std::string& label) const {
    std::vector<std::string> out;
    for (auto it = edges_.lower_bound({label, std::string()}); it != edges_.end() && it->first.first == label; ++it) {
      out.push_back(it->first.second);
    }
    return out;
  }

  std::vector<std::string> parents(const std::string& label) const {
    std::vector<std::string> out;
    for (const auto& [e, _] : edges_) {
      if (e.second == label) out.push_back(e.first);
    }
    return out;
  }

  /// Labels reachable from `labels` along edges, excluding the inputs.
  std::set<std::string> descendants(const std::set<std::string>& labels) const {
    return reach(labels, [this](const std::string& l) { return children(l); });
  }

  /// Labels from which some input is reachable, excluding the inputs.
  std::set<std::string> ancestors(const std::set<std::string>& labels) const {
    return reach(labels, [this](const std::string& l) { return parents(l); });
  }

  /// Kahn order; nullopt when a directed cycle remains.
  std::optional<std::vector<std::string>> topological_order() const {
    std::map<std::string, std::size_t> indeg;
    for (const auto& n : nodes_) indeg[n] = 0;
    for (const auto& [e, _] : edges_) ++indeg[e.second];
    std::queue<std::string> q;
    for (const auto& [n, d] : indeg) {
      if (d == 0) q.push(n);
    }
    std::vector<std::string> order;
    while (!q.empty()) {
      auto n = q.front();
      q.pop();
      order.push_back(n);
      for (const auto& c : children(n)) {
        if (--indeg[c] == 0) q.push(c);
      }
    }
    if (order.size() != nodes_.size()) return std::nullopt;
    return order;
  }

  /// One directed cycle as a list of edges, if any.
  std::optional<std::vector<LabelEdge>> find_cycle() const {
    std::map<std::string, int> color;  // 0 white, 1 on stack, 2 done
    std::vector<std::string> stack;
    std::optional<std::vector<LabelEdge>> found;
    std::function<bool(const std::string&)> dfs = [&](const std::string& n) {
      color[n] = 1;
      stack.push_back(n);
      for (const auto& c : children(n)) {
        if (color[c] == 1) {
          std::vector<LabelEdge> cyc;
          auto it = std::find(stack.begin(), stack.end(), c);
          for (; it + 1 != stack.end(); ++it) cyc.emplace_back(*it, *(it + 1));
          cyc.emplace_back(n, c);
          found = std::move(cyc);
          return true;
        }
        if (color[c] == 0 && dfs(c)) return true;
      }
      stack.pop_back();
      color[n] = 2;
      return false;
    };
    for (const auto& n : nodes_) {
      if (color[n] == 0 && dfs(n)) break;
    }
    return found;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& [e, s] : edges_) {
      j["edges"].push_back({{"parent", e.first}, {"child", e.second}, {"frequency", s.frequency},
                            {"proportion", s.proportion}});
    }
    return j;
  }

  static HierarchyTree from_json(const nlohmann::json& j) {
    HierarchyTree t;
    for (const auto& e : j.at("edges")) {
      t.add_edge(e.at("parent").get<std::string>(), e.at("child").get<std::string>(),
                 EdgeStats{e.at("frequency").get<std::size_t>(), e.at("proportion").get<double>()});
    }
    return t;
  }

  friend bool operator==(const HierarchyTree&, const HierarchyTree&) = default;

 private:
  template <class Next>
  std::set<std::string> reach(const std::set<std::string>& labels, Next next) const {
    std::set<std::string> seen;
    std::queue<std::string> q;
    for (const auto& l : labels) {
      if (!nodes_.contains(l)) {
        spdlog::debug("hierarchy: label '{}' not in tree, ignored", l);
        continue;
      }
      q.push(l);
    }
    while (!q.empty()) {
      auto l = q.front();
      q.pop();
      for (const auto& n : next(l)) {
        if (seen.insert(n).second) q.push(n);
      }
    }
    for (const auto& l : labels) seen.erase(l);
    return seen;
  }

  std::set<std::string> nodes_;
  std::map<LabelEdge, EdgeStats> edges_;
};

/// Keeps edges with frequency >= freq_threshold and proportion >= prop_threshold,
/// drops self-loops, then removes the weakest edge of each remaining directed
/// cycle (lowest frequency, then proportion, then label order) until acyclic.
inline HierarchyTree build_hierarchy_tree(const EdgeStatistics& stats, double freq_threshold = 50,
                                          double prop_threshold = 0.10) {
  HierarchyTree t;
  for (const auto& [e, s] : stats) {
    if (static_cast<double>(s.frequency) < freq_threshold || s.proportion < prop_threshold - 1e-12) continue;
    if (e.first == e.second) {
      spdlog::info("hierarchy: dropping self-loop on '{}'", e.first);
      continue;
    }
    t.add_edge(e.first, e.second, s);
  }
  while (auto cycle = t.find_cycle()) {
    const auto weakest = *std::min_element(cycle->begin(), cycle->end(), [&](const LabelEdge& a, const LabelEdge& b) {
      const auto& sa = t.edges().at(a);
      const auto& sb = t.edges().at(b);
      return std::tie(sa.frequency, sa.proportion, a) < std::tie(sb.frequency, sb.proportion, b);
    });
    spdlog::info("hierarchy: breaking cycle by removing '{}' -> '{}'", weakest.first, weakest.second);
    t.remove_edge(weakest);
  }
  return t;
}

inline void write_tree(std::ostream& os, const HierarchyTree& t) { os << t.to_json().dump(2) << "\n"; }

inline HierarchyTree read_tree(std::istream& in) { return HierarchyTree::from_json(nlohmann::json::parse(in)); }

// ---------------------------------------------------------------------------
// Node catalog: node_id<TAB>label[,label...]<TAB>group

struct NodeInfo {
  std::string id;
  std::vector<std::string> labels;
  std::string group;
  friend bool operator==(const NodeInfo&, const NodeInfo&) = default;
};

/// Every node in id order.
class NodeCatalog {
 public:
  void add(NodeInfo n) {
    auto id = n.id;
    nodes_[id] = std::move(n);
  }
  const NodeInfo* find(const std::string& id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
  }
  const NodeInfo& at(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw std::out_of_range("unknown node: " + id);
    return it->second;
  }
  std::size_t size() const { return nodes_.size(); }
  auto begin() const { return nodes_.begin(); }
  auto end() const { return nodes_.end(); }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : nodes_) out.push_back(id);
    return out;
  }

 private:
  std::map<std::string, NodeInfo> nodes_;
};

/// Images become "scene" nodes labelled with their box labels; boxes become
/// "part" when some other box entails them and "object" otherwise.
inline NodeCatalog build_catalog(const std::vector<BoundingBox>& boxes,
                                 const std::vector<EntailmentPair>& pairs) {
  std::set<std::string> nested;
  for (const auto& p : pairs) {
    if (p.kind == PairKind::box_to_box) nested.insert(p.child_id);
  }
  std::map<std::string, std::set<std::string>> image_labels;
  NodeCatalog cat;
  for (const auto& b : boxes) {
    image_labels[b.image_id].insert(b.label);
    cat.add({b.box_id, {b.label}, nested.contains(b.box_id) ? "part" : "object"});
  }
  for (const auto& [img, labels] : image_labels) {
    cat.add({img, std::vector<std::string>(labels.begin(), labels.end()), "scene"});
  }
  return cat;
}

inline void write_catalog(std::ostream& os, const NodeCatalog& cat) {
  for (const auto& [id, n] : cat) {
    os << id << '\t';
    for (std::size_t i = 0; i < n.labels.size(); ++i) os << (i ? "," : "") << n.labels[i];
    os << '\t' << n.group << '\n';
  }
}

inline NodeCatalog read_catalog(std::istream& in) {
  NodeCatalog cat;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() != 3) throw std::runtime_error("nodes line " + std::to_string(lineno) + ": expected 3 fields");
    NodeInfo n{f[0], {}, f[2]};
    std::stringstream ls(f[1]);
    while (std::getline(ls, cell, ',')) {
      if (!cell.empty()) n.labels.push_back(cell);
    }
    cat.add(std::move(n));
  }
  return cat;
}

}  // namespace hierent

#endif  // HIERENT_HIERARCHY_DATA_HPP_
