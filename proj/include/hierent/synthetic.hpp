#ifndef HIERENT_SYNTHETIC_HPP_
#define HIERENT_SYNTHETIC_HPP_

//! \file synthetic.hpp
//! Desk-scale fixtures: a balanced label tree whose nodes are their own labels,
//! and a generator of nested-box scenes with a known part hierarchy.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hierent/hierarchy_data.hpp"

namespace hierent::synthetic {

struct TreeFixture {
  std::vector<std::string> node_ids;  // breadth-first order, root first
  std::vector<std::size_t> depth;
  std::vector<std::optional<std::size_t>> parent;
  std::vector<EntailmentPair> pairs;
  HierarchyTree tree;
  NodeCatalog catalog;

  std::size_t size() const { return node_ids.size(); }

  bool is_ancestor(std::size_t a, std::size_t b) const {
    for (auto p = parent[b]; p; p = parent[*p]) {
      if (*p == a) return true;
    }
    return false;
  }
};

inline const char* depth_group(std::size_t depth) {
  return depth == 0 ? "scene" : depth == 1 ? "object" : "part";
}

/// Balanced tree with `depth` levels below the root and `branching` children
/// per node (depth 3, branching 3 gives 40 nodes). Node i is labelled "n<i>".
/// With `transitive` every ancestor->descendant pair is emitted, mirroring how
/// a scene entails all of its nested boxes; otherwise only direct edges.
inline TreeFixture balanced_tree(std::size_t depth, std::size_t branching, bool transitive = true) {
  TreeFixture f;
  f.node_ids.push_back("n0");
  f.depth.push_back(0);
  f.parent.push_back(std::nullopt);
  for (std::size_t i = 0; i < f.node_ids.size(); ++i) {
    if (f.depth[i] == depth) continue;
    for (std::size_t b = 0; b < branching; ++b) {
      f.node_ids.push_back("n" + std::to_string(f.node_ids.size()));
      f.depth.push_back(f.depth[i] + 1);
      f.parent.push_back(i);
    }
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.catalog.add({f.node_ids[i], {f.node_ids[i]}, depth_group(f.depth[i])});
    f.tree.add_node(f.node_ids[i]);
    if (f.parent[i]) f.tree.add_edge(f.node_ids[*f.parent[i]], f.node_ids[i], {1, 1.0});
  }
  for (std::size_t a = 0; a < f.size(); ++a) {
    for (std::size_t b = 0; b < f.size(); ++b) {
      const bool direct = f.parent[b] && *f.parent[b] == a;
      if (direct || (transitive && f.is_ancestor(a, b))) {
        f.pairs.push_back({f.node_ids[a], f.node_ids[b],
                           f.depth[a] == 0 ? PairKind::scene_to_box : PairKind::box_to_box});
      }
    }
  }
  return f;
}

/// Label taxonomy used by scene_boxes(): each object label has part labels that
/// are drawn nested inside it.
struct SceneTaxonomy {
  struct Object {
    std::string label;
    std::vector<std::string> parts;
  };
  std::vector<Object> objects;

  static SceneTaxonomy street() {
    return {{{"car", {"wheel", "mirror", "plate"}},
             {"bicycle", {"wheel", "saddle"}},
             {"person", {"face", "hand", "hat"}},
             {"house", {"window", "door"}},
             {"tree", {}}}};
  }
};

/// Random scenes: each image holds 1-3 objects in disjoint horizontal strips,
/// each object holds a random subset of its parts fully inside it.
inline std::vector<BoundingBox> scene_boxes(const SceneTaxonomy& tax, std::size_t images, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<BoundingBox> out;
  for (std::size_t i = 0; i < images; ++i) {
    const std::string img = "img" + std::to_string(i);
    const std::size_t n_obj = 1 + rng() % 3;
    const double strip = 1.0 / static_cast<double>(n_obj);
    std::size_t box_no = 0;
    for (std::size_t k = 0; k < n_obj; ++k) {
      const auto& obj = tax.objects[rng() % tax.objects.size()];
      const double x0 = k * strip + 0.02, x1 = (k + 1) * strip - 0.02;
      const double y0 = 0.05 + 0.1 * u(rng), y1 = 0.85 + 0.1 * u(rng);
      out.push_back({img, img + "_b" + std::to_string(box_no++), {x0, y0, x1, y1}, obj.label, false});
      std::size_t slot = 0;
      for (const auto& part : obj.parts) {
        if (u(rng) < 0.3) continue;
        const double py0 = y0 + 0.05 + 0.2 * static_cast<double>(slot++);
        out.push_back({img, img + "_b" + std::to_string(box_no++),
                       {x0 + 0.1 * (x1 - x0), py0, x1 - 0.1 * (x1 - x0), py0 + 0.15}, part, false});
      }
    }
  }
  return out;
}

}  // namespace hierent::synthetic

#endif  // HIERENT_SYNTHETIC_HPP_
