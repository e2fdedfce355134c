#ifndef HIERENT_REPORT_HPP_
#define HIERENT_REPORT_HPP_

//! \file report.hpp
//! End-to-end retrieval evaluation of a trained table against a node catalog
//! and a label hierarchy, producing the metrics report (JSON) and PR samples
//! (CSV).
//!
//! Hierarchical queries retrieve children from parents. The ground-truth label
//! set of a query is the hierarchy below its labels; a scene query also counts
//! its own labels, since a scene is one level above the boxes it contains.

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hierent/evaluation.hpp"

namespace hierent {

inline constexpr const char* kSceneGroup = "scene";

struct EvalConfig {
  ScoreKind score = ScoreKind::angle;
  std::vector<std::size_t> recall_ks{1, 5, 10};
  // Extra hierarchical-recall cutoffs; the exhaustive cutoff is always reported.
  std::vector<std::size_t> k_large;
  std::size_t pr_points = 64;
  std::size_t norm_bins = 10;
  // Reported as a single precision/recall point when set.
  std::optional<double> operating_threshold;
};

struct QueryMetrics {
  std::string query_id;
  std::size_t ground_truth = 0;  // candidate nodes in the query's hierarchy
  double recall_exhaustive = 0.0;
  double recall_at_gt = 0.0;     // at K = ground_truth
  std::map<std::size_t, double> recall_at;  // per configured K_large
  double ot = 0.0;               // label-distribution W1 at K = ground_truth
};

struct EvaluationReport {
  std::string space;
  std::vector<QueryMetrics> queries;
  std::size_t skipped_queries = 0;
  double mean_recall_exhaustive = 0.0;
  double mean_recall_at_gt = 0.0;
  std::map<std::size_t, double> mean_recall_at;
  double mean_ot = 0.0;
  std::map<std::size_t, RecallSummary> same_class_p2c;
  std::map<std::size_t, RecallSummary> same_class_c2p;
  std::vector<PrPoint> pr;
  double pr_area = 0.0;
  std::optional<PrPoint> operating_point;
  NormProfile norms;
};

/// Labels in the hierarchy rooted at a node, breadth-first from its own labels
/// with ties by name; this order places the W1 bins.
inline std::vector<std::string> ground_truth_labels(const NodeInfo& node, const HierarchyTree& tree) {
  const bool scene = node.group == kSceneGroup;
  std::vector<std::string> order;
  std::set<std::string> seen;
  std::vector<std::string> frontier(node.labels.begin(), node.labels.end());
  std::sort(frontier.begin(), frontier.end());
  for (const auto& l : frontier) seen.insert(l);
  if (scene) order = frontier;
  while (!frontier.empty()) {
    std::set<std::string> next;
    for (const auto& l : frontier) {
      for (const auto& c : tree.children(l)) {
        if (!seen.contains(c)) next.insert(c);
      }
    }
    frontier.assign(next.begin(), next.end());
    for (const auto& l : frontier) {
      seen.insert(l);
      order.push_back(l);
    }
  }
  return order;
}

namespace detail {

inline bool labels_overlap(const NodeInfo& a, const NodeInfo& b) {
  for (const auto& l : a.labels) {
    if (std::find(b.labels.begin(), b.labels.end(), l) != b.labels.end()) return true;
  }
  return false;
}

inline std::map<std::string, double> count_labels(const NodeCatalog& catalog,
                                                  const std::vector<std::string>& ids) {
  std::map<std::string, double> counts;
  for (const auto& id : ids) {
    for (const auto& l : catalog.at(id).labels) counts[l] += 1.0;
  }
  return counts;
}

}  // namespace detail

/// Runs the full protocol. Only catalog nodes present in the table take part.
inline EvaluationReport evaluate_hierarchy(const EmbeddingTable& table, const NodeCatalog& catalog,
                                           const HierarchyTree& tree, const EvalConfig& cfg = {}) {
  EvaluationReport rep;
  rep.space = to_string(table.kind());

  std::vector<std::string> nodes;
  std::map<std::string, std::string> group_of;
  for (const auto& [id, info] : catalog) {
    if (table.find(id)) {
      nodes.push_back(id);
      group_of[id] = info.group;
    }
  }

  std::vector<double> pr_scores;
  std::vector<bool> pr_labels;
  std::vector<RetrievalResult> p2c_results, c2p_results;
  std::vector<std::size_t> scene_rows, other_rows;
  for (const auto& id : nodes) {
    (catalog.at(id).group == kSceneGroup ? scene_rows : other_rows).push_back(table.index_of(id));
  }

  for (const auto& qid : nodes) {
    const auto& q = catalog.at(qid);
    const auto gt_labels = ground_truth_labels(q, tree);
    const std::set<std::string> gt_set(gt_labels.begin(), gt_labels.end());
    std::set<std::string> gt_nodes;
    std::vector<std::string> candidates;
    for (const auto& cid : nodes) {
      if (cid == qid) continue;
      candidates.push_back(cid);
      for (const auto& l : catalog.at(cid).labels) {
        if (gt_set.contains(l)) {
          gt_nodes.insert(cid);
          break;
        }
      }
    }
    if (gt_nodes.empty()) {
      ++rep.skipped_queries;
      continue;
    }
    const std::size_t qrow = table.index_of(qid);
    const auto full = rank_all(table, qrow, Direction::parent_to_child, cfg.score, candidates.size());

    QueryMetrics m;
    m.query_id = qid;
    m.ground_truth = gt_nodes.size();
    m.recall_exhaustive = *hierarchical_recall(full, gt_nodes, full.ranked.size());
    for (std::size_t k : cfg.k_large) m.recall_at[k] = *hierarchical_recall(full, gt_nodes, k);
    m.recall_at_gt = *hierarchical_recall(full, gt_nodes, gt_nodes.size());

    std::vector<std::string> gt_ids(gt_nodes.begin(), gt_nodes.end());
    std::map<std::string, double> gt_counts;
    for (const auto& [label, n] : detail::count_labels(catalog, gt_ids)) {
      if (gt_set.contains(label)) gt_counts[label] = n;
    }
    std::vector<std::string> top;
    for (std::size_t i = 0; i < std::min(gt_nodes.size(), full.ranked.size()); ++i) top.push_back(full.ranked[i].id);
    const auto h = label_distribution(gt_labels, gt_counts);
    const auto r = label_distribution(gt_labels, detail::count_labels(catalog, top));
    m.ot = ot_distance(h, r);
    rep.queries.push_back(m);

    for (const auto& c : full.ranked) {
      pr_scores.push_back(c.score);
      pr_labels.push_back(gt_nodes.contains(c.id));
    }
  }

  if (!rep.queries.empty()) {
    for (const auto& m : rep.queries) {
      rep.mean_recall_exhaustive += m.recall_exhaustive;
      rep.mean_recall_at_gt += m.recall_at_gt;
      rep.mean_ot += m.ot;
      for (const auto& [k, v] : m.recall_at) rep.mean_recall_at[k] += v;
    }
    const double n = static_cast<double>(rep.queries.size());
    rep.mean_recall_exhaustive /= n;
    for (auto& [k, v] : rep.mean_recall_at) v /= n;
    rep.mean_recall_at_gt /= n;
    rep.mean_ot /= n;
  }

  // Same-class retrieval between scenes and boxes.
  const std::size_t kmax = cfg.recall_ks.empty() ? 0 : *std::max_element(cfg.recall_ks.begin(), cfg.recall_ks.end());
  if (kmax > 0 && !scene_rows.empty() && !other_rows.empty()) {
    for (std::size_t q : scene_rows) {
      p2c_results.push_back(rank_candidates(table, q, other_rows, Direction::parent_to_child, cfg.score, kmax));
    }
    for (std::size_t q : other_rows) {
      c2p_results.push_back(rank_candidates(table, q, scene_rows, Direction::child_to_parent, cfg.score, kmax));
    }
    const RelevancePredicate same = [&](const std::string& a, const std::string& b) {
      return detail::labels_overlap(catalog.at(a), catalog.at(b));
    };
    for (std::size_t k : cfg.recall_ks) {
      rep.same_class_p2c[k] = recall_at_k(p2c_results, same, k);
      rep.same_class_c2p[k] = recall_at_k(c2p_results, same, k);
    }
  }

  if (std::find(pr_labels.begin(), pr_labels.end(), true) != pr_labels.end()) {
    rep.pr = pr_curve(pr_scores, pr_labels, default_thresholds(cfg.score, cfg.pr_points));
    rep.pr_area = pr_area(rep.pr);
    if (cfg.operating_threshold) {
      rep.operating_point = pr_curve(pr_scores, pr_labels, std::vector<double>{*cfg.operating_threshold}).front();
    }
  }
  rep.norms = norm_profile(table, group_of, cfg.norm_bins);
  return rep;
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["space"] = r.space;
  ordered_json agg;
  agg["queries"] = r.queries.size();
  agg["skipped_queries"] = r.skipped_queries;
  agg["hierarchical_recall_exhaustive"] = r.mean_recall_exhaustive;
  agg["hierarchical_recall_at_gt"] = r.mean_recall_at_gt;
  for (const auto& [k, v] : r.mean_recall_at) agg["hierarchical_recall_at_" + std::to_string(k)] = v;
  agg["ot_distance"] = r.mean_ot;
  agg["pr_area"] = r.pr_area;
  if (r.operating_point) {
    const auto& p = *r.operating_point;
    agg["operating_point"] = {
        {"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}, {"predicted", p.predicted}};
  }
  j["aggregate"] = agg;
  auto recall_block = [](const std::map<std::size_t, RecallSummary>& m) {
    ordered_json o = ordered_json::object();
    for (const auto& [k, s] : m) {
      o["R@" + std::to_string(k)] = {{"percent", s.percent}, {"queries", s.queries}, {"skipped", s.skipped}};
    }
    return o;
  };
  j["same_class"] = {{"parent_to_child", recall_block(r.same_class_p2c)},
                     {"child_to_parent", recall_block(r.same_class_c2p)}};
  ordered_json qs = ordered_json::array();
  for (const auto& q : r.queries) {
    ordered_json e{{"query", q.query_id},
                   {"ground_truth", q.ground_truth},
                   {"recall_exhaustive", q.recall_exhaustive},
                   {"recall_at_gt", q.recall_at_gt},
                   {"ot", q.ot}};
    for (const auto& [k, v] : q.recall_at) e["recall_at_" + std::to_string(k)] = v;
    qs.push_back(e);
  }
  j["per_query"] = qs;
  ordered_json pr = ordered_json::array();
  for (const auto& p : r.pr) pr.push_back({p.threshold, p.precision, p.recall});
  j["pr_curve"] = {{"columns", {"threshold", "precision", "recall"}},
                   {"note", "precision is 1.0 where no pair is predicted positive"},
                   {"points", pr}};
  ordered_json norms;
  norms["bin_edges"] = r.norms.bin_edges;
  for (const auto& [g, s] : r.norms.groups) {
    norms["groups"][g] = {{"count", s.count}, {"mean", s.mean}, {"std", s.stddev}, {"histogram", s.histogram}};
  }
  j["norm_profile"] = norms;
  return j;
}

/// threshold,precision,recall,predicted
inline void write_pr_csv(std::ostream& os, const std::vector<PrPoint>& curve) {
  os << "threshold,precision,recall,predicted\n" << std::setprecision(17);
  for (const auto& p : curve) os << p.threshold << ',' << p.precision << ',' << p.recall << ',' << p.predicted << '\n';
}

}  // namespace hierent

#endif  // HIERENT_REPORT_HPP_
