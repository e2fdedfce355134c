#ifndef HIERENT_EVALUATION_HPP_
#define HIERENT_EVALUATION_HPP_

//! \file evaluation.hpp
//! Retrieval metrics over an embedding table: ranking, Recall@k, hierarchical
//! recall, label-distribution alignment by 1-D Wasserstein distance, PR curves
//! over score thresholds and per-group norm profiles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "hierent/embedding_table.hpp"
#include "hierent/entailment_loss.hpp"
#include "hierent/geometry.hpp"
#include "hierent/hierarchy_data.hpp"

namespace hierent {

// ---------------------------------------------------------------------------
// Ranking

/// angle: beta1 for parent_to_child, alpha2 for child_to_parent (query is the
/// child). cosine: cosine similarity of tangent vectors, for baselines.
enum class ScoreKind { angle, cosine };

struct ScoredCandidate {
  std::string id;
  double score = 0.0;
  friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

struct RetrievalResult {
  std::string query_id;
  std::vector<ScoredCandidate> ranked;  // descending score, ties by id
  std::size_t k = 0;
  bool truncated_k = false;      // k exceeded the candidate count
  std::size_t degenerate = 0;    // candidates with an undefined angle, left out
};

/// Sorts by descending score, ties by ascending id, and keeps the top k.
inline RetrievalResult rank_by_scores(std::string query_id, std::vector<ScoredCandidate> scored,
                                      std::size_t k) {
  RetrievalResult r;
  r.query_id = std::move(query_id);
  r.k = k;
  std::sort(scored.begin(), scored.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (k > scored.size()) {
    r.truncated_k = true;
  } else {
    scored.resize(k);
  }
  r.ranked = std::move(scored);
  return r;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  detail::require_same_dim(a.size(), b.size());
  const double na = detail::norm(a), nb = detail::norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateGeometry("cosine similarity of a zero vector");
  return detail::dot(a, b) / (na * nb);
}

/// Score of `candidate` for `query`; throws DegenerateGeometry when undefined.
inline double retrieval_score(const EmbeddingTable& t, std::size_t query, std::size_t candidate,
                              Direction dir, ScoreKind score) {
  if (score == ScoreKind::cosine) return cosine_similarity(t.row(query), t.row(candidate));
  const Curvature c = t.curvature();
  if (dir == Direction::parent_to_child) {
    return entailment_angles(t.row(query), t.row(candidate), t.kind(), c).beta1;
  }
  return entailment_angles(t.row(candidate), t.row(query), t.kind(), c).alpha2;
}

/// Exhaustive ranking of `candidates` (row indices) for the query row.
inline RetrievalResult rank_candidates(const EmbeddingTable& t, std::size_t query,
                                       std::span<const std::size_t> candidates, Direction dir,
                                       ScoreKind score, std::size_t k) {
  std::vector<ScoredCandidate> scored;
  scored.reserve(candidates.size());
  std::size_t degenerate = 0;
  for (std::size_t j : candidates) {
    try {
      scored.push_back({t.id(j), retrieval_score(t, query, j, dir, score)});
    } catch (const DegenerateGeometry&) {
      ++degenerate;
    }
  }
  auto r = rank_by_scores(t.id(query), std::move(scored), k);
  r.degenerate = degenerate;
  if (degenerate > 0) spdlog::debug("rank_candidates: {} degenerate candidates for {}", degenerate, r.query_id);
  return r;
}

/// Every row except the query itself.
inline RetrievalResult rank_all(const EmbeddingTable& t, std::size_t query, Direction dir, ScoreKind score,
                                std::size_t k) {
  std::vector<std::size_t> cand;
  cand.reserve(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (j != query) cand.push_back(j);
  }
  return rank_candidates(t, query, cand, dir, score, k);
}

// ---------------------------------------------------------------------------
// Recall

struct RecallSummary {
  double percent = 0.0;
  std::size_t queries = 0;  // queries that contributed
  std::size_t skipped = 0;  // queries with nothing to score
};

using RelevancePredicate = std::function<bool(const std::string& query, const std::string& candidate)>;

/// Share of the top-k candidates satisfying `relevant`, averaged over queries.
/// A query with an empty ranking is excluded and counted in `skipped`.
inline RecallSummary recall_at_k(const std::vector<RetrievalResult>& results, const RelevancePredicate& relevant,
                                 std::size_t k) {
  if (k == 0) throw std::invalid_argument("recall_at_k: k must be positive");
  RecallSummary s;
  double total = 0.0;
  for (const auto& r : results) {
    const std::size_t n = std::min(k, r.ranked.size());
    if (n == 0) {
      ++s.skipped;
      continue;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += relevant(r.query_id, r.ranked[i].id);
    total += static_cast<double>(hits) / static_cast<double>(n);
    ++s.queries;
  }
  if (s.queries > 0) s.percent = 100.0 * total / static_cast<double>(s.queries);
  return s;
}

/// |top-K ∩ ground truth| / |ground truth| * 100; nullopt for an empty ground truth.
inline std::optional<double> hierarchical_recall(const RetrievalResult& r, const std::set<std::string>& ground_truth,
                                                 std::size_t k_large) {
  if (ground_truth.empty()) return std::nullopt;
  const std::size_t n = std::min(k_large, r.ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += ground_truth.contains(r.ranked[i].id);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ground_truth.size());
}

// ---------------------------------------------------------------------------
// Label distributions and 1-D Wasserstein distance

inline constexpr const char* kOtherLabel = "other";

struct LabelDistribution {
  std::vector<std::string> labels;  // tree labels in order, then "other"
  std::vector<double> mass;
};

/// Normalized histogram over `tree_labels` plus a trailing "other" bin that
/// collects every observed label outside the tree.
inline LabelDistribution label_distribution(const std::vector<std::string>& tree_labels,
                                            const std::map<std::string, double>& counts) {
  LabelDistribution d;
  d.labels = tree_labels;
  d.labels.push_back(kOtherLabel);
  d.mass.assign(d.labels.size(), 0.0);
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < tree_labels.size(); ++i) {
    if (!slot.emplace(tree_labels[i], i).second) {
      throw std::invalid_argument("label_distribution: duplicate tree label " + tree_labels[i]);
    }
  }
  double total = 0.0;
  for (const auto& [label, n] : counts) {
    if (!(n >= 0.0) || !std::isfinite(n)) throw std::invalid_argument("label_distribution: negative count");
    auto it = slot.find(label);
    d.mass[it == slot.end() ? tree_labels.size() : it->second] += n;
    total += n;
  }
  if (!(total > 0.0)) throw std::invalid_argument("label_distribution: all counts are zero");
  for (double& m : d.mass) m /= total;
  return d;
}

/// W1 between two histograms on bins 0..m at unit spacing: the sum over the m
/// gaps of |CDF_h - CDF_r|.
inline double ot_distance(const LabelDistribution& h, const LabelDistribution& r) {
  if (h.labels != r.labels) throw std::invalid_argument("ot_distance: label orders differ");
  if (h.mass.size() != h.labels.size() || r.mass.size() != r.labels.size()) {
    throw std::invalid_argument("ot_distance: mass and label counts differ");
  }
  double ch = 0.0, cr = 0.0, sh = 0.0, sr = 0.0, w = 0.0;
  for (std::size_t i = 0; i < h.mass.size(); ++i) {
    if (h.mass[i] < 0.0 || r.mass[i] < 0.0) throw std::invalid_argument("ot_distance: negative mass");
    sh += h.mass[i];
    sr += r.mass[i];
  }
  if (std::abs(sh - 1.0) > 1e-9 || std::abs(sr - 1.0) > 1e-9) {
    throw std::invalid_argument("ot_distance: masses must sum to 1");
  }
  for (std::size_t i = 0; i + 1 < h.mass.size(); ++i) {
    ch += h.mass[i];
    cr += r.mass[i];
    w += std::abs(ch - cr);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Precision-recall over score thresholds

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;  // 1.0 when nothing is predicted positive
  double recall = 0.0;
  std::size_t predicted = 0;
};

inline std::vector<double> linear_thresholds(double lo, double hi, std::size_t n) {
  if (n < 2) throw std::invalid_argument("linear_thresholds: need at least 2 points");
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  t.back() = hi;
  return t;
}

/// Angle thresholds over [0, pi]; cosine thresholds over [0, 1].
inline std::vector<double> default_thresholds(ScoreKind kind, std::size_t n = 64) {
  return linear_thresholds(0.0, kind == ScoreKind::angle ? std::numbers::pi : 1.0, n);
}

/// A pair is predicted positive when score >= threshold.
inline std::vector<PrPoint> pr_curve(std::span<const double> scores, const std::vector<bool>& positive,
                                     std::span<const double> thresholds) {
  if (scores.size() != positive.size()) throw std::invalid_argument("pr_curve: scores and labels differ in size");
  const auto npos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (npos == 0) throw std::invalid_argument("pr_curve: no positive pairs");
  std::vector<PrPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    PrPoint p;
    p.threshold = t;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        ++p.predicted;
        tp += positive[i];
      }
    }
    p.precision = p.predicted == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(p.predicted);
    p.recall = static_cast<double>(tp) / static_cast<double>(npos);
    out.push_back(p);
  }
  return out;
}

/// Trapezoid area under precision as a function of recall, with the curve's
/// points ordered by recall.
inline double pr_area(std::vector<PrPoint> curve) {
  if (curve.empty()) return 0.0;
  std::sort(curve.begin(), curve.end(), [](const PrPoint& a, const PrPoint& b) {
    if (a.recall != b.recall) return a.recall < b.recall;
    return a.precision > b.precision;
  });
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].recall - curve[i - 1].recall) * 0.5 * (curve[i].precision + curve[i - 1].precision);
  }
  return area;
}

// ---------------------------------------------------------------------------
// Norm profile

struct NormSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<std::size_t> histogram;
};

struct NormProfile {
  std::vector<double> bin_edges;  // shared by every group, bins + 1 entries
  std::map<std::string, NormSummary> groups;
};

/// Tangent-norm statistics per group tag. Nodes missing from the table are ignored.
inline NormProfile norm_profile(const EmbeddingTable& t, const std::map<std::string, std::string>& group_of,
                                std::size_t bins = 10) {
  if (bins == 0) throw std::invalid_argument("norm_profile: bins must be positive");
  NormProfile p;
  std::map<std::string, std::vector<double>> norms;
  double hi = 0.0;
  for (const auto& [id, group] : group_of) {
    const auto row = t.find(id);
    if (!row) continue;
    const double n = t.norm(*row);
    norms[group].push_back(n);
    hi = std::max(hi, n);
  }
  if (hi == 0.0) hi = 1.0;
  p.bin_edges = linear_thresholds(0.0, hi, bins + 1);
  for (const auto& [group, ns] : norms) {
    NormSummary s;
    s.count = ns.size();
    for (double n : ns) s.mean += n;
    s.mean /= static_cast<double>(s.count);
    for (double n : ns) s.stddev += (n - s.mean) * (n - s.mean);
    s.stddev = std::sqrt(s.stddev / static_cast<double>(s.count));
    s.histogram.assign(bins, 0);
    for (double n : ns) {
      auto b = static_cast<std::size_t>(n / hi * static_cast<double>(bins));
      ++s.histogram[std::min(b, bins - 1)];
    }
    p.groups[group] = std::move(s);
  }
  return p;
}

}  // namespace hierent

#endif  // HIERENT_EVALUATION_HPP_
