#ifndef HIERENT_ENTAILMENT_LOSS_HPP_
#define HIERENT_ENTAILMENT_LOSS_HPP_

//! \file entailment_loss.hpp
//! Bidirectional contrastive entailment-angle loss.
//!
//! For a batch of parent->child pairs (x_i, y_i) the parent-to-child direction
//! scores every anchor x_i against its own child with beta1 = pi - ext(x_i, y_i)
//! and against the children y_j of other pairs that x_i does not entail; the
//! child-to-parent direction does the same with alpha2 = ext(y_i, x_j). Each
//! direction is an InfoNCE term averaged over the batch and the two terms are
//! summed. One temperature is shared by both directions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <spdlog/spdlog.h>

#include "hierent/angle_gradients.hpp"
#include "hierent/embedding_table.hpp"
#include "hierent/geometry.hpp"

namespace hierent {

enum class Direction { parent_to_child, child_to_parent };

/// Directed parent->child pair addressed by embedding-table rows.
struct IndexPair {
  std::size_t parent = 0;
  std::size_t child = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Answers "does a entail b anywhere in the dataset". A node is treated as
/// related to itself so it is never its own negative.
class RelationOracle {
 public:
  RelationOracle() = default;
  explicit RelationOracle(std::span<const IndexPair> pairs) {
    for (const auto& p : pairs) add(p.parent, p.child);
  }

  void add(std::size_t parent, std::size_t child) { edges_.insert(key(parent, child)); }

  bool entails(std::size_t parent, std::size_t child) const {
    return parent == child || edges_.contains(key(parent, child));
  }

  std::size_t size() const { return edges_.size(); }

 private:
  static std::uint64_t key(std::size_t a, std::size_t b) {
    return (static_cast<std::uint64_t>(a) << 32) ^ static_cast<std::uint64_t>(b);
  }
  std::unordered_set<std::uint64_t> edges_;
};

enum class NegativeMode { oracle, batch_local };

/// Batch indices j != i that act as negatives for anchor i.
inline std::vector<std::size_t> negative_set(std::span<const IndexPair> pairs,
                                             const RelationOracle& oracle, std::size_t i,
                                             Direction dir) {
  if (i >= pairs.size()) throw std::out_of_range("negative_set: anchor outside batch");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    if (j == i) continue;
    const bool related = dir == Direction::parent_to_child
                             ? oracle.entails(pairs[i].parent, pairs[j].child)
                             : oracle.entails(pairs[j].parent, pairs[i].child);
    if (!related) out.push_back(j);
  }
  return out;
}

using NegativeSets = std::vector<std::vector<std::size_t>>;

/// A batch with its negatives resolved for both directions.
struct LossProblem {
  std::vector<IndexPair> pairs;
  NegativeSets p2c;
  NegativeSets c2p;

  std::size_t size() const { return pairs.size(); }
};

inline LossProblem make_problem(std::vector<IndexPair> pairs, const RelationOracle& oracle) {
  LossProblem p;
  p.pairs = std::move(pairs);
  p.p2c.reserve(p.pairs.size());
  p.c2p.reserve(p.pairs.size());
  for (std::size_t i = 0; i < p.pairs.size(); ++i) {
    p.p2c.push_back(negative_set(p.pairs, oracle, i, Direction::parent_to_child));
    p.c2p.push_back(negative_set(p.pairs, oracle, i, Direction::child_to_parent));
  }
  return p;
}

/// Ablation mode: only relations that appear inside the batch itself are known.
inline LossProblem make_problem(std::vector<IndexPair> pairs, NegativeMode mode,
                                const RelationOracle& dataset_oracle) {
  if (mode == NegativeMode::oracle) return make_problem(std::move(pairs), dataset_oracle);
  const RelationOracle local(pairs);
  return make_problem(std::move(pairs), local);
}

/// tau is the InfoNCE temperature; c is ignored in Euclidean mode. The
/// directional loss is the batch mean of the per-anchor terms.
struct LossConfig {
  double tau = kInitialTemperature;
  SpaceKind kind = SpaceKind::hyperbolic;
  double c = 1.0;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be > 0");
    Curvature{c};
  }

  static LossConfig from_table(const EmbeddingTable& t) {
    return LossConfig{t.tau(), t.kind(), std::exp(t.log_c)};
  }
};

/// -log softmax of the positive logit among {positive} U negatives, scores given
/// as angles and divided by tau. Max-subtracted log-sum-exp.
inline double anchor_infonce(double positive, std::span<const double> negatives, double tau) {
  double m = positive / tau;
  for (double k : negatives) m = std::max(m, k / tau);
  double sum = std::exp(positive / tau - m);
  for (double k : negatives) sum += std::exp(k / tau - m);
  return m + std::log(sum) - positive / tau;
}

struct LossGradients {
  double loss = 0.0;
  std::map<std::size_t, std::vector<double>> rows;  // table row -> d loss / d tangent vector
  double d_tau = 0.0;
  double d_c = 0.0;
  std::size_t singular_terms = 0;  // clamped arccos, zero gradient contribution
  std::size_t floored_terms = 0;   // epsilon floor under the square root
};

namespace detail {

class MappedCache {
 public:
  MappedCache(const EmbeddingTable& table, const LossConfig& cfg) : table_(table), cfg_(cfg) {}

  const MappedTangent& get(std::size_t row) {
    auto it = cache_.find(row);
    if (it == cache_.end()) it = cache_.emplace(row, map_tangent(table_.row(row), cfg_.c)).first;
    return it->second;
  }

 private:
  const EmbeddingTable& table_;
  const LossConfig& cfg_;
  std::unordered_map<std::size_t, MappedTangent> cache_;
};

inline AngleGradient angle_term(const EmbeddingTable& table, const LossConfig& cfg,
                                MappedCache& cache, std::size_t first, std::size_t second,
                                bool with_grad) {
  if (cfg.kind == SpaceKind::euclidean) {
    if (with_grad) return exterior_angle_euc_grad(table.row(first), table.row(second));
    AngleGradient a;
    a.value = exterior_angle_euc_detail(table.row(first), table.row(second));
    return a;
  }
  const auto& x = cache.get(first);
  const auto& y = cache.get(second);
  if (with_grad) return exterior_angle_hyp_grad(x, y, cfg.c);
  AngleGradient a;
  a.value = exterior_angle_hyp_detail(HyperbolicPoint{x.space, x.time},
                                      HyperbolicPoint{y.space, y.time}, Curvature(cfg.c));
  return a;
}

inline void accumulate(std::map<std::size_t, std::vector<double>>& rows, std::size_t row,
                       std::span<const double> g, double scale) {
  auto& dst = rows[row];
  if (dst.empty()) dst.assign(g.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) dst[k] += scale * g[k];
}

inline void directional(const LossProblem& problem, const EmbeddingTable& table,
                        const LossConfig& cfg, Direction dir, MappedCache& cache, bool with_grad,
                        LossGradients& out) {
  const std::size_t n = problem.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto& negs = dir == Direction::parent_to_child ? problem.p2c : problem.c2p;
  std::vector<std::size_t> cand;
  std::vector<AngleGradient> terms;
  std::vector<double> kappa;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    cand.push_back(i);
    cand.insert(cand.end(), negs[i].begin(), negs[i].end());
    terms.clear();
    kappa.clear();
    for (std::size_t j : cand) {
      // p2c: beta1 = pi - ext(x_i, y_j); c2p: alpha2 = ext(y_i, x_j)
      const std::size_t first =
          dir == Direction::parent_to_child ? problem.pairs[i].parent : problem.pairs[i].child;
      const std::size_t second =
          dir == Direction::parent_to_child ? problem.pairs[j].child : problem.pairs[j].parent;
      terms.push_back(angle_term(table, cfg, cache, first, second, with_grad));
      const double ext = terms.back().value.angle;
      kappa.push_back(dir == Direction::parent_to_child ? std::numbers::pi - ext : ext);
      if (terms.back().value.floored) ++out.floored_terms;
    }
    double m = -std::numeric_limits<double>::infinity();
    for (double k : kappa) m = std::max(m, k / cfg.tau);
    double sum = 0.0;
    for (double k : kappa) sum += std::exp(k / cfg.tau - m);
    out.loss += inv_n * (m + std::log(sum) - kappa[0] / cfg.tau);
    if (!with_grad) continue;
    const double sign = dir == Direction::parent_to_child ? -1.0 : 1.0;  // d kappa / d ext
    for (std::size_t t = 0; t < cand.size(); ++t) {
      const double p = std::exp(kappa[t] / cfg.tau - m) / sum;
      const double dz = (p - (t == 0 ? 1.0 : 0.0)) * inv_n;
      out.d_tau += dz * (-kappa[t] / (cfg.tau * cfg.tau));
      const auto& term = terms[t];
      if (term.singular) {
        ++out.singular_terms;
        continue;
      }
      const double dext = dz / cfg.tau * sign;
      const std::size_t j = cand[t];
      const std::size_t first =
          dir == Direction::parent_to_child ? problem.pairs[i].parent : problem.pairs[i].child;
      const std::size_t second =
          dir == Direction::parent_to_child ? problem.pairs[j].child : problem.pairs[j].parent;
      accumulate(out.rows, first, term.d_first, dext);
      accumulate(out.rows, second, term.d_second, dext);
      out.d_c += dext * term.d_c;
    }
  }
}

inline void check_problem(const LossProblem& problem, const EmbeddingTable& table,
                          const LossConfig& cfg) {
  if (problem.size() == 0) throw std::invalid_argument("empty batch");
  if (problem.p2c.size() != problem.size() || problem.c2p.size() != problem.size()) {
    throw std::invalid_argument("negative sets do not match the batch");
  }
  if (cfg.kind != table.kind()) throw std::invalid_argument("space kind differs from the table");
  cfg.validate();
  for (const auto& p : problem.pairs) {
    if (p.parent >= table.size() || p.child >= table.size()) {
      throw std::out_of_range("pair refers to a row outside the embedding table");
    }
  }
}

}  // namespace detail

inline double infonce_directional(const LossProblem& problem, const EmbeddingTable& table,
                                  const LossConfig& cfg, Direction dir) {
  detail::check_problem(problem, table, cfg);
  detail::MappedCache cache(table, cfg);
  LossGradients out;
  detail::directional(problem, table, cfg, dir, cache, false, out);
  return out.loss;
}

inline double bidirectional_loss(const LossProblem& problem, const EmbeddingTable& table,
                                 const LossConfig& cfg) {
  detail::check_problem(problem, table, cfg);
  detail::MappedCache cache(table, cfg);
  LossGradients out;
  detail::directional(problem, table, cfg, Direction::parent_to_child, cache, false, out);
  detail::directional(problem, table, cfg, Direction::child_to_parent, cache, false, out);
  return out.loss;
}

/// Loss and its analytic gradient with respect to every tangent vector in the
/// batch, tau and (hyperbolic) c. Terms whose arccos argument is clamped add
/// nothing to the embedding gradients and are counted in singular_terms.
inline LossGradients loss_gradients(const LossProblem& problem, const EmbeddingTable& table,
                                    const LossConfig& cfg) {
  detail::check_problem(problem, table, cfg);
  detail::MappedCache cache(table, cfg);
  LossGradients out;
  detail::directional(problem, table, cfg, Direction::parent_to_child, cache, true, out);
  detail::directional(problem, table, cfg, Direction::child_to_parent, cache, true, out);
  if (cfg.kind == SpaceKind::euclidean) out.d_c = 0.0;
  if (out.singular_terms > 0) {
    spdlog::debug("loss_gradients: {} clamped terms contributed zero gradient",
                  out.singular_terms);
  }
  return out;
}

}  // namespace hierent

#endif  // HIERENT_ENTAILMENT_LOSS_HPP_
