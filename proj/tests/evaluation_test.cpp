#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "hierent/evaluation.hpp"
#include "hierent/report.hpp"
#include "hierent/synthetic.hpp"
#include "hierent/trainer.hpp"
#include "lp_oracle.hpp"
#include "test_support.hpp"

using namespace hierent;
using hierent::testing::transport_lp;

namespace {

constexpr double kPi = std::numbers::pi;

LabelDistribution dist(std::vector<double> mass) {
  LabelDistribution d;
  for (std::size_t i = 0; i + 1 < mass.size(); ++i) d.labels.push_back("L" + std::to_string(i));
  d.labels.push_back(kOtherLabel);
  d.mass = std::move(mass);
  return d;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution zero(0.25);
  std::vector<double> v(k);
  double s = 0.0;
  for (auto& x : v) {
    x = zero(rng) ? 0.0 : u(rng);
    s += x;
  }
  if (s == 0.0) {
    v[rng() % k] = 1.0;
    s = 1.0;
  }
  for (auto& x : v) x /= s;
  return v;
}

EmbeddingTable table_from(const std::vector<std::vector<double>>& rows, SpaceKind kind,
                          std::vector<std::string> ids = {}) {
  if (ids.empty()) {
    for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back(std::string(1, char('a' + i)));
  }
  EmbeddingTable t(ids, rows[0].size(), kind);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), t.row(i).begin());
  return t;
}

}  // namespace

TEST(Ranking, SingleCandidateRanksFirst) {
  const auto t = table_from({{0.5, 0.0}, {0.2, 0.9}}, SpaceKind::hyperbolic);
  const std::vector<std::size_t> cand{1};
  const auto r = rank_candidates(t, 0, cand, Direction::parent_to_child, ScoreKind::angle, 1);
  ASSERT_EQ(r.ranked.size(), 1u);
  EXPECT_EQ(r.ranked[0].id, "b");
  EXPECT_FALSE(r.truncated_k);
}

TEST(Ranking, RadialExtensionScoresPi) {
  for (auto kind : {SpaceKind::hyperbolic, SpaceKind::euclidean}) {
    const auto t = table_from({{0.6, 0.8}, {1.2, 1.6}, {-0.3, 0.5}, {0.8, -0.1}}, kind);
    const std::vector<std::size_t> cand{1, 2, 3};
    const auto r = rank_candidates(t, 0, cand, Direction::parent_to_child, ScoreKind::angle, 3);
    EXPECT_EQ(r.ranked[0].id, "b");
    EXPECT_NEAR(r.ranked[0].score, kPi, 1e-6);
  }
}

TEST(Ranking, ChildToParentUsesAlpha2WithQueryAsChild) {
  const auto t = table_from({{1.2, 1.6}, {0.6, 0.8}, {0.9, -0.5}}, SpaceKind::hyperbolic);
  const std::vector<std::size_t> cand{1, 2};
  const auto r = rank_candidates(t, 0, cand, Direction::child_to_parent, ScoreKind::angle, 2);
  EXPECT_EQ(r.ranked[0].id, "b");
  const Curvature c(1.0);
  EXPECT_DOUBLE_EQ(r.ranked[0].score, entailment_angles(t.row(1), t.row(0), SpaceKind::hyperbolic, c).alpha2);
}

TEST(Ranking, TiesBrokenById) {
  const auto r = rank_by_scores("q", {{"zeta", 1.0}, {"alpha", 1.0}, {"mid", 2.0}, {"beta", 1.0}}, 4);
  ASSERT_EQ(r.ranked.size(), 4u);
  EXPECT_EQ(r.ranked[0].id, "mid");
  EXPECT_EQ(r.ranked[1].id, "alpha");
  EXPECT_EQ(r.ranked[2].id, "beta");
  EXPECT_EQ(r.ranked[3].id, "zeta");
}

TEST(Ranking, KBeyondCandidatesReturnsAllFlagged) {
  const auto r = rank_by_scores("q", {{"a", 0.1}, {"b", 0.2}}, 5);
  EXPECT_EQ(r.ranked.size(), 2u);
  EXPECT_TRUE(r.truncated_k);
  const auto s = rank_by_scores("q", {{"a", 0.1}, {"b", 0.2}}, 1);
  EXPECT_EQ(s.ranked.size(), 1u);
  EXPECT_FALSE(s.truncated_k);
}

TEST(Ranking, CosineModeForBaselines) {
  const auto t = table_from({{1.0, 0.0}, {2.0, 0.1}, {0.0, 1.0}, {-1.0, 0.0}}, SpaceKind::euclidean);
  const std::vector<std::size_t> cand{1, 2, 3};
  const auto r = rank_candidates(t, 0, cand, Direction::parent_to_child, ScoreKind::cosine, 3);
  EXPECT_EQ(r.ranked[0].id, "b");
  EXPECT_EQ(r.ranked[1].id, "c");
  EXPECT_EQ(r.ranked[2].id, "d");
  EXPECT_NEAR(r.ranked[2].score, -1.0, 1e-15);
}

TEST(Ranking, DegenerateCandidatesAreCountedNotRanked) {
  const auto t = table_from({{0.5, 0.5}, {0.5, 0.5}, {0.1, 0.9}}, SpaceKind::euclidean);
  const std::vector<std::size_t> cand{1, 2};
  const auto r = rank_candidates(t, 0, cand, Direction::parent_to_child, ScoreKind::angle, 2);
  EXPECT_EQ(r.degenerate, 1u);
  ASSERT_EQ(r.ranked.size(), 1u);
  EXPECT_EQ(r.ranked[0].id, "c");
}

TEST(Ranking, InvariantUnderMonotoneScoreTransform) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredCandidate> a, b, c;
    for (int i = 0; i < 12; ++i) {
      // coarse grid so ties occur
      const double s = std::round(u(rng) * 4.0) / 4.0;
      const std::string id = "c" + std::to_string(rng() % 1000);
      a.push_back({id, s});
      b.push_back({id, std::exp(3.0 * s) - 7.0});
      c.push_back({id, std::atan(s) * 0.1});
    }
    const auto ra = rank_by_scores("q", a, 8), rb = rank_by_scores("q", b, 8), rc = rank_by_scores("q", c, 8);
    for (std::size_t i = 0; i < ra.ranked.size(); ++i) {
      EXPECT_EQ(ra.ranked[i].id, rb.ranked[i].id);
      EXPECT_EQ(ra.ranked[i].id, rc.ranked[i].id);
    }
  }
}

TEST(Ranking, ScoresNonIncreasingInRank) {
  std::mt19937_64 rng(5);
  for (auto kind : {SpaceKind::hyperbolic, SpaceKind::euclidean}) {
    auto t = init_embeddings([] {
      std::vector<std::string> v;
      for (int i = 0; i < 30; ++i) v.push_back("n" + std::to_string(i));
      return v;
    }(), 6, 0.7, 5, kind);
    for (auto dir : {Direction::parent_to_child, Direction::child_to_parent}) {
      const auto r = rank_all(t, 3, dir, ScoreKind::angle, 29);
      ASSERT_EQ(r.ranked.size(), 29u);
      for (std::size_t i = 1; i < r.ranked.size(); ++i) EXPECT_GE(r.ranked[i - 1].score, r.ranked[i].score);
    }
  }
}

TEST(Recall, ArithmeticExamples) {
  const RetrievalResult r{"q", {{"a", 5}, {"b", 4}, {"c", 3}, {"d", 2}, {"e", 1}}, 5, false, 0};
  auto in = [](std::set<std::string> ok) {
    return RelevancePredicate([ok](const std::string&, const std::string& c) { return ok.contains(c); });
  };
  EXPECT_DOUBLE_EQ(recall_at_k({r}, in({"a", "b", "c", "d", "e"}), 5).percent, 100.0);
  EXPECT_DOUBLE_EQ(recall_at_k({r}, in({}), 5).percent, 0.0);
  EXPECT_DOUBLE_EQ(recall_at_k({r}, in({"a", "c", "e"}), 5).percent, 60.0);
}

TEST(Recall, EmptyResultsExcludedAndCounted) {
  const RetrievalResult full{"q1", {{"a", 1.0}}, 1, false, 0};
  const RetrievalResult empty{"q2", {}, 1, true, 0};
  const auto s = recall_at_k({full, empty}, [](auto&, auto&) { return true; }, 1);
  EXPECT_EQ(s.queries, 1u);
  EXPECT_EQ(s.skipped, 1u);
  EXPECT_DOUBLE_EQ(s.percent, 100.0);
  EXPECT_THROW(recall_at_k({full}, [](auto&, auto&) { return true; }, 0), std::invalid_argument);
}

TEST(Recall, HierarchicalExamples) {
  const RetrievalResult r{"q", {{"a", 6}, {"x", 5}, {"b", 4}, {"y", 3}, {"c", 2}, {"d", 1}}, 6, false, 0};
  const std::set<std::string> gt{"a", "b", "c", "d"};
  EXPECT_DOUBLE_EQ(*hierarchical_recall(r, gt, 6), 100.0);
  EXPECT_DOUBLE_EQ(*hierarchical_recall(r, gt, 3), 50.0);
  EXPECT_DOUBLE_EQ(*hierarchical_recall(r, gt, 100), 100.0);
  EXPECT_FALSE(hierarchical_recall(r, {}, 3).has_value());
}

TEST(Recall, MonotoneInCutoff) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredCandidate> s;
    std::set<std::string> gt;
    for (int i = 0; i < 25; ++i) {
      s.push_back({"c" + std::to_string(i), static_cast<double>(rng() % 50)});
      if (rng() % 3 == 0) gt.insert("c" + std::to_string(i));
    }
    if (gt.empty()) gt.insert("c0");
    const auto r = rank_by_scores("q", s, 25);
    const RelevancePredicate rel = [&](const std::string&, const std::string& c) { return gt.contains(c); };
    double prev_h = -1.0;
    for (std::size_t k = 1; k <= 25; ++k) {
      const double h = *hierarchical_recall(r, gt, k);
      EXPECT_GE(h, prev_h);
      prev_h = h;
    }
    // recall_at_k as a precision-style share is not monotone in general; its
    // hit count is.
    std::size_t prev_hits = 0;
    for (std::size_t k = 1; k <= 25; ++k) {
      const double p = recall_at_k({r}, rel, k).percent;
      const auto hits = static_cast<std::size_t>(std::llround(p * static_cast<double>(k) / 100.0));
      EXPECT_GE(hits, prev_hits);
      prev_hits = hits;
    }
  }
}

TEST(LabelDistribution, Examples) {
  const auto a = label_distribution({"A", "B"}, {{"A", 2}, {"B", 2}});
  EXPECT_EQ(a.labels, (std::vector<std::string>{"A", "B", "other"}));
  EXPECT_EQ(a.mass, (std::vector<double>{0.5, 0.5, 0.0}));

  const auto b = label_distribution({"A", "B", "C"}, {{"Z", 4}});
  EXPECT_EQ(b.mass, (std::vector<double>{0.0, 0.0, 0.0, 1.0}));

  const auto c = label_distribution({"A"}, {{"A", 3}, {"out", 1}});
  EXPECT_EQ(c.mass, (std::vector<double>{0.75, 0.25}));
}

TEST(LabelDistribution, Errors) {
  EXPECT_THROW(label_distribution({"A", "B"}, {{"A", 0}, {"B", 0}}), std::invalid_argument);
  EXPECT_THROW(label_distribution({"A", "B"}, {}), std::invalid_argument);
  EXPECT_THROW(label_distribution({"A"}, {{"A", -1}, {"B", 2}}), std::invalid_argument);
  EXPECT_THROW(label_distribution({"A", "A"}, {{"A", 1}}), std::invalid_argument);
}

TEST(OtDistance, WorkedExamples) {
  const auto h = dist({0.2, 0.3, 0.5});
  EXPECT_EQ(ot_distance(h, h), 0.0);
  EXPECT_EQ(ot_distance(dist({1.0, 0.0}), dist({0.0, 1.0})), 1.0);
  EXPECT_EQ(ot_distance(dist({0.5, 0.5, 0.0}), dist({0.5, 0.0, 0.5})), 0.5);
}

TEST(OtDistance, MisalignedLabelsRejected) {
  auto h = dist({0.5, 0.5});
  auto r = dist({0.5, 0.5});
  r.labels[0] = "different";
  EXPECT_THROW(ot_distance(h, r), std::invalid_argument);
  EXPECT_THROW(ot_distance(dist({0.5, 0.5}), dist({0.5, 0.25, 0.25})), std::invalid_argument);
  EXPECT_THROW(ot_distance(dist({0.5, 0.6}), dist({0.5, 0.5})), std::invalid_argument);
}

TEST(OtDistance, MatchesTransportLinearProgram) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng() % 6;  // m + 1 bins, m <= 6
    const auto h = random_simplex(rng, k), r = random_simplex(rng, k);
    const double w = ot_distance(dist(h), dist(r));
    const double lp = transport_lp(h, r);
    worst = std::max(worst, std::abs(w - lp));
    ASSERT_NEAR(w, lp, 1e-9) << "trial " << trial;
  }
  RecordProperty("max_abs_error", std::to_string(worst));
}

TEST(OtDistance, LinearProgramOracleKnownValues) {
  EXPECT_NEAR(transport_lp({1.0, 0.0}, {0.0, 1.0}), 1.0, 1e-12);
  EXPECT_NEAR(transport_lp({1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}), 2.0, 1e-12);
  EXPECT_NEAR(transport_lp({0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}), 0.5, 1e-12);
}

TEST(OtDistance, MetricAxioms) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng() % 6;
    const auto a = dist(random_simplex(rng, k)), b = dist(random_simplex(rng, k)), c = dist(random_simplex(rng, k));
    const double ab = ot_distance(a, b), ba = ot_distance(b, a), bc = ot_distance(b, c), ac = ot_distance(a, c);
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(ot_distance(a, a), 0.0);
    EXPECT_NEAR(ab, ba, 1e-15);
    EXPECT_LE(ac, ab + bc + 1e-12);
    if (ab < 1e-12) {
      for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(a.mass[i], b.mass[i], 1e-9);
    }
  }
}

TEST(PrCurve, ConventionsAtTheEnds) {
  const std::vector<double> scores{0.3, 1.2, 2.5, 0.7};
  const std::vector<bool> pos{false, true, true, false};
  const std::vector<double> th{0.0, 2.5000001};
  const auto c = pr_curve(scores, pos, th);
  EXPECT_EQ(c[0].recall, 1.0);
  EXPECT_EQ(c[0].precision, 0.5);
  EXPECT_EQ(c[1].recall, 0.0);
  EXPECT_EQ(c[1].precision, 1.0);
  EXPECT_EQ(c[1].predicted, 0u);
}

TEST(PrCurve, SeparatedScoresReachPerfectPoint) {
  const std::vector<double> scores{0.1, 0.2, 2.0, 2.4};
  const std::vector<bool> pos{false, false, true, true};
  const auto c = pr_curve(scores, pos, default_thresholds(ScoreKind::angle, 64));
  bool perfect = false;
  for (const auto& p : c) perfect |= p.precision == 1.0 && p.recall == 1.0;
  EXPECT_TRUE(perfect);
  EXPECT_NEAR(pr_area(c), 1.0, 1e-12);
}

TEST(PrCurve, RecallNonIncreasingInThreshold) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, kPi);
  std::vector<double> scores;
  std::vector<bool> pos;
  for (int i = 0; i < 300; ++i) {
    scores.push_back(u(rng));
    pos.push_back(rng() % 2 == 0);
  }
  const auto c = pr_curve(scores, pos, default_thresholds(ScoreKind::angle, 100));
  EXPECT_EQ(c.front().threshold, 0.0);
  EXPECT_EQ(c.back().threshold, kPi);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c[i].recall, c[i - 1].recall);
  const auto cos = default_thresholds(ScoreKind::cosine, 11);
  EXPECT_EQ(cos.back(), 1.0);
  EXPECT_NEAR(cos[5], 0.5, 1e-15);
}

TEST(PrCurve, Errors) {
  const std::vector<double> s{1.0};
  const std::vector<double> th{0.0};
  EXPECT_THROW(pr_curve(s, std::vector<bool>{false}, th), std::invalid_argument);
  EXPECT_THROW(pr_curve(s, std::vector<bool>{true, false}, th), std::invalid_argument);
}

TEST(NormProfile, Examples) {
  const auto t = table_from({{3.0, 4.0}, {0.0, 1.0}, {0.0, 3.0}}, SpaceKind::euclidean);
  const auto p = norm_profile(t, {{"a", "solo"}, {"b", "pair"}, {"c", "pair"}, {"ghost", "pair"}}, 5);
  EXPECT_EQ(p.groups.at("solo").mean, 5.0);
  EXPECT_EQ(p.groups.at("solo").stddev, 0.0);
  EXPECT_EQ(p.groups.at("pair").count, 2u);
  EXPECT_DOUBLE_EQ(p.groups.at("pair").mean, 2.0);
  EXPECT_DOUBLE_EQ(p.groups.at("pair").stddev, 1.0);
  EXPECT_EQ(p.bin_edges.size(), 6u);
  EXPECT_EQ(p.groups.at("solo").histogram, (std::vector<std::size_t>{0, 0, 0, 0, 1}));

  const EmbeddingTable zeros({"x", "y"}, 3, SpaceKind::hyperbolic);
  const auto z = norm_profile(zeros, {{"x", "g"}, {"y", "h"}});
  EXPECT_EQ(z.groups.at("g").mean, 0.0);
  EXPECT_EQ(z.groups.at("h").mean, 0.0);
}

TEST(GroundTruth, SceneIncludesOwnLabelsObjectDoesNot) {
  HierarchyTree tree;
  tree.add_edge("car", "wheel", {60, 0.5});
  tree.add_edge("car", "mirror", {60, 0.5});
  tree.add_edge("wheel", "hubcap", {60, 0.5});
  tree.add_node("tree");
  EXPECT_EQ(ground_truth_labels({"img", {"tree", "car"}, "scene"}, tree),
            (std::vector<std::string>{"car", "tree", "mirror", "wheel", "hubcap"}));
  EXPECT_EQ(ground_truth_labels({"b1", {"car"}, "object"}, tree),
            (std::vector<std::string>{"mirror", "wheel", "hubcap"}));
  EXPECT_TRUE(ground_truth_labels({"b2", {"hubcap"}, "part"}, tree).empty());
}

TEST(Report, SmallSceneCatalog) {
  // Scene s entails boxes w (wheel) and c (car); box x is unrelated.
  NodeCatalog cat;
  cat.add({"s", {"car"}, "scene"});
  cat.add({"c", {"car"}, "object"});
  cat.add({"w", {"wheel"}, "part"});
  cat.add({"x", {"cat"}, "object"});
  HierarchyTree tree;
  tree.add_edge("car", "wheel", {60, 0.5});
  const auto t = table_from({{0.4, 0.0}, {0.9, 0.1}, {1.3, -0.1}, {-0.8, 0.6}}, SpaceKind::hyperbolic,
                            {"s", "c", "w", "x"});
  EvalConfig cfg;
  cfg.recall_ks = {1, 2};
  cfg.k_large = {1};
  const auto rep = evaluate_hierarchy(t, cat, tree, cfg);
  ASSERT_EQ(rep.queries.size(), 2u);  // s and c; w and x have nothing below them
  EXPECT_EQ(rep.skipped_queries, 2u);
  EXPECT_EQ(rep.queries[0].query_id, "c");
  EXPECT_EQ(rep.queries[0].ground_truth, 1u);
  EXPECT_EQ(rep.queries[1].query_id, "s");
  EXPECT_EQ(rep.queries[1].ground_truth, 2u);
  for (const auto& q : rep.queries) {
    EXPECT_EQ(q.recall_exhaustive, 100.0);
    EXPECT_EQ(q.recall_at.at(1), q.query_id == "c" ? 100.0 : 50.0);
    EXPECT_EQ(q.recall_at_gt, 100.0);
    EXPECT_EQ(q.ot, 0.0);
  }
  EXPECT_EQ(rep.same_class_p2c.at(2).percent, 50.0);  // c matches, w does not
  EXPECT_NEAR(rep.pr_area, 1.0, 1e-12);
  EXPECT_EQ(rep.norms.groups.size(), 3u);

  const auto j = to_json(rep);
  EXPECT_EQ(j["aggregate"]["hierarchical_recall_at_1"], 75.0);
  EXPECT_EQ(j["aggregate"]["queries"], 2);
  EXPECT_EQ(j["pr_curve"]["points"].size(), rep.pr.size());
  std::ostringstream csv;
  write_pr_csv(csv, rep.pr);
  EXPECT_EQ(csv.str().rfind("threshold,precision,recall,predicted\n", 0), 0u);
}

TEST(Report, TrainedTreeBeatsRandomInit) {
  const auto f = synthetic::balanced_tree(3, 3);
  const auto init = init_embeddings(f.node_ids, 8, 0.03, 0);
  TrainConfig cfg;
  const auto trained = train(init, f.pairs, cfg).table;
  const auto a = evaluate_hierarchy(trained, f.catalog, f.tree);
  const auto b = evaluate_hierarchy(init, f.catalog, f.tree);
  EXPECT_EQ(a.queries.size(), 13u);  // every non-leaf node
  EXPECT_EQ(a.mean_recall_exhaustive, 100.0);
  EXPECT_GE(a.mean_recall_at_gt, 95.0);
  EXPECT_LT(a.mean_ot, b.mean_ot);
  EXPECT_GT(a.pr_area, b.pr_area);
  EXPECT_GT(a.norms.groups.at("part").mean, a.norms.groups.at("scene").mean);
  RecordProperty("trained_ot", std::to_string(a.mean_ot));
  RecordProperty("random_ot", std::to_string(b.mean_ot));
}
