#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hierent/synthetic.hpp"
#include "hierent/trainer.hpp"
#include "test_support.hpp"

using namespace hierent;
using hierent::testing::ScratchDir;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("v" + std::to_string(i));
  return out;
}

TrainConfig tree_config(SpaceKind kind, std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.space = kind;
  cfg.seed = seed;
  return cfg;
}

// Fraction of pairs whose beta1 beats every non-descendant of the parent,
// computed straight from the geometry functions.
double dominance(const synthetic::TreeFixture& f, const EmbeddingTable& t) {
  const Curvature c = t.curvature();
  std::size_t ok = 0;
  for (const auto& p : f.pairs) {
    const std::size_t a = t.index_of(p.parent_id), b = t.index_of(p.child_id);
    const double mine = entailment_angles(t.row(a), t.row(b), t.kind(), c).beta1;
    bool wins = true;
    for (std::size_t y = 0; y < f.size() && wins; ++y) {
      if (y == a || f.is_ancestor(a, y)) continue;
      wins = mine > entailment_angles(t.row(a), t.row(y), t.kind(), c).beta1;
    }
    ok += wins;
  }
  return static_cast<double>(ok) / static_cast<double>(f.pairs.size());
}

double norm_order(const synthetic::TreeFixture& f, const EmbeddingTable& t) {
  std::size_t ok = 0;
  for (const auto& p : f.pairs) ok += t.norm(t.index_of(p.child_id)) > t.norm(t.index_of(p.parent_id));
  return static_cast<double>(ok) / static_cast<double>(f.pairs.size());
}

}  // namespace

TEST(InitEmbeddings, ZeroScaleGivesZeros) {
  const auto t = init_embeddings(ids(5), 4, 0.0, 3);
  for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(InitEmbeddings, SeedDeterminesTable) {
  EXPECT_EQ(init_embeddings(ids(6), 8, 0.1, 42), init_embeddings(ids(6), 8, 0.1, 42));
  EXPECT_NE(init_embeddings(ids(6), 8, 0.1, 42).data(), init_embeddings(ids(6), 8, 0.1, 43).data());
}

TEST(InitEmbeddings, TemperatureAndCurvature) {
  const auto t = init_embeddings(ids(3), 4);
  EXPECT_NEAR(t.tau(), 0.07, 1e-15);
  EXPECT_EQ(t.log_c, 0.0);
}

TEST(InitEmbeddings, SampleStandardDeviationMatchesScale) {
  const auto t = init_embeddings(ids(500), 20, 0.1, 9);
  double s2 = 0.0;
  for (double v : t.data()) s2 += v * v;
  EXPECT_NEAR(std::sqrt(s2 / static_cast<double>(t.data().size())), 0.1, 0.005);
}

TEST(InitEmbeddings, RejectsBadInput) {
  EXPECT_THROW(init_embeddings({"a", "b", "a"}, 4), std::invalid_argument);
  EXPECT_THROW(init_embeddings(ids(3), 1), std::invalid_argument);
}

TEST(Train, ZeroStepsReturnsInitialTable) {
  const auto f = synthetic::balanced_tree(2, 2);
  const auto init = init_embeddings(f.node_ids, 4, 0.1, 1);
  auto cfg = tree_config(SpaceKind::hyperbolic);
  cfg.steps = 0;
  const auto r = train(init, f.pairs, cfg);
  EXPECT_EQ(r.table, init);
  EXPECT_TRUE(r.log.empty());
}

TEST(Train, MissingEmbeddingIsAnError) {
  const auto f = synthetic::balanced_tree(2, 2);
  auto pairs = f.pairs;
  pairs.push_back({"n0", "ghost", PairKind::box_to_box});
  EXPECT_THROW(train(init_embeddings(f.node_ids, 4), pairs, tree_config(SpaceKind::hyperbolic)),
               std::invalid_argument);
}

TEST(Train, SpaceKindMustMatchTable) {
  const auto f = synthetic::balanced_tree(2, 2);
  EXPECT_THROW(train(init_embeddings(f.node_ids, 4, 0.1, 0, SpaceKind::euclidean), f.pairs,
                     tree_config(SpaceKind::hyperbolic)),
               std::invalid_argument);
}

TEST(Train, InvalidConfigRejected) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.kind_weights = {1.0, -1.0, 1.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Train, FixedSeedIsBitReproducible) {
  const auto f = synthetic::balanced_tree(3, 3);
  auto cfg = tree_config(SpaceKind::hyperbolic, 5);
  cfg.steps = 300;
  const auto init = init_embeddings(f.node_ids, 8, 0.03, 5);
  const auto a = train(init, f.pairs, cfg);
  const auto b = train(init, f.pairs, cfg);
  EXPECT_EQ(a.table, b.table);
  ASSERT_EQ(a.log.size(), b.log.size());
  EXPECT_NEAR(a.log.back().loss, b.log.back().loss, 1e-9);
}

TEST(Train, LogRecordsEveryStep) {
  const auto f = synthetic::balanced_tree(2, 3);
  auto cfg = tree_config(SpaceKind::hyperbolic);
  cfg.steps = 25;
  const auto r = train(init_embeddings(f.node_ids, 4, 0.1, 2), f.pairs, cfg);
  ASSERT_EQ(r.log.size(), 25u);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(r.log[i].step, i + 1);
    EXPECT_TRUE(std::isfinite(r.log[i].loss));
    EXPECT_GE(r.log[i].tau, cfg.min_tau);
    EXPECT_GE(r.log[i].c, cfg.min_curvature);
    EXPECT_LE(r.log[i].c, cfg.max_curvature);
  }
  std::ostringstream csv;
  write_training_log(csv, r.log);
  std::size_t lines = 0;
  for (char ch : csv.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 26u);
}

TEST(Train, LearningRateScheduleWarmsUpAndDecays) {
  const auto f = synthetic::balanced_tree(1, 2);
  TrainConfig cfg;
  cfg.steps = 1000;
  cfg.warmup_steps = 100;
  cfg.learning_rate = 0.1;
  Trainer tr(init_embeddings(f.node_ids, 4), TrainingData::from_pairs(f.pairs, init_embeddings(f.node_ids, 4)),
             cfg);
  EXPECT_NEAR(tr.learning_rate_at(0), 0.1 * 0.01 * 0.5 * (1.0 + 1.0), 1e-15);
  EXPECT_LT(tr.learning_rate_at(50), tr.learning_rate_at(99));
  EXPECT_NEAR(tr.learning_rate_at(500), 0.05, 1e-12);
  EXPECT_NEAR(tr.learning_rate_at(1000), 0.0, 1e-15);
  cfg.schedule = LrSchedule::constant;
  cfg.warmup_steps = 0;
  Trainer flat(init_embeddings(f.node_ids, 4), TrainingData::from_pairs(f.pairs, init_embeddings(f.node_ids, 4)),
               cfg);
  EXPECT_EQ(flat.learning_rate_at(0), 0.1);
  EXPECT_EQ(flat.learning_rate_at(999), 0.1);
}

TEST(Train, NoUpdateWhenLossIsZero) {
  // A single pair has no negatives: loss 0 and zero gradient in both directions.
  const std::vector<EntailmentPair> pairs{{"a", "b", PairKind::box_to_box}};
  for (auto kind : {SpaceKind::hyperbolic, SpaceKind::euclidean}) {
    for (auto opt : {OptimizerKind::adam, OptimizerKind::sgd}) {
      const auto init = init_embeddings({"a", "b", "c"}, 4, 0.5, 1, kind);
      TrainConfig cfg;
      cfg.space = kind;
      cfg.optimizer = opt;
      cfg.steps = 20;
      cfg.schedule = LrSchedule::constant;
      cfg.warmup_steps = 0;
      const auto r = train(init, pairs, cfg);
      for (const auto& s : r.log) EXPECT_EQ(s.loss, 0.0);
      EXPECT_EQ(r.table, init);
    }
  }
}

TEST(Train, SparseUpdateLeavesUnusedRowsAlone) {
  const auto f = synthetic::balanced_tree(2, 2);
  auto names = f.node_ids;
  names.push_back("isolated");
  const auto init = init_embeddings(names, 4, 0.1, 8);
  auto cfg = tree_config(SpaceKind::hyperbolic);
  cfg.steps = 50;
  const auto r = train(init, f.pairs, cfg);
  const std::size_t i = init.index_of("isolated");
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(r.table.row(i)[k], init.row(i)[k]);
}

TEST(Train, FrozenTemperatureAndCurvatureStayPut) {
  const auto f = synthetic::balanced_tree(2, 2);
  auto cfg = tree_config(SpaceKind::hyperbolic);
  cfg.steps = 40;
  cfg.learn_tau = false;
  cfg.learn_curvature = false;
  const auto init = init_embeddings(f.node_ids, 4, 0.1, 8);
  const auto r = train(init, f.pairs, cfg);
  EXPECT_EQ(r.table.log_tau, init.log_tau);
  EXPECT_EQ(r.table.log_c, init.log_c);
}

TEST(Train, EuclideanIgnoresCurvature) {
  const auto f = synthetic::balanced_tree(2, 2);
  auto cfg = tree_config(SpaceKind::euclidean);
  cfg.steps = 40;
  const auto r = train(init_embeddings(f.node_ids, 4, 0.1, 8, SpaceKind::euclidean), f.pairs, cfg);
  EXPECT_EQ(r.table.log_c, 0.0);
}

TEST(Train, KindWeightsSelectSampledPairs) {
  std::vector<EntailmentPair> pairs{{"s", "a", PairKind::scene_to_box},
                                    {"a", "b", PairKind::box_to_box},
                                    {"s", "b", PairKind::cross_image}};
  auto init = init_embeddings({"s", "a", "b"}, 4, 0.1, 1);
  TrainConfig cfg;
  cfg.kind_weights = {0.0, 1.0, 0.0};
  cfg.batch_size = 64;
  Trainer tr(init, TrainingData::from_pairs(pairs, init), cfg);
  for (const auto& p : tr.sample_batch()) {
    EXPECT_EQ(p.parent, init.index_of("a"));
    EXPECT_EQ(p.child, init.index_of("b"));
  }
}

TEST(Train, NonFiniteLossAbortsWithLastCheckpoint) {
  const auto f = synthetic::balanced_tree(2, 2);
  auto init = init_embeddings(f.node_ids, 4, 0.1, 2);
  TrainConfig cfg;
  cfg.steps = 10;
  cfg.checkpoint_every = 2;
  Trainer tr(init, TrainingData::from_pairs(f.pairs, init), cfg);
  tr.run_step();
  tr.run_step();
  const EmbeddingTable good = tr.table();
  tr.run_step();
  // A NaN temperature makes every logit NaN.
  LossGradients poisoned;
  poisoned.d_tau = std::numeric_limits<double>::quiet_NaN();
  tr.apply(poisoned);
  try {
    tr.run_step();
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.last_checkpoint(), good);
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(Train, ResumeFromCheckpointMatchesUninterruptedRun) {
  ScratchDir dir;
  const auto f = synthetic::balanced_tree(3, 2);
  const auto init = init_embeddings(f.node_ids, 6, 0.05, 4);
  auto cfg = tree_config(SpaceKind::hyperbolic, 4);
  cfg.steps = 120;
  cfg.warmup_steps = 30;

  Trainer full(init, TrainingData::from_pairs(f.pairs, init), cfg);
  full.run();

  const std::string ckpt = (dir / "run.ckpt").string();
  {
    Trainer first(init, TrainingData::from_pairs(f.pairs, init), cfg);
    while (first.step() < 70) first.run_step();
    first.save_checkpoint(ckpt);
  }
  Trainer resumed(init, TrainingData::from_pairs(f.pairs, init), cfg);
  resumed.load_checkpoint(ckpt);
  EXPECT_EQ(resumed.step(), 70u);
  resumed.run();
  EXPECT_EQ(resumed.table(), full.table());
}

TEST(Train, PeriodicCheckpointFileIsWritten) {
  ScratchDir dir;
  const auto f = synthetic::balanced_tree(2, 2);
  const auto init = init_embeddings(f.node_ids, 4, 0.1, 4);
  auto cfg = tree_config(SpaceKind::euclidean, 4);
  cfg.steps = 10;
  cfg.checkpoint_every = 5;
  cfg.checkpoint_path = (dir / "p.ckpt").string();
  Trainer tr(init_embeddings(f.node_ids, 4, 0.1, 4, SpaceKind::euclidean),
             TrainingData::from_pairs(f.pairs, init), cfg);
  tr.run();
  Trainer reader(init_embeddings(f.node_ids, 4, 0.1, 4, SpaceKind::euclidean),
                 TrainingData::from_pairs(f.pairs, init), cfg);
  reader.load_checkpoint(cfg.checkpoint_path);
  EXPECT_EQ(reader.step(), 10u);
  EXPECT_EQ(reader.table(), tr.table());
}

TEST(Train, CorruptCheckpointsRejected) {
  ScratchDir dir;
  const auto f = synthetic::balanced_tree(2, 2);
  const auto init = init_embeddings(f.node_ids, 4, 0.1, 4);
  Trainer tr(init, TrainingData::from_pairs(f.pairs, init), TrainConfig{});
  EXPECT_THROW(tr.load_checkpoint((dir / "missing").string()), CheckpointError);
  {
    std::ofstream os(dir / "bad", std::ios::binary);
    os << "NOPE";
  }
  EXPECT_THROW(tr.load_checkpoint((dir / "bad").string()), CheckpointError);

  const auto other = init_embeddings({"x", "y", "z"}, 4, 0.1, 4);
  Trainer foreign(other, TrainingData::from_pairs({{"x", "y", PairKind::box_to_box}}, other), TrainConfig{});
  foreign.save_checkpoint((dir / "foreign").string());
  EXPECT_THROW(tr.load_checkpoint((dir / "foreign").string()), CheckpointError);
}

TEST(Train, BalancedTreeLossDropsBelowQuarter) {
  const auto f = synthetic::balanced_tree(3, 3);
  ASSERT_EQ(f.size(), 40u);
  for (auto kind : {SpaceKind::hyperbolic, SpaceKind::euclidean}) {
    const auto r = train(init_embeddings(f.node_ids, 8, 0.03, 0, kind), f.pairs, tree_config(kind));
    const auto [first, last] = running_mean_endpoints(r.log);
    RecordProperty(std::string("loss_ratio_") + to_string(kind), std::to_string(last / first));
    EXPECT_LT(last, 0.25 * first) << to_string(kind);
  }
}

TEST(Train, BalancedTreeHierarchyIsRecovered) {
  const auto f = synthetic::balanced_tree(3, 3);
  for (auto kind : {SpaceKind::hyperbolic, SpaceKind::euclidean}) {
    const auto r = train(init_embeddings(f.node_ids, 8, 0.03, 0, kind), f.pairs, tree_config(kind));
    EXPECT_GE(dominance(f, r.table), 0.95) << to_string(kind);
    EXPECT_GE(norm_order(f, r.table), 0.90) << to_string(kind);
  }
}

TEST(Train, TangentNormsStayInsideGuards) {
  const auto f = synthetic::balanced_tree(3, 3);
  const auto r = train(init_embeddings(f.node_ids, 8, 0.03, 3), f.pairs, tree_config(SpaceKind::hyperbolic, 3));
  const double cap = r.table.curvature().norm_cap();
  for (std::size_t i = 0; i < r.table.size(); ++i) {
    EXPECT_GE(r.table.norm(i), kMinTangentNorm * (1.0 - 1e-12));
    EXPECT_LT(r.table.norm(i), cap);
  }
}

TEST(EmbeddingFile, RoundTripIsLossless) {
  ScratchDir dir;
  for (auto kind : {SpaceKind::hyperbolic, SpaceKind::euclidean}) {
    auto t = init_embeddings({"alpha", "b", "node with spaces"}, 8, 0.7, 11, kind);
    t.log_tau = -1.234567890123;
    t.log_c = 0.4242;
    const auto path = (dir / "t.emb").string();
    save_embeddings(t, path);
    const auto back = load_embeddings(path);
    EXPECT_EQ(back, t);
    EXPECT_EQ(back.kind(), kind);
    EXPECT_EQ(back.dim(), 8u);
    EXPECT_EQ(back.log_tau, t.log_tau);
    EXPECT_EQ(back.log_c, t.log_c);
  }
}

TEST(EmbeddingFile, WrongMagicRejected) {
  ScratchDir dir;
  {
    std::ofstream os(dir / "x.emb", std::ios::binary);
    os << "JUNKJUNKJUNK";
  }
  EXPECT_THROW(load_embeddings((dir / "x.emb").string()), EmbeddingFileError);
}

TEST(EmbeddingFile, DimensionMismatchRejected) {
  ScratchDir dir;
  save_embeddings(init_embeddings(ids(4), 8), (dir / "d8.emb").string());
  try {
    load_embeddings((dir / "d8.emb").string(), 16);
    FAIL() << "expected dimension mismatch";
  } catch (const EmbeddingFileError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos);
  }
  EXPECT_NO_THROW(load_embeddings((dir / "d8.emb").string(), 8));
}

TEST(EmbeddingFile, VersionAndTruncationRejected) {
  std::ostringstream os;
  write_table(os, init_embeddings(ids(3), 4));
  std::string bytes = os.str();

  std::string wrong_version = bytes;
  wrong_version[4] = 7;
  std::istringstream a(wrong_version);
  EXPECT_THROW(read_table(a), EmbeddingFileError);

  std::istringstream b(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_table(b), EmbeddingFileError);
}

TEST(EmbeddingFile, CsvExportListsEveryRow) {
  const auto t = init_embeddings(ids(3), 2, 0.5, 1, SpaceKind::euclidean);
  std::ostringstream os;
  export_embeddings_csv(t, os);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("# space=euc", 0), 0u);
  EXPECT_NE(s.find("id,norm,v0,v1\n"), std::string::npos);
  EXPECT_NE(s.find("\nv2,"), std::string::npos);
}
