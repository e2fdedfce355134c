#ifndef HIERENT_TRAINER_HPP_
#define HIERENT_TRAINER_HPP_

//! \file trainer.hpp
//! Mini-batch optimization of a lookup-table encoder with the bidirectional
//! entailment loss. Tangent-space coordinates, log tau and log c are updated
//! directly with SGD or a sparse Adam (only rows present in the batch move).
//!
//! Single-threaded and bit-reproducible for a fixed seed; a checkpoint stores
//! the table, optimizer moments, step counter and RNG state, so an interrupted
//! run resumed from its last checkpoint ends in the same state as an
//! uninterrupted one.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "hierent/embedding_table.hpp"
#include "hierent/entailment_loss.hpp"
#include "hierent/hierarchy_data.hpp"

namespace hierent {

/// Smallest tangent norm the trainer leaves on an updated row.
inline constexpr double kMinTangentNorm = 1e-4;

enum class OptimizerKind { sgd, adam };
enum class LrSchedule { constant, cosine };

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  double learning_rate = 0.02;
  OptimizerKind optimizer = OptimizerKind::adam;
  LrSchedule schedule = LrSchedule::cosine;  // cosine decays to 0 at `steps`
  std::size_t warmup_steps = 500;             // linear ramp from 0 before the schedule
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  SpaceKind space = SpaceKind::hyperbolic;
  NegativeMode negative_mode = NegativeMode::oracle;
  // sampling weight per pair kind: scene_to_box, box_to_box, cross_image
  std::array<double, 3> kind_weights{1.0, 1.0, 1.0};
  bool learn_tau = true;
  bool learn_curvature = true;
  double min_tau = 0.01;
  double min_curvature = 0.1;
  double max_curvature = 10.0;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::string checkpoint_path;
  std::size_t log_every = 0;

  void validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    for (double w : kind_weights) {
      if (w < 0.0) throw std::invalid_argument("kind weights must be nonnegative");
    }
  }
};

/// Gaussian init with standard deviation `scale`; tau = 0.07, c = 1.
inline EmbeddingTable init_embeddings(std::vector<std::string> node_ids, std::size_t dim, double scale = 0.1,
                                      std::uint64_t seed = 0, SpaceKind kind = SpaceKind::hyperbolic) {
  if (dim < 2) throw std::invalid_argument("embedding dimension must be >= 2");
  EmbeddingTable t(std::move(node_ids), dim, kind);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : t.data()) v = scale * normal(rng);
  t.log_tau = std::log(kInitialTemperature);
  t.log_c = 0.0;
  return t;
}

/// Pairs resolved to table rows, with the dataset-wide relation oracle.
struct TrainingData {
  std::vector<IndexPair> pairs;
  std::vector<PairKind> kinds;
  RelationOracle oracle;

  static TrainingData from_pairs(const std::vector<EntailmentPair>& pairs, const EmbeddingTable& table) {
    TrainingData d;
    for (const auto& p : pairs) {
      const auto a = table.find(p.parent_id);
      const auto b = table.find(p.child_id);
      if (!a || !b) {
        throw std::invalid_argument("pair " + p.parent_id + " -> " + p.child_id + " has no embedding");
      }
      d.pairs.push_back({*a, *b});
      d.kinds.push_back(p.kind);
      d.oracle.add(*a, *b);
    }
    return d;
  }
};

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;
  std::size_t singular_terms = 0;
  std::size_t floored_terms = 0;
  double tau = 0.0;
  double c = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, EmbeddingTable last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const EmbeddingTable& last_checkpoint() const { return last_good_; }

 private:
  EmbeddingTable last_good_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer state plus the table it updates.
class Trainer {
 public:
  Trainer(EmbeddingTable table, TrainingData data, TrainConfig cfg)
      : table_(std::move(table)), data_(std::move(data)), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
    if (table_.kind() != cfg_.space) throw std::invalid_argument("table space kind differs from config");
    if (data_.pairs.empty() && cfg_.steps > 0) throw std::invalid_argument("no training pairs");
    m_.assign(table_.data().size(), 0.0);
    v_.assign(table_.data().size(), 0.0);
    std::vector<double> w;
    for (auto k : data_.kinds) w.push_back(cfg_.kind_weights[static_cast<std::size_t>(k)]);
    sampler_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    last_good_ = table_;
  }

  const EmbeddingTable& table() const { return table_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t step() const { return step_; }
  const std::vector<StepRecord>& log() const { return log_; }

  std::vector<IndexPair> sample_batch() {
    std::vector<IndexPair> b;
    b.reserve(cfg_.batch_size);
    for (std::size_t i = 0; i < cfg_.batch_size; ++i) b.push_back(data_.pairs[sampler_(rng_)]);
    return b;
  }

  /// One optimizer update on a freshly sampled batch.
  StepRecord run_step() {
    if (!std::isfinite(table_.log_tau) || !std::isfinite(table_.log_c)) {
      throw TrainingDiverged("non-finite tau or c before step " + std::to_string(step_ + 1), last_good_);
    }
    const auto problem = make_problem(sample_batch(), cfg_.negative_mode, data_.oracle);
    const auto g = loss_gradients(problem, table_, LossConfig::from_table(table_));
    if (!std::isfinite(g.loss) || !std::isfinite(g.d_tau) || !std::isfinite(g.d_c)) {
      throw TrainingDiverged("non-finite loss at step " + std::to_string(step_ + 1), last_good_);
    }
    apply(g);
    ++step_;
    StepRecord r{step_, g.loss, g.singular_terms, g.floored_terms, table_.tau(), std::exp(table_.log_c)};
    log_.push_back(r);
    if (cfg_.log_every && step_ % cfg_.log_every == 0) {
      spdlog::info("step {} loss {:.6f} tau {:.4f} c {:.4f} clamped {}", step_, r.loss, r.tau, r.c,
                   r.singular_terms);
    }
    if (cfg_.checkpoint_every && step_ % cfg_.checkpoint_every == 0) {
      last_good_ = table_;
      if (!cfg_.checkpoint_path.empty()) save_checkpoint(cfg_.checkpoint_path);
    }
    return r;
  }

  /// Runs until `cfg.steps` total steps have been taken.
  void run() {
    while (step_ < cfg_.steps) run_step();
  }

  double learning_rate_at(std::size_t step) const {
    double lr = cfg_.learning_rate;
    if (step < cfg_.warmup_steps) {
      lr *= static_cast<double>(step + 1) / static_cast<double>(cfg_.warmup_steps);
    }
    if (cfg_.schedule == LrSchedule::constant || cfg_.steps == 0) return lr;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg_.steps));
    return 0.5 * lr * (1.0 + std::cos(std::numbers::pi * frac));
  }

  /// Applies a gradient table to the embeddings (exposed for tests).
  void apply(const LossGradients& g) {
    const double lr = learning_rate_at(step_);
    const std::size_t d = table_.dim();
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    auto update = [&](double& param, double& m, double& v, double grad) {
      if (cfg_.optimizer == OptimizerKind::sgd) {
        param -= lr * grad;
        return;
      }
      m = cfg_.adam_beta1 * m + (1.0 - cfg_.adam_beta1) * grad;
      v = cfg_.adam_beta2 * v + (1.0 - cfg_.adam_beta2) * grad * grad;
      param -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.adam_eps);
    };
    for (const auto& [row, grad] : g.rows) {
      auto r = table_.row(row);
      for (std::size_t k = 0; k < d; ++k) update(r[k], m_[row * d + k], v_[row * d + k], grad[k]);
    }
    if (cfg_.learn_tau) {
      update(table_.log_tau, m_tau_, v_tau_, table_.tau() * g.d_tau);
      table_.log_tau = std::max(table_.log_tau, std::log(cfg_.min_tau));
    }
    if (cfg_.learn_curvature && table_.kind() == SpaceKind::hyperbolic) {
      update(table_.log_c, m_c_, v_c_, std::exp(table_.log_c) * g.d_c);
      table_.log_c = std::clamp(table_.log_c, std::log(cfg_.min_curvature), std::log(cfg_.max_curvature));
    }
    // Keep tangent norms inside [kMinTangentNorm, cap]. The root of a hierarchy
    // is drawn towards the origin, where the exterior angle is undefined.
    const double cap = table_.kind() == SpaceKind::hyperbolic
                           ? 0.999 * table_.curvature().norm_cap()
                           : std::numeric_limits<double>::infinity();
    for (const auto& [row, _] : g.rows) {
      auto r = table_.row(row);
      const double n = detail::norm(r);
      if (n > cap) {
        for (double& x : r) x *= cap / n;
      } else if (n < kMinTangentNorm) {
        if (n > 0.0) {
          for (double& x : r) x *= kMinTangentNorm / n;
        } else {
          r[0] = kMinTangentNorm;
        }
      }
    }
  }

  void save_checkpoint(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write checkpoint: " + path);
    os.write("HCKP", 4);
    io::put(os, std::uint64_t{step_});
    io::put(os, std::uint64_t{t_});
    std::ostringstream rs;
    rs << rng_ << ' ' << sampler_;
    const std::string rng_text = rs.str();
    io::put(os, static_cast<std::uint64_t>(rng_text.size()));
    os.write(rng_text.data(), static_cast<std::streamsize>(rng_text.size()));
    write_table(os, table_);
    os.write(reinterpret_cast<const char*>(m_.data()), static_cast<std::streamsize>(m_.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(v_.data()), static_cast<std::streamsize>(v_.size() * sizeof(double)));
    for (double x : {m_tau_, v_tau_, m_c_, v_c_}) io::put(os, x);
    if (!os) throw CheckpointError("checkpoint write failed: " + path);
  }

  /// Restores a checkpoint written by a trainer over the same node set.
  void load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "HCKP") throw CheckpointError("bad checkpoint magic");
    try {
      step_ = io::get<std::uint64_t>(is);
      t_ = io::get<std::uint64_t>(is);
      const auto len = io::get<std::uint64_t>(is);
      if (len > (1u << 20)) throw CheckpointError("corrupt checkpoint");
      std::string rng_text(len, '\0');
      is.read(rng_text.data(), static_cast<std::streamsize>(len));
      std::istringstream rs(rng_text);
      rs >> rng_ >> sampler_;
      auto t = read_table(is, table_.dim());
      if (t.ids() != table_.ids() || t.kind() != table_.kind()) {
        throw CheckpointError("checkpoint node set or space kind differs");
      }
      table_ = std::move(t);
      is.read(reinterpret_cast<char*>(m_.data()), static_cast<std::streamsize>(m_.size() * sizeof(double)));
      is.read(reinterpret_cast<char*>(v_.data()), static_cast<std::streamsize>(v_.size() * sizeof(double)));
      m_tau_ = io::get<double>(is);
      v_tau_ = io::get<double>(is);
      m_c_ = io::get<double>(is);
      v_c_ = io::get<double>(is);
    } catch (const EmbeddingFileError& e) {
      throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    }
    last_good_ = table_;
  }

 private:
  EmbeddingTable table_;
  TrainingData data_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> sampler_;
  std::vector<double> m_, v_;
  double m_tau_ = 0.0, v_tau_ = 0.0, m_c_ = 0.0, v_c_ = 0.0;
  std::size_t step_ = 0;
  std::size_t t_ = 0;
  std::vector<StepRecord> log_;
  EmbeddingTable last_good_;
};

struct TrainResult {
  EmbeddingTable table;
  std::vector<StepRecord> log;
};

inline TrainResult train(EmbeddingTable initial, const std::vector<EntailmentPair>& pairs, const TrainConfig& cfg) {
  auto data = TrainingData::from_pairs(pairs, initial);
  Trainer trainer(std::move(initial), std::move(data), cfg);
  trainer.run();
  return {trainer.table(), trainer.log()};
}

/// Mean of the first / last `window` logged losses.
inline std::pair<double, double> running_mean_endpoints(const std::vector<StepRecord>& log, std::size_t window = 50) {
  if (log.empty()) return {0.0, 0.0};
  window = std::min(window, log.size());
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < window; ++i) {
    first += log[i].loss;
    last += log[log.size() - 1 - i].loss;
  }
  return {first / static_cast<double>(window), last / static_cast<double>(window)};
}

inline void write_training_log(std::ostream& os, const std::vector<StepRecord>& log) {
  os << "step,loss,clamped_terms,floored_terms,tau,c\n";
  os << std::setprecision(17);
  for (const auto& r : log) {
    os << r.step << ',' << r.loss << ',' << r.singular_terms << ',' << r.floored_terms << ',' << r.tau << ','
       << r.c << '\n';
  }
}

}  // namespace hierent

#endif  // HIERENT_TRAINER_HPP_
