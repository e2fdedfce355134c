#ifndef HIERENT_CONFIG_HPP_
#define HIERENT_CONFIG_HPP_

//! \file config.hpp
//! Experiment configuration: one JSON document naming every input/output path
//! and every tunable of the pipeline. Missing keys keep their defaults; unknown
//! keys are rejected so typos do not pass silently. Relative paths resolve
//! against the directory of the config file.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hierent/hierarchy_data.hpp"
#include "hierent/report.hpp"
#include "hierent/trainer.hpp"

namespace hierent {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PathsConfig {
  std::string annotations = "annotations.jsonl";
  std::string pairs = "pairs.tsv";
  std::string nodes = "nodes.tsv";
  std::string stats = "stats.json";
  std::string tree = "tree.json";
  std::string embeddings = "embeddings.bin";
  std::string checkpoint = "train.ckpt";
  std::string train_log = "train_log.csv";
  std::string report = "report.json";
  std::string pr_csv = "pr_curve.csv";
};

struct TreeConfig {
  double min_frequency = 50;
  double min_proportion = 0.10;
};

struct ModelConfig {
  std::size_t dim = 128;
  double init_scale = 0.03;
  double initial_tau = kInitialTemperature;
  double initial_curvature = 1.0;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  std::size_t default_k = 10;
  double default_threshold = 0.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  PathsConfig paths;
  PairGenerationConfig pairs;
  TreeConfig tree;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  ServeConfig serve;

  void validate() const {
    if (pairs.rules.containment_threshold <= 0.0 || pairs.rules.containment_threshold > 1.0) {
      throw ConfigError("pairs.containment_threshold must be in (0, 1]");
    }
    if (pairs.min_area_fraction < 0.0 || pairs.min_area_fraction > 1.0) {
      throw ConfigError("pairs.min_area_fraction must be in [0, 1]");
    }
    if (tree.min_frequency < 0.0 || tree.min_proportion < 0.0) throw ConfigError("tree thresholds must be >= 0");
    if (model.dim < 2) throw ConfigError("model.dim must be >= 2");
    if (!(model.init_scale >= 0.0)) throw ConfigError("model.init_scale must be >= 0");
    if (!(model.initial_tau > 0.0) || !(model.initial_curvature > 0.0)) {
      throw ConfigError("model.initial_tau and model.initial_curvature must be > 0");
    }
    for (std::size_t k : eval.recall_ks) {
      if (k == 0) throw ConfigError("eval.recall_ks values must be positive");
    }
    for (std::size_t k : eval.k_large) {
      if (k == 0) throw ConfigError("eval.k_large values must be positive");
    }
    if (eval.pr_points < 2) throw ConfigError("eval.pr_points must be >= 2");
    if (eval.norm_bins == 0) throw ConfigError("eval.norm_bins must be positive");
    if (serve.port < 0 || serve.port > 65535) throw ConfigError("serve.port out of range");
    if (serve.default_k == 0) throw ConfigError("serve.default_k must be positive");
    try {
      train.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("train: ") + e.what());
    }
  }
};

namespace detail {

// Reads `key` into `out` when present and rejects keys outside `allowed`.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name, std::set<std::string> allowed)
      : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + " must be an object");
    for (const auto& [k, _] : j_.items()) {
      if (!allowed.contains(k)) throw ConfigError("unknown key " + name_ + "." + k);
    }
  }

  template <class T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("bad value for " + name_ + "." + key);
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const nlohmann::json& at(const char* key) const { return j_.at(key); }

 private:
  const nlohmann::json& j_;
  std::string name_;
};

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer: " + s);
}

inline NegativeMode negative_mode_from_string(const std::string& s) {
  if (s == "oracle") return NegativeMode::oracle;
  if (s == "batch" || s == "batch_local") return NegativeMode::batch_local;
  throw ConfigError("unknown negative mode: " + s);
}

inline const char* to_string(NegativeMode m) { return m == NegativeMode::oracle ? "oracle" : "batch"; }

inline LrSchedule schedule_from_string(const std::string& s) {
  if (s == "cosine") return LrSchedule::cosine;
  if (s == "constant") return LrSchedule::constant;
  throw ConfigError("unknown learning-rate schedule: " + s);
}

inline SpaceKind space_from_string(const std::string& s) {
  try {
    return space_kind_from_string(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace detail

using detail::negative_mode_from_string;

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  const detail::Section top(j, "config", {"seed", "paths", "pairs", "tree", "model", "train", "eval", "serve"});
  top.get("seed", c.seed);

  if (top.has("paths")) {
    const detail::Section s(top.at("paths"), "paths",
                            {"annotations", "pairs", "nodes", "stats", "tree", "embeddings", "checkpoint",
                             "train_log", "report", "pr_csv"});
    auto& p = c.paths;
    s.get("annotations", p.annotations);
    s.get("pairs", p.pairs);
    s.get("nodes", p.nodes);
    s.get("stats", p.stats);
    s.get("tree", p.tree);
    s.get("embeddings", p.embeddings);
    s.get("checkpoint", p.checkpoint);
    s.get("train_log", p.train_log);
    s.get("report", p.report);
    s.get("pr_csv", p.pr_csv);
  }
  if (top.has("pairs")) {
    const detail::Section s(top.at("pairs"), "pairs",
                            {"containment_threshold", "min_area_fraction", "drop_group_of_children", "cross_image_k"});
    s.get("containment_threshold", c.pairs.rules.containment_threshold);
    s.get("min_area_fraction", c.pairs.min_area_fraction);
    s.get("drop_group_of_children", c.pairs.rules.drop_group_of_children);
    s.get("cross_image_k", c.pairs.cross_image_k);
  }
  if (top.has("tree")) {
    const detail::Section s(top.at("tree"), "tree", {"min_frequency", "min_proportion"});
    s.get("min_frequency", c.tree.min_frequency);
    s.get("min_proportion", c.tree.min_proportion);
  }
  if (top.has("model")) {
    const detail::Section s(top.at("model"), "model", {"dim", "init_scale", "initial_tau", "initial_curvature"});
    s.get("dim", c.model.dim);
    s.get("init_scale", c.model.init_scale);
    s.get("initial_tau", c.model.initial_tau);
    s.get("initial_curvature", c.model.initial_curvature);
  }
  if (top.has("train")) {
    const detail::Section s(top.at("train"), "train",
                            {"space", "optimizer", "learning_rate", "schedule", "warmup_steps", "batch_size", "steps",
                             "adam_beta1", "adam_beta2", "adam_eps", "negative_mode", "kind_weights", "learn_tau",
                             "learn_curvature", "min_tau", "min_curvature", "max_curvature", "checkpoint_every",
                             "log_every"});
    auto& t = c.train;
    std::string text;
    if (s.has("space")) {
      s.get("space", text);
      t.space = detail::space_from_string(text);
    }
    if (s.has("optimizer")) {
      s.get("optimizer", text);
      t.optimizer = detail::optimizer_from_string(text);
    }
    if (s.has("schedule")) {
      s.get("schedule", text);
      t.schedule = detail::schedule_from_string(text);
    }
    if (s.has("negative_mode")) {
      s.get("negative_mode", text);
      t.negative_mode = detail::negative_mode_from_string(text);
    }
    if (s.has("kind_weights")) {
      const detail::Section w(s.at("kind_weights"), "train.kind_weights",
                              {"scene_to_box", "box_to_box", "cross_image"});
      w.get("scene_to_box", t.kind_weights[0]);
      w.get("box_to_box", t.kind_weights[1]);
      w.get("cross_image", t.kind_weights[2]);
    }
    s.get("learning_rate", t.learning_rate);
    s.get("warmup_steps", t.warmup_steps);
    s.get("batch_size", t.batch_size);
    s.get("steps", t.steps);
    s.get("adam_beta1", t.adam_beta1);
    s.get("adam_beta2", t.adam_beta2);
    s.get("adam_eps", t.adam_eps);
    s.get("learn_tau", t.learn_tau);
    s.get("learn_curvature", t.learn_curvature);
    s.get("min_tau", t.min_tau);
    s.get("min_curvature", t.min_curvature);
    s.get("max_curvature", t.max_curvature);
    s.get("checkpoint_every", t.checkpoint_every);
    s.get("log_every", t.log_every);
  }
  if (top.has("eval")) {
    const detail::Section s(top.at("eval"), "eval", {"score", "recall_ks", "k_large", "pr_points", "norm_bins"});
    if (s.has("score")) {
      std::string text;
      s.get("score", text);
      if (text == "angle") {
        c.eval.score = ScoreKind::angle;
      } else if (text == "cosine") {
        c.eval.score = ScoreKind::cosine;
      } else {
        throw ConfigError("unknown eval.score: " + text);
      }
    }
    s.get("recall_ks", c.eval.recall_ks);
    s.get("k_large", c.eval.k_large);
    s.get("pr_points", c.eval.pr_points);
    s.get("norm_bins", c.eval.norm_bins);
  }
  if (top.has("serve")) {
    const detail::Section s(top.at("serve"), "serve", {"host", "port", "cors_origin", "default_k", "default_threshold"});
    s.get("host", c.serve.host);
    s.get("port", c.serve.port);
    s.get("cors_origin", c.serve.cors_origin);
    s.get("default_k", c.serve.default_k);
    s.get("default_threshold", c.serve.default_threshold);
  }
  c.pairs.seed = c.seed;
  c.train.seed = c.seed;
  c.validate();
  return c;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  const auto& p = c.paths;
  j["paths"] = {{"annotations", p.annotations}, {"pairs", p.pairs},       {"nodes", p.nodes},
                {"stats", p.stats},             {"tree", p.tree},         {"embeddings", p.embeddings},
                {"checkpoint", p.checkpoint},   {"train_log", p.train_log}, {"report", p.report},
                {"pr_csv", p.pr_csv}};
  j["pairs"] = {{"containment_threshold", c.pairs.rules.containment_threshold},
                {"min_area_fraction", c.pairs.min_area_fraction},
                {"drop_group_of_children", c.pairs.rules.drop_group_of_children},
                {"cross_image_k", c.pairs.cross_image_k}};
  j["tree"] = {{"min_frequency", c.tree.min_frequency}, {"min_proportion", c.tree.min_proportion}};
  j["model"] = {{"dim", c.model.dim},
                {"init_scale", c.model.init_scale},
                {"initial_tau", c.model.initial_tau},
                {"initial_curvature", c.model.initial_curvature}};
  const auto& t = c.train;
  j["train"] = {{"space", to_string(t.space)},
                {"optimizer", t.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
                {"learning_rate", t.learning_rate},
                {"schedule", t.schedule == LrSchedule::cosine ? "cosine" : "constant"},
                {"warmup_steps", t.warmup_steps},
                {"batch_size", t.batch_size},
                {"steps", t.steps},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps},
                {"negative_mode", detail::to_string(t.negative_mode)},
                {"kind_weights",
                 {{"scene_to_box", t.kind_weights[0]},
                  {"box_to_box", t.kind_weights[1]},
                  {"cross_image", t.kind_weights[2]}}},
                {"learn_tau", t.learn_tau},
                {"learn_curvature", t.learn_curvature},
                {"min_tau", t.min_tau},
                {"min_curvature", t.min_curvature},
                {"max_curvature", t.max_curvature},
                {"checkpoint_every", t.checkpoint_every},
                {"log_every", t.log_every}};
  j["eval"] = {{"score", c.eval.score == ScoreKind::angle ? "angle" : "cosine"},
               {"recall_ks", c.eval.recall_ks},
               {"k_large", c.eval.k_large},
               {"pr_points", c.eval.pr_points},
               {"norm_bins", c.eval.norm_bins}};
  j["serve"] = {{"host", c.serve.host},
                {"port", c.serve.port},
                {"cors_origin", c.serve.cors_origin},
                {"default_k", c.serve.default_k},
                {"default_threshold", c.serve.default_threshold}};
  return j;
}

/// Loads a config file; relative paths become relative to its directory.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  auto c = parse_config(j);
  const auto base = std::filesystem::path(path).parent_path();
  for (std::string* p : {&c.paths.annotations, &c.paths.pairs, &c.paths.nodes, &c.paths.stats, &c.paths.tree,
                         &c.paths.embeddings, &c.paths.checkpoint, &c.paths.train_log, &c.paths.report,
                         &c.paths.pr_csv}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return c;
}

}  // namespace hierent

#endif  // HIERENT_CONFIG_HPP_
