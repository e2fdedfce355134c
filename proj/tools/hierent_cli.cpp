// hierent: pipeline driver.
//
//   hierent make-pairs  --config exp.json     annotations -> pairs, nodes, stats
//   hierent build-tree  --config exp.json     annotations + pairs -> tree
//   hierent train       --config exp.json     nodes + pairs -> embeddings, log
//   hierent eval        --config exp.json     embeddings + nodes + tree -> report
//   hierent serve       --config exp.json     HTTP query service
//
// Helpers: synth-tree, synth-scenes, convert-csv, print-config.
// Exit status: 0 ok, 2 invalid input or configuration, 1 anything else.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hierent/config.hpp"
#include "hierent/evaluation.hpp"
#include "hierent/hierarchy_data.hpp"
#include "hierent/report.hpp"
#include "hierent/service.hpp"
#include "hierent/synthetic.hpp"
#include "hierent/trainer.hpp"

namespace fs = std::filesystem;
using namespace hierent;

namespace {

constexpr int kExitInvalid = 2;

// Bad or missing input: reported with exit status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ifstream open_in(const std::string& path, const char* what, std::ios::openmode mode = std::ios::in) {
  if (!fs::exists(path)) throw InputError(std::string(what) + " not found: " + path);
  std::ifstream in(path, mode);
  if (!in) throw InputError(std::string("cannot read ") + what + ": " + path);
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

std::vector<EntailmentPair> load_pairs(const std::string& path) {
  auto in = open_in(path, "pairs file");
  try {
    return read_pairs(in);
  } catch (const std::exception& e) {
    throw InputError(std::string("pairs file ") + path + ": " + e.what());
  }
}

NodeCatalog load_catalog(const std::string& path) {
  auto in = open_in(path, "nodes file");
  try {
    return read_catalog(in);
  } catch (const std::exception& e) {
    throw InputError(std::string("nodes file ") + path + ": " + e.what());
  }
}

HierarchyTree load_tree(const std::string& path) {
  auto in = open_in(path, "tree file");
  try {
    return read_tree(in);
  } catch (const std::exception& e) {
    throw InputError(std::string("tree file ") + path + ": " + e.what());
  }
}

std::vector<BoundingBox> load_boxes(const std::string& path) {
  auto in = open_in(path, "annotations");
  return parse_annotations(in, ParseMode::strict).boxes;
}

// Options shared by the pipeline subcommands, applied over the config file.
struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> space;
  std::optional<std::string> neg_mode;
  std::optional<std::size_t> k;
  std::optional<double> threshold;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--space", space, "embedding space")->check(CLI::IsMember({"hyp", "euc"}));
    cmd->add_option("--neg-mode", neg_mode, "negative selection")->check(CLI::IsMember({"oracle", "batch"}));
    cmd->add_option("--k", k, "retrieval cutoff")->check(CLI::PositiveNumber);
    cmd->add_option("--threshold", threshold, "angle threshold in radians");
  }

  ExperimentConfig load() const {
    ExperimentConfig c = config_path.empty() ? parse_config(nlohmann::json::object()) : load_config(config_path);
    if (seed) {
      c.seed = *seed;
      c.pairs.seed = *seed;
      c.train.seed = *seed;
    }
    if (space) c.train.space = space_kind_from_string(*space);
    if (neg_mode) c.train.negative_mode = negative_mode_from_string(*neg_mode);
    if (k) {
      c.eval.recall_ks = {*k};
      c.serve.default_k = *k;
    }
    if (threshold) c.serve.default_threshold = *threshold;
    c.validate();
    return c;
  }
};

nlohmann::ordered_json pair_digest(std::size_t boxes, std::size_t kept, std::size_t images,
                                   const std::vector<EntailmentPair>& pairs, const EdgeStatistics& stats) {
  std::map<PairKind, std::size_t> by_kind{{PairKind::scene_to_box, 0}, {PairKind::box_to_box, 0},
                                          {PairKind::cross_image, 0}};
  for (const auto& p : pairs) ++by_kind[p.kind];
  nlohmann::ordered_json j;
  j["boxes"] = boxes;
  j["boxes_kept"] = kept;
  j["images"] = images;
  nlohmann::ordered_json counts;
  for (const auto& [kind, n] : by_kind) counts[to_string(kind)] = n;
  counts["total"] = pairs.size();
  j["pairs"] = counts;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [e, s] : stats) {
    edges.push_back({{"parent", e.first}, {"child", e.second}, {"frequency", s.frequency}, {"proportion", s.proportion}});
  }
  j["label_edges"] = edges;
  return j;
}

int cmd_make_pairs(const CommonOptions& opt) {
  const auto cfg = opt.load();
  const auto boxes = load_boxes(cfg.paths.annotations);
  const auto kept = filter_boxes(boxes, cfg.pairs.min_area_fraction);
  const auto pairs = make_pairs(boxes, cfg.pairs);
  const auto catalog = build_catalog(kept, pairs);
  {
    auto out = open_out(cfg.paths.pairs);
    write_pairs(out, pairs);
  }
  {
    auto out = open_out(cfg.paths.nodes);
    write_catalog(out, catalog);
  }
  std::set<std::string> images;
  for (const auto& b : kept) images.insert(b.image_id);
  write_json(cfg.paths.stats, pair_digest(boxes.size(), kept.size(), images.size(), pairs, edge_statistics(pairs, kept)));
  spdlog::info("make-pairs: {} boxes ({} kept), {} pairs -> {}", boxes.size(), kept.size(), pairs.size(),
               cfg.paths.pairs);
  return 0;
}

int cmd_build_tree(const CommonOptions& opt, std::optional<double> min_freq, std::optional<double> min_prop) {
  auto cfg = opt.load();
  if (min_freq) cfg.tree.min_frequency = *min_freq;
  if (min_prop) cfg.tree.min_proportion = *min_prop;
  const auto boxes = filter_boxes(load_boxes(cfg.paths.annotations), cfg.pairs.min_area_fraction);
  const auto pairs = load_pairs(cfg.paths.pairs);
  const auto tree = build_hierarchy_tree(edge_statistics(pairs, boxes), cfg.tree.min_frequency, cfg.tree.min_proportion);
  auto out = open_out(cfg.paths.tree);
  write_tree(out, tree);
  spdlog::info("build-tree: {} labels, {} edges -> {}", tree.nodes().size(), tree.edges().size(), cfg.paths.tree);
  return 0;
}

volatile std::sig_atomic_t g_interrupted = 0;

int cmd_train(const CommonOptions& opt, std::optional<std::size_t> steps, std::optional<std::size_t> dim, bool resume,
              std::optional<std::size_t> stop_after) {
  auto cfg = opt.load();
  if (steps) cfg.train.steps = *steps;
  if (dim) cfg.model.dim = *dim;
  cfg.validate();
  const auto catalog = load_catalog(cfg.paths.nodes);
  const auto pairs = load_pairs(cfg.paths.pairs);
  if (pairs.empty()) throw InputError("no training pairs in " + cfg.paths.pairs);

  auto table = init_embeddings(catalog.ids(), cfg.model.dim, cfg.model.init_scale, cfg.seed, cfg.train.space);
  table.log_tau = std::log(cfg.model.initial_tau);
  table.log_c = std::log(cfg.model.initial_curvature);
  TrainingData data;
  try {
    data = TrainingData::from_pairs(pairs, table);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  cfg.train.checkpoint_path = cfg.paths.checkpoint;
  Trainer trainer(std::move(table), std::move(data), cfg.train);
  if (resume && fs::exists(cfg.paths.checkpoint)) {
    trainer.load_checkpoint(cfg.paths.checkpoint);
    spdlog::info("train: resumed from {} at step {}", cfg.paths.checkpoint, trainer.step());
  }
  const std::size_t start = trainer.step();
  std::signal(SIGINT, [](int) { g_interrupted = 1; });
  const std::size_t target = stop_after ? std::min(*stop_after, cfg.train.steps) : cfg.train.steps;
  try {
    while (trainer.step() < target && !g_interrupted) trainer.run_step();
  } catch (const TrainingDiverged& e) {
    save_embeddings(e.last_checkpoint(), cfg.paths.embeddings);
    spdlog::error("train: {}; last checkpointed table written to {}", e.what(), cfg.paths.embeddings);
    return 1;
  }
  if (trainer.step() < cfg.train.steps) {
    trainer.save_checkpoint(cfg.paths.checkpoint);
    spdlog::warn("train: stopped at step {} of {}; resume with --resume", trainer.step(), cfg.train.steps);
    return g_interrupted ? 130 : 0;
  }
  save_embeddings(trainer.table(), cfg.paths.embeddings);
  {
    // The log covers this invocation only; a resumed run appends.
    const bool append = start > 0 && fs::exists(cfg.paths.train_log);
    std::ostringstream os;
    write_training_log(os, trainer.log());
    auto out = append ? std::ofstream(cfg.paths.train_log, std::ios::app) : open_out(cfg.paths.train_log);
    const std::string text = os.str();
    out << (append ? text.substr(text.find('\n') + 1) : text);
  }
  if (cfg.train.checkpoint_every > 0) trainer.save_checkpoint(cfg.paths.checkpoint);
  const auto [first, last] = running_mean_endpoints(trainer.log());
  spdlog::info("train: {} steps, running-mean loss {:.4f} -> {:.4f}, tau {:.4f}, c {:.4f} -> {}", trainer.step(),
               first, last, trainer.table().tau(), std::exp(trainer.table().log_c), cfg.paths.embeddings);
  return 0;
}

int cmd_eval(const CommonOptions& opt, const std::string& embeddings_override) {
  const auto cfg = opt.load();
  const std::string emb_path = embeddings_override.empty() ? cfg.paths.embeddings : embeddings_override;
  if (!fs::exists(emb_path)) throw InputError("embeddings not found: " + emb_path);
  EmbeddingTable table;
  try {
    table = load_embeddings(emb_path);
  } catch (const EmbeddingFileError& e) {
    throw InputError(e.what());
  }
  const auto catalog = load_catalog(cfg.paths.nodes);
  const auto tree = load_tree(cfg.paths.tree);
  auto eval_cfg = cfg.eval;
  if (opt.threshold) eval_cfg.operating_threshold = *opt.threshold;
  const auto rep = evaluate_hierarchy(table, catalog, tree, eval_cfg);
  const auto j = to_json(rep);
  write_json(cfg.paths.report, j);
  {
    auto out = open_out(cfg.paths.pr_csv);
    write_pr_csv(out, rep.pr);
  }
  spdlog::info("eval: {} queries, hierarchical recall {:.2f} (exhaustive) / {:.2f} (K=|GT|), OT {:.4f}, PR area {:.4f}",
               rep.queries.size(), rep.mean_recall_exhaustive, rep.mean_recall_at_gt, rep.mean_ot, rep.pr_area);
  return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const CommonOptions& opt, std::optional<int> port, std::optional<std::string> host) {
  auto cfg = opt.load();
  if (port) cfg.serve.port = *port;
  if (host) cfg.serve.host = *host;
  if (!fs::exists(cfg.paths.embeddings)) throw InputError("embeddings not found: " + cfg.paths.embeddings);
  EmbeddingTable table;
  try {
    table = load_embeddings(cfg.paths.embeddings);
  } catch (const EmbeddingFileError& e) {
    throw InputError(e.what());
  }
  HierarchyTree tree;
  if (fs::exists(cfg.paths.tree)) tree = load_tree(cfg.paths.tree);
  NodeCatalog catalog;
  if (fs::exists(cfg.paths.nodes)) catalog = load_catalog(cfg.paths.nodes);
  const QueryService service(std::move(table), std::move(catalog), std::move(tree), cfg.serve.default_k,
                             cfg.serve.default_threshold);
  httplib::Server server;
  install_routes(server, service, cfg.serve.cors_origin);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  int bound = cfg.serve.port;
  if (bound == 0) {
    bound = server.bind_to_any_port(cfg.serve.host);
  } else if (!server.bind_to_port(cfg.serve.host, bound)) {
    bound = -1;
  }
  if (bound <= 0) {
    spdlog::error("serve: cannot bind {}:{}", cfg.serve.host, cfg.serve.port);
    return 1;
  }
  // The bound address goes to stdout so scripts can pick up an ephemeral port.
  std::cout << "listening on http://" << cfg.serve.host << ":" << bound << std::endl;
  server.listen_after_bind();
  return 0;
}

int cmd_synth_tree(const std::string& out_dir, std::size_t depth, std::size_t branching, bool direct_only) {
  const auto f = synthetic::balanced_tree(depth, branching, !direct_only);
  fs::create_directories(out_dir);
  {
    auto out = open_out((fs::path(out_dir) / "nodes.tsv").string());
    write_catalog(out, f.catalog);
  }
  {
    auto out = open_out((fs::path(out_dir) / "pairs.tsv").string());
    write_pairs(out, f.pairs);
  }
  {
    auto out = open_out((fs::path(out_dir) / "tree.json").string());
    write_tree(out, f.tree);
  }
  spdlog::info("synth-tree: {} nodes, {} pairs -> {}", f.size(), f.pairs.size(), out_dir);
  return 0;
}

int cmd_synth_scenes(const std::string& out, std::size_t images, std::uint64_t seed) {
  const auto boxes = synthetic::scene_boxes(synthetic::SceneTaxonomy::street(), images, seed);
  auto os = open_out(out);
  write_annotations(os, boxes);
  spdlog::info("synth-scenes: {} images, {} boxes -> {}", images, boxes.size(), out);
  return 0;
}

int cmd_convert_csv(const std::string& in_path, const std::string& out_path) {
  auto in = open_in(in_path, "CSV");
  std::vector<BoundingBox> boxes;
  try {
    boxes = convert_openimages_csv(in);
  } catch (const std::exception& e) {
    throw InputError(std::string("CSV ") + in_path + ": " + e.what());
  }
  auto out = open_out(out_path);
  write_annotations(out, boxes);
  spdlog::info("convert-csv: {} boxes -> {}", boxes.size(), out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("hierent"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Hierarchical entailment embeddings: pairs, trees, training, evaluation and a query service"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  CommonOptions common;

  auto* make_pairs_cmd = app.add_subcommand("make-pairs", "annotations -> entailment pairs, node catalog, stats");
  common.add_to(make_pairs_cmd);

  auto* tree_cmd = app.add_subcommand("build-tree", "label hierarchy from box-to-box pair statistics");
  common.add_to(tree_cmd);
  std::optional<double> min_freq, min_prop;
  tree_cmd->add_option("--min-frequency", min_freq, "edge frequency threshold (inf allowed)");
  tree_cmd->add_option("--min-proportion", min_prop, "edge proportion threshold");

  auto* train_cmd = app.add_subcommand("train", "fit the embedding table");
  common.add_to(train_cmd);
  std::optional<std::size_t> steps, dim, stop_after;
  bool resume = false;
  train_cmd->add_option("--steps", steps, "total optimizer steps");
  train_cmd->add_option("--dim", dim, "embedding dimension");
  train_cmd->add_flag("--resume", resume, "continue from the checkpoint file when present");
  train_cmd->add_option("--stop-after", stop_after, "stop (with a checkpoint) once this many steps are done");

  auto* eval_cmd = app.add_subcommand("eval", "retrieval metrics report and PR curve");
  common.add_to(eval_cmd);
  std::string eval_embeddings;
  eval_cmd->add_option("--embeddings", eval_embeddings, "embedding file (overrides the config path)");

  auto* serve_cmd = app.add_subcommand("serve", "HTTP query service");
  common.add_to(serve_cmd);
  std::optional<int> port;
  std::optional<std::string> host;
  serve_cmd->add_option("--port", port, "port (0 picks a free one)");
  serve_cmd->add_option("--host", host, "bind address");

  auto* synth_tree_cmd = app.add_subcommand("synth-tree", "balanced label tree fixture");
  std::string synth_dir;
  std::size_t depth = 3, branching = 3;
  bool direct_only = false;
  synth_tree_cmd->add_option("--out-dir", synth_dir, "output directory")->required();
  synth_tree_cmd->add_option("--depth", depth, "levels below the root");
  synth_tree_cmd->add_option("--branching", branching, "children per node");
  synth_tree_cmd->add_flag("--direct-only", direct_only, "emit only direct edges, not every ancestor pair");

  auto* synth_scene_cmd = app.add_subcommand("synth-scenes", "random street scenes as box annotations");
  std::string scenes_out;
  std::size_t images = 200;
  std::uint64_t scene_seed = 0;
  synth_scene_cmd->add_option("--out", scenes_out, "annotations JSONL")->required();
  synth_scene_cmd->add_option("--images", images, "number of images");
  synth_scene_cmd->add_option("--seed", scene_seed, "random seed");

  auto* convert_cmd = app.add_subcommand("convert-csv", "OpenImages box CSV -> annotations JSONL");
  std::string csv_in, csv_out;
  convert_cmd->add_option("--in", csv_in, "CSV file")->required();
  convert_cmd->add_option("--out", csv_out, "annotations JSONL")->required();

  auto* print_cmd = app.add_subcommand("print-config", "effective configuration as JSON");
  common.add_to(print_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*make_pairs_cmd) return cmd_make_pairs(common);
    if (*tree_cmd) return cmd_build_tree(common, min_freq, min_prop);
    if (*train_cmd) return cmd_train(common, steps, dim, resume, stop_after);
    if (*eval_cmd) return cmd_eval(common, eval_embeddings);
    if (*serve_cmd) return cmd_serve(common, port, host);
    if (*synth_tree_cmd) return cmd_synth_tree(synth_dir, depth, branching, direct_only);
    if (*synth_scene_cmd) return cmd_synth_scenes(scenes_out, images, scene_seed);
    if (*convert_cmd) return cmd_convert_csv(csv_in, csv_out);
    if (*print_cmd) {
      std::cout << config_to_json(common.load()).dump(2) << "\n";
      return 0;
    }
  } catch (const AnnotationError& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kExitInvalid;
  } catch (const CheckpointError& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
