#ifndef HIERENT_SERVICE_HPP_
#define HIERENT_SERVICE_HPP_

//! \file service.hpp
//! Read-only HTTP query service over an immutable embedding snapshot.
//!
//!   GET /nodes                       every node: id, label(s), group, norm
//!   GET /retrieve?query=&direction=&threshold=&k=
//!                                    candidates scoring >= threshold, best k by
//!                                    score, returned in ascending-norm order
//!   GET /tree                        the label hierarchy
//!
//! QueryService holds the request logic and is usable without a socket;
//! make_http_server() wires it to cpp-httplib.

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hierent/evaluation.hpp"
#include "hierent/hierarchy_data.hpp"

namespace hierent {

struct ServiceResponse {
  int status = 200;
  nlohmann::ordered_json body;
};

class QueryService {
 public:
  QueryService(EmbeddingTable table, NodeCatalog catalog, HierarchyTree tree, std::size_t default_k = 10,
               double default_threshold = 0.0)
      : table_(std::move(table)),
        catalog_(std::move(catalog)),
        tree_(std::move(tree)),
        default_k_(default_k),
        default_threshold_(default_threshold) {}

  const EmbeddingTable& table() const { return table_; }

  ServiceResponse nodes() const {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < table_.size(); ++i) arr.push_back(node_record(i));
    return {200, arr};
  }

  ServiceResponse tree() const { return {200, tree_.to_json()}; }

  /// `params` holds the raw query-string values.
  ServiceResponse retrieve(const std::map<std::string, std::string>& params) const {
    auto get = [&](const char* key) -> std::optional<std::string> {
      auto it = params.find(key);
      if (it == params.end()) return std::nullopt;
      return it->second;
    };
    const auto query = get("query");
    if (!query || query->empty()) return error(400, "missing query parameter 'query'");

    Direction dir = Direction::parent_to_child;
    if (const auto d = get("direction")) {
      if (*d == "p2c") {
        dir = Direction::parent_to_child;
      } else if (*d == "c2p") {
        dir = Direction::child_to_parent;
      } else {
        return error(400, "direction must be p2c or c2p");
      }
    }
    double threshold = default_threshold_;
    if (const auto t = get("threshold")) {
      const auto v = parse_double(*t);
      if (!v || !std::isfinite(*v)) return error(400, "threshold must be a finite number of radians");
      threshold = *v;
    }
    std::size_t k = default_k_;
    if (const auto s = get("k")) {
      const auto v = parse_count(*s);
      if (!v || *v == 0) return error(400, "k must be a positive integer");
      k = *v;
    }
    const auto row = table_.find(*query);
    if (!row) return error(404, "unknown node id: " + *query);

    // Score every other node, keep those at or above the threshold, take the
    // best k, then present them by ascending norm.
    const auto ranked = rank_all(table_, *row, dir, ScoreKind::angle, table_.size());
    std::vector<ScoredCandidate> kept;
    for (const auto& c : ranked.ranked) {
      if (c.score >= threshold) kept.push_back(c);
      if (kept.size() == k) break;
    }
    std::vector<std::pair<double, ScoredCandidate>> by_norm;
    for (auto& c : kept) by_norm.emplace_back(table_.norm(table_.index_of(c.id)), c);
    std::stable_sort(by_norm.begin(), by_norm.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second.id < b.second.id;
    });

    nlohmann::ordered_json body;
    body["query"] = node_record(*row);
    body["direction"] = dir == Direction::parent_to_child ? "p2c" : "c2p";
    body["score"] = dir == Direction::parent_to_child ? "beta1" : "alpha2";
    body["threshold"] = threshold;
    body["k"] = k;
    auto results = nlohmann::ordered_json::array();
    for (const auto& [norm, c] : by_norm) {
      auto rec = node_record(table_.index_of(c.id));
      rec["score"] = c.score;
      results.push_back(std::move(rec));
    }
    body["results"] = std::move(results);
    return {200, body};
  }

 private:
  nlohmann::ordered_json node_record(std::size_t row) const {
    const auto& id = table_.id(row);
    nlohmann::ordered_json rec;
    rec["id"] = id;
    std::vector<std::string> labels;
    std::string group;
    if (const auto* info = catalog_.find(id)) {
      labels = info->labels;
      group = info->group;
    }
    std::string joined;
    for (std::size_t i = 0; i < labels.size(); ++i) joined += (i ? "," : "") + labels[i];
    rec["label"] = joined;
    rec["labels"] = labels;
    rec["group"] = group;
    rec["norm"] = table_.norm(row);
    return rec;
  }

  static ServiceResponse error(int status, const std::string& message) {
    return {status, nlohmann::ordered_json{{"error", message}}};
  }

  static std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) return std::nullopt;
    return v;
  }

  static std::optional<std::size_t> parse_count(const std::string& s) {
    std::size_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) return std::nullopt;
    return v;
  }

  EmbeddingTable table_;
  NodeCatalog catalog_;
  HierarchyTree tree_;
  std::size_t default_k_;
  double default_threshold_;
};

/// Registers the three GET endpoints plus CORS preflight on `server`.
inline void install_routes(httplib::Server& server, const QueryService& service, std::string cors_origin = "*") {
  auto send = [cors_origin](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", cors_origin);
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/nodes", [&service, send](const httplib::Request&, httplib::Response& res) { send(res, service.nodes()); });
  server.Get("/tree", [&service, send](const httplib::Request&, httplib::Response& res) { send(res, service.tree()); });
  server.Get("/retrieve", [&service, send](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : req.params) params[k] = v;
    send(res, service.retrieve(params));
  });
  server.Options(R"(/.*)", [cors_origin](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Origin", cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  server.set_error_handler([cors_origin](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_header("Access-Control-Allow-Origin", cors_origin);
      res.set_content(nlohmann::json{{"error", "not found"}}.dump(), "application/json");
    }
  });
}

}  // namespace hierent

#endif  // HIERENT_SERVICE_HPP_
