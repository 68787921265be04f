#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hflvne/metrics.hpp"
#include "hflvne/record.hpp"
#include "hflvne/substrate.hpp"
#include "hflvne/text_io.hpp"
#include "hflvne/workload.hpp"

namespace hflvne {

/// Per virtual node, substrate node ids in descending priority.
using CandidateLists = std::vector<std::vector<int>>;

/// Anything that turns a substrate snapshot and a request into ranked
/// candidates: the learned agent and every baseline.
class PolicyProvider {
 public:
  virtual ~PolicyProvider() = default;
  virtual CandidateLists rank(const Substrate& snapshot, const VirtualNetworkRequest& vnr) = 0;
  /// Called once per request after the engine has decided it.
  virtual void observe(const VirtualNetworkRequest& /*vnr*/, const EmbeddingRecord& /*record*/) {}
  virtual std::string name() const = 0;
};

struct MappingFailure {
  enum class Stage { node, link };
  Stage stage = Stage::node;
  std::size_t index = 0;  // virtual node or virtual link index
};

struct EmbedResult {
  EmbeddingRecord record;
  std::optional<MappingFailure> failure;
  bool ok() const { return !failure.has_value(); }
};

/// Indices 0..n-1 ordered by descending value, ties by index.
inline std::vector<std::size_t> descending_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

inline EmbeddingRecord blank_record(const VirtualNetworkRequest& vnr) {
  EmbeddingRecord r;
  r.vnr_id = vnr.vnr_id;
  r.node_map.assign(vnr.num_nodes(), kUnmapped);
  r.link_paths.assign(vnr.links.size(), {});
  r.node_cpu = vnr.node_demands;
  for (const auto& l : vnr.links) r.link_bw.push_back(l.bw);
  return r;
}

/// Places virtual nodes, largest cpu demand first, on the highest-priority
/// candidate that is not yet used by this request and still has the cpu.
/// Allocations stay on the substrate on success and are undone on failure.
inline EmbedResult embed_nodes(Substrate& substrate, const VirtualNetworkRequest& vnr,
                               const CandidateLists& candidates) {
  EmbedResult result{blank_record(vnr), std::nullopt};
  auto& map = result.record.node_map;
  std::vector<int> used;
  for (std::size_t v : descending_order(vnr.node_demands)) {
    const double demand = vnr.node_demands[v];
    const std::vector<int> empty;
    const auto& list = v < candidates.size() ? candidates[v] : empty;
    for (int n : list) {
      if (std::find(used.begin(), used.end(), n) != used.end()) continue;
      if (!(demand <= substrate.node(n).cpu_available)) continue;
      substrate.allocate_node(n, demand);
      map[v] = n;
      used.push_back(n);
      break;
    }
    if (map[v] == kUnmapped) {
      for (std::size_t u = 0; u < map.size(); ++u)
        if (map[u] != kUnmapped) substrate.free_node(map[u], vnr.node_demands[u]);
      result.failure = MappingFailure{MappingFailure::Stage::node, v};
      return result;
    }
  }
  return result;
}

/// Minimum-hop path from `from` to `to` using only links with at least
/// `bw` available. Among shortest paths the lexicographically smallest node
/// sequence wins. Returns link ids, or nullopt when unreachable.
inline std::optional<std::vector<int>> bfs_path(const Substrate& s, int from, int to, double bw) {
  if (from == to) return std::vector<int>{};
  std::vector<int> dist(s.num_nodes(), -1);
  std::deque<int> queue{to};
  dist[static_cast<std::size_t>(to)] = 0;
  while (!queue.empty() && dist[static_cast<std::size_t>(from)] < 0) {
    int u = queue.front();
    queue.pop_front();
    for (int lid : s.incident(u)) {
      const auto& l = s.link(lid);
      if (!(bw <= l.bw_available)) continue;
      int v = l.other(u);
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  if (dist[static_cast<std::size_t>(from)] < 0) return std::nullopt;

  std::vector<int> path;
  int cur = from;
  while (cur != to) {
    int best_node = -1, best_link = -1;
    for (int lid : s.incident(cur)) {
      const auto& l = s.link(lid);
      if (!(bw <= l.bw_available)) continue;
      int v = l.other(cur);
      if (dist[static_cast<std::size_t>(v)] == dist[static_cast<std::size_t>(cur)] - 1 && (best_node < 0 || v < best_node)) {
        best_node = v;
        best_link = lid;
      }
    }
    path.push_back(best_link);
    cur = best_node;
  }
  return path;
}

/// Maps virtual links, largest bandwidth first, onto BFS paths between the
/// mapped endpoints. On failure every allocation of the request (nodes
/// included) is rolled back.
inline EmbedResult embed_links(Substrate& substrate, const VirtualNetworkRequest& vnr, EmbeddingRecord record) {
  EmbedResult result{std::move(record), std::nullopt};
  auto& rec = result.record;
  std::vector<double> bws;
  for (const auto& l : vnr.links) bws.push_back(l.bw);
  for (std::size_t e : descending_order(bws)) {
    const auto& vl = vnr.links[e];
    auto path = bfs_path(substrate, rec.node_map[static_cast<std::size_t>(vl.a)],
                         rec.node_map[static_cast<std::size_t>(vl.b)], vl.bw);
    if (!path || path->empty()) {
      for (std::size_t k = 0; k < rec.link_paths.size(); ++k)
        if (!rec.link_paths[k].empty()) substrate.free_path(rec.link_paths[k], vnr.links[k].bw);
      for (std::size_t u = 0; u < rec.node_map.size(); ++u) substrate.free_node(rec.node_map[u], vnr.node_demands[u]);
      result.failure = MappingFailure{MappingFailure::Stage::link, e};
      return result;
    }
    substrate.allocate_path(*path, vl.bw);
    rec.link_paths[e] = std::move(*path);
  }
  return result;
}

/// Two-stage embedding of one request. On success the record is committed
/// to the substrate and carries its revenue and cost.
/// A rejected request leaves the residuals exactly as they were.
inline EmbedResult embed(Substrate& substrate, const VirtualNetworkRequest& vnr, const CandidateLists& candidates) {
  const auto before = substrate.resource_vector();
  auto nodes = embed_nodes(substrate, vnr, candidates);
  if (!nodes.ok()) {
    substrate.restore_resources(before);
    return nodes;
  }
  auto result = embed_links(substrate, vnr, std::move(nodes.record));
  if (!result.ok()) {
    substrate.restore_resources(before);
    return result;
  }
  result.record.accepted = true;
  result.record.revenue = vnr_revenue(vnr);
  result.record.cost = vnr_cost(vnr, result.record);
  substrate.commit(result.record);
  return result;
}

struct SimEvent {
  enum class Kind { arrival, departure };
  double time = 0.0;
  Kind kind = Kind::arrival;
  int vnr_id = 0;
  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

struct SimulationOptions {
  bool flush_at_end = true;  // release still-active requests once the stream ends
};

struct SimulationResult {
  std::vector<EmbeddingRecord> records;  // one per request, stream order
  std::vector<SimEvent> events;          // in processing order
};

/// Discrete-event loop over a time-sorted stream. Departures due at or
/// before an arrival are released first; rejected requests are dropped.
inline SimulationResult run_simulation(Substrate& substrate, const VnrStream& stream, PolicyProvider& policy,
                                       MetricsLedger& ledger, SimulationOptions options = {}) {
  struct Departure {
    double time;
    int vnr_id;
    std::size_t record;
    bool operator>(const Departure& o) const { return time != o.time ? time > o.time : vnr_id > o.vnr_id; }
  };
  std::priority_queue<Departure, std::vector<Departure>, std::greater<>> departures;
  SimulationResult out;
  out.records.reserve(stream.size());

  auto depart = [&](const Departure& d) {
    substrate.release(out.records[d.record]);
    out.events.push_back({d.time, SimEvent::Kind::departure, d.vnr_id});
  };

  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& vnr = stream[i];
    if (i > 0 && vnr.t_s < stream[i - 1].t_s) throw std::invalid_argument("stream must be sorted by arrival time");
    while (!departures.empty() && departures.top().time <= vnr.t_s) {
      depart(departures.top());
      departures.pop();
    }
    out.events.push_back({vnr.t_s, SimEvent::Kind::arrival, vnr.vnr_id});
    auto candidates = policy.rank(substrate, vnr);
    auto result = embed(substrate, vnr, candidates);
    ledger.record(vnr.t_s, result.record.revenue, result.record.cost, result.record.accepted);
    policy.observe(vnr, result.record);
    if (result.record.accepted) departures.push({vnr.t_e, vnr.vnr_id, out.records.size()});
    out.records.push_back(std::move(result.record));
  }
  if (options.flush_at_end) {
    while (!departures.empty()) {
      depart(departures.top());
      departures.pop();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decision log: one CSV row per request.
//   vnr_id,t_s,t_e,accepted,revenue,cost,node_map,hops,link_paths
// node_map and hops are space-separated; link_paths separates paths with '|'
// and the link ids inside one path with spaces.

inline void write_decision_log(std::ostream& out, const VnrStream& stream, const std::vector<EmbeddingRecord>& records) {
  out << "vnr_id,t_s,t_e,accepted,revenue,cost,node_map,hops,link_paths\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& v = stream.at(i);
    out << r.vnr_id << ',' << text::fmt(v.t_s) << ',' << text::fmt(v.t_e) << ',' << (r.accepted ? 1 : 0) << ','
        << text::fmt(r.revenue) << ',' << text::fmt(r.cost) << ',';
    for (std::size_t k = 0; k < r.node_map.size(); ++k) out << (k ? " " : "") << r.node_map[k];
    out << ',';
    for (std::size_t k = 0; k < r.link_paths.size(); ++k) out << (k ? " " : "") << r.link_paths[k].size();
    out << ',';
    for (std::size_t k = 0; k < r.link_paths.size(); ++k) {
      if (k) out << '|';
      for (std::size_t h = 0; h < r.link_paths[k].size(); ++h) out << (h ? " " : "") << r.link_paths[k][h];
    }
    out << '\n';
  }
}

struct DecisionLogRow {
  EmbeddingRecord record;
  double t_s = 0.0;
  double t_e = 0.0;
  std::vector<std::size_t> hops;
};

/// Parses a decision log back into records. Demands are not part of the log;
/// pair the rows with their request stream to recover them.
inline std::vector<DecisionLogRow> read_decision_log(std::istream& in, const std::string& source = "decision log") {
  std::vector<DecisionLogRow> rows;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) { throw ParseError(source, line_no, what); };
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts(1);
    for (char c : s) {
      if (c == sep)
        parts.emplace_back();
      else
        parts.back().push_back(c);
    }
    return parts;
  };
  auto ints = [&](const std::string& field) {
    std::vector<int> out;
    std::istringstream ss(field);
    std::string tok;
    long long v = 0;
    while (ss >> tok) {
      if (!text::parse_int(tok, v)) fail("not an integer: '" + tok + "'");
      out.push_back(static_cast<int>(v));
    }
    return out;
  };
  auto real = [&](const std::string& tok) {
    double v = 0;
    if (!text::parse_real(tok, v)) fail("not a number: '" + tok + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line.rfind("vnr_id,", 0) != 0) fail("missing decision log header");
      continue;
    }
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 9) fail("expected 9 fields, got " + std::to_string(f.size()));
    DecisionLogRow row;
    auto id = ints(f[0]);
    auto acc = ints(f[3]);
    if (id.size() != 1 || acc.size() != 1) fail("malformed vnr_id or accepted field");
    row.record.vnr_id = id[0];
    row.t_s = real(f[1]);
    row.t_e = real(f[2]);
    row.record.accepted = acc[0] != 0;
    row.record.revenue = real(f[4]);
    row.record.cost = real(f[5]);
    row.record.node_map = ints(f[6]);
    for (int h : ints(f[7])) row.hops.push_back(static_cast<std::size_t>(h));
    if (!row.hops.empty())
      for (const auto& p : split(f[8], '|')) row.record.link_paths.push_back(ints(p));
    if (row.record.link_paths.size() != row.hops.size())
      fail("hops and link_paths disagree on the number of virtual links");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace hflvne
