#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "hflvne/record.hpp"
#include "hflvne/substrate.hpp"
#include "hflvne/workload.hpp"

// Independent re-check of embedding decisions. Deliberately does not reuse the
// Substrate allocation methods: resources are replayed on plain arrays.

namespace hflvne {

struct ValidationReport {
  std::vector<std::string> violations;
  std::size_t checked = 0;   // records inspected
  std::size_t accepted = 0;  // records with the accepted flag
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline double plain_revenue(const VirtualNetworkRequest& v) {
  double d = 0.0;
  for (double c : v.node_demands) d += c;
  for (const auto& l : v.links) d += l.bw;
  return (v.t_e - v.t_s) * d;
}

inline bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace detail

/// Structural checks on one record: every node mapped once (injective),
/// every link on a simple substrate walk joining its mapped endpoints,
/// and revenue/cost consistent with the demands and hop counts.
inline void check_record_structure(const Substrate& s, const VirtualNetworkRequest& vnr, const EmbeddingRecord& r,
                                   std::vector<std::string>& out) {
  const std::string who = "vnr " + std::to_string(vnr.vnr_id) + ": ";
  const bool product = r.indicator_product();
  if (r.accepted != product)
    out.push_back(who + "accepted flag " + std::to_string(r.accepted) + " disagrees with indicator product");
  if (!r.accepted) return;
  if (r.node_map.size() != vnr.num_nodes()) {
    out.push_back(who + "node map size mismatch");
    return;
  }
  if (r.link_paths.size() != vnr.links.size()) {
    out.push_back(who + "link path count mismatch");
    return;
  }
  std::set<int> hosts;
  for (std::size_t v = 0; v < r.node_map.size(); ++v) {
    int n = r.node_map[v];
    if (n < 0 || static_cast<std::size_t>(n) >= s.num_nodes()) {
      out.push_back(who + "virtual node " + std::to_string(v) + " not mapped to a substrate node");
      return;
    }
    if (!hosts.insert(n).second) out.push_back(who + "substrate node " + std::to_string(n) + " hosts two virtual nodes");
  }
  double link_cost = 0.0;
  for (std::size_t e = 0; e < vnr.links.size(); ++e) {
    const auto& path = r.link_paths[e];
    if (path.empty()) {
      out.push_back(who + "virtual link " + std::to_string(e) + " has no substrate path");
      continue;
    }
    int cur = r.node_map[static_cast<std::size_t>(vnr.links[e].a)];
    const int target = r.node_map[static_cast<std::size_t>(vnr.links[e].b)];
    std::set<int> visited{cur};
    bool walk_ok = true;
    for (int lid : path) {
      if (lid < 0 || static_cast<std::size_t>(lid) >= s.num_links()) {
        walk_ok = false;
        break;
      }
      const auto& l = s.links()[static_cast<std::size_t>(lid)];
      if (l.endpoint_a == cur)
        cur = l.endpoint_b;
      else if (l.endpoint_b == cur)
        cur = l.endpoint_a;
      else {
        walk_ok = false;
        break;
      }
      if (!visited.insert(cur).second) {
        walk_ok = false;
        break;
      }
    }
    if (!walk_ok || cur != target)
      out.push_back(who + "virtual link " + std::to_string(e) + " path is not a simple walk between its endpoints");
    link_cost += vnr.links[e].bw * static_cast<double>(path.size());
  }
  double node_sum = 0.0;
  for (double c : vnr.node_demands) node_sum += c;
  if (!detail::close(r.revenue, detail::plain_revenue(vnr))) out.push_back(who + "revenue does not match demands");
  if (!detail::close(r.cost, (vnr.t_e - vnr.t_s) * (node_sum + link_cost)))
    out.push_back(who + "cost does not match demands and hop counts");
}

struct ReplayResult {
  std::vector<double> resources;  // same layout as Substrate::resource_vector()
  std::vector<std::string> violations;
};

/// Replays accepted records against the substrate's capacities in event
/// order (departures at or before an arrival first), checking that every
/// allocation fits and nothing goes negative. With `flush_at_end` all
/// outstanding requests are released after the last arrival.
inline ReplayResult replay_allocations(const Substrate& s, const VnrStream& stream,
                                       const std::vector<EmbeddingRecord>& records, bool flush_at_end) {
  ReplayResult out;
  std::vector<double> cpu, bw;
  for (const auto& n : s.nodes()) cpu.push_back(n.cpu_capacity);
  for (const auto& l : s.links()) bw.push_back(l.bw_capacity);

  std::unordered_map<int, const EmbeddingRecord*> by_id;
  for (const auto& r : records) by_id[r.vnr_id] = &r;

  // (t_e, vnr_id) -> request index
  std::multimap<std::pair<double, int>, std::size_t> active;
  auto release = [&](std::size_t i) {
    const auto& vnr = stream[i];
    const auto& r = *by_id.at(vnr.vnr_id);
    for (std::size_t v = 0; v < r.node_map.size(); ++v) cpu[static_cast<std::size_t>(r.node_map[v])] += vnr.node_demands[v];
    for (std::size_t e = 0; e < r.link_paths.size(); ++e)
      for (int lid : r.link_paths[e]) bw[static_cast<std::size_t>(lid)] += vnr.links[e].bw;
  };

  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& vnr = stream[i];
    while (!active.empty() && active.begin()->first.first <= vnr.t_s) {
      release(active.begin()->second);
      active.erase(active.begin());
    }
    auto it = by_id.find(vnr.vnr_id);
    if (it == by_id.end() || !it->second->accepted) continue;
    const auto& r = *it->second;
    const std::string who = "vnr " + std::to_string(vnr.vnr_id) + ": ";
    bool bad_ids = r.node_map.size() != vnr.num_nodes() || r.link_paths.size() != vnr.links.size();
    for (int n : r.node_map) bad_ids = bad_ids || n < 0 || static_cast<std::size_t>(n) >= cpu.size();
    for (const auto& p : r.link_paths)
      for (int lid : p) bad_ids = bad_ids || lid < 0 || static_cast<std::size_t>(lid) >= bw.size();
    if (bad_ids) {
      out.violations.push_back(who + "record references unknown substrate elements; skipped");
      continue;
    }
    // Demand placed on each element by this request alone.
    std::map<int, double> node_need, link_need;
    for (std::size_t v = 0; v < r.node_map.size(); ++v) node_need[r.node_map[v]] += vnr.node_demands[v];
    for (std::size_t e = 0; e < r.link_paths.size(); ++e)
      for (int lid : r.link_paths[e]) link_need[lid] += vnr.links[e].bw;
    for (const auto& [n, need] : node_need)
      if (need > cpu[static_cast<std::size_t>(n)])
        out.violations.push_back(who + "cpu demand exceeds availability on node " + std::to_string(n));
    for (const auto& [l, need] : link_need)
      if (need > bw[static_cast<std::size_t>(l)])
        out.violations.push_back(who + "bandwidth demand exceeds availability on link " + std::to_string(l));
    for (const auto& [n, need] : node_need) cpu[static_cast<std::size_t>(n)] -= need;
    for (const auto& [l, need] : link_need) bw[static_cast<std::size_t>(l)] -= need;
    for (const auto& [n, need] : node_need)
      if (cpu[static_cast<std::size_t>(n)] < 0) out.violations.push_back(who + "node " + std::to_string(n) + " driven negative");
    for (const auto& [l, need] : link_need)
      if (bw[static_cast<std::size_t>(l)] < 0) out.violations.push_back(who + "link " + std::to_string(l) + " driven negative");
    active.emplace(std::make_pair(vnr.t_e, vnr.vnr_id), i);
  }
  if (flush_at_end) {
    for (const auto& [key, i] : active) release(i);
    active.clear();
  }
  out.resources = cpu;
  out.resources.insert(out.resources.end(), bw.begin(), bw.end());
  return out;
}

/// Full constraint check of a run: structure of every record plus the
/// resource replay.
inline ValidationReport validate_run(const Substrate& s, const VnrStream& stream,
                                     const std::vector<EmbeddingRecord>& records) {
  ValidationReport report;
  std::unordered_map<int, std::size_t> index;
  for (std::size_t i = 0; i < stream.size(); ++i) index[stream[i].vnr_id] = i;
  std::set<int> seen;
  for (const auto& r : records) {
    ++report.checked;
    if (r.accepted) ++report.accepted;
    auto it = index.find(r.vnr_id);
    if (it == index.end()) {
      report.violations.push_back("record for unknown vnr " + std::to_string(r.vnr_id));
      continue;
    }
    if (!seen.insert(r.vnr_id).second) report.violations.push_back("duplicate record for vnr " + std::to_string(r.vnr_id));
    check_record_structure(s, stream[it->second], r, report.violations);
  }
  if (!report.ok()) return report;
  auto replay = replay_allocations(s, stream, records, true);
  report.violations.insert(report.violations.end(), replay.violations.begin(), replay.violations.end());
  return report;
}

}  // namespace hflvne
