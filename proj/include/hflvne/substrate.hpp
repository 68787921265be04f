#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hflvne/errors.hpp"
#include "hflvne/record.hpp"

namespace hflvne {

struct Coord {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

inline double distance(const Coord& a, const Coord& b) { return std::hypot(a.x - b.x, a.y - b.y); }

enum class LinkKind { intra, inter };

struct SubstrateNode {
  int node_id = 0;
  int domain_id = 0;
  Coord coord;
  double cpu_capacity = 0.0;
  double cpu_available = 0.0;
  friend bool operator==(const SubstrateNode&, const SubstrateNode&) = default;
};

struct SubstrateLink {
  int link_id = 0;
  int endpoint_a = 0;
  int endpoint_b = 0;
  LinkKind kind = LinkKind::intra;
  double bw_capacity = 0.0;
  double bw_available = 0.0;

  int other(int node) const { return node == endpoint_a ? endpoint_b : endpoint_a; }
  bool touches(int node) const { return node == endpoint_a || node == endpoint_b; }
  friend bool operator==(const SubstrateLink&, const SubstrateLink&) = default;
};

/// Input description of a node, before any allocation.
struct NodeSpec {
  int domain_id = 0;
  Coord coord;
  double cpu_capacity = 0.0;
};

/// Input description of a link; its kind follows from the endpoint domains.
struct LinkSpec {
  int endpoint_a = 0;
  int endpoint_b = 0;
  double bw_capacity = 0.0;
};

enum class Connectivity { required, unchecked };

/// Multi-domain physical network together with its residual resources.
///
/// Node ids are dense (0..n-1, equal to their position) and link ids likewise.
/// Allocations are tracked per call; `commit`/`release` additionally track
/// which embedding records are currently holding resources.
class Substrate {
 public:
  Substrate() = default;

  Substrate(int num_domains, const std::vector<NodeSpec>& nodes, const std::vector<LinkSpec>& links,
            Connectivity connectivity = Connectivity::required)
      : num_domains_(num_domains) {
    if (num_domains <= 0) throw ValidationError("substrate needs at least one domain");
    nodes_.reserve(nodes.size());
    domain_nodes_.assign(static_cast<std::size_t>(num_domains), {});
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& spec = nodes[i];
      if (spec.domain_id < 0 || spec.domain_id >= num_domains)
        throw ValidationError("node " + std::to_string(i) + " has domain " + std::to_string(spec.domain_id) +
                              " outside [0, " + std::to_string(num_domains) + ")");
      if (!(spec.cpu_capacity >= 0.0) || !std::isfinite(spec.cpu_capacity))
        throw ValidationError("node " + std::to_string(i) + " has invalid cpu capacity");
      const int id = static_cast<int>(i);
      nodes_.push_back({id, spec.domain_id, spec.coord, spec.cpu_capacity, spec.cpu_capacity});
      domain_nodes_[static_cast<std::size_t>(spec.domain_id)].push_back(id);
    }
    incident_.assign(nodes_.size(), {});
    links_.reserve(links.size());
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto& spec = links[i];
      const int id = static_cast<int>(i);
      if (!valid_node(spec.endpoint_a) || !valid_node(spec.endpoint_b))
        throw ValidationError("link " + std::to_string(i) + " has a dangling endpoint");
      if (spec.endpoint_a == spec.endpoint_b)
        throw ValidationError("link " + std::to_string(i) + " is a self-loop");
      if (!(spec.bw_capacity >= 0.0) || !std::isfinite(spec.bw_capacity))
        throw ValidationError("link " + std::to_string(i) + " has invalid bandwidth capacity");
      if (pair_index_.count(pair_key(spec.endpoint_a, spec.endpoint_b)))
        throw ValidationError("link " + std::to_string(i) + " duplicates an existing node pair");
      const auto kind = nodes_[static_cast<std::size_t>(spec.endpoint_a)].domain_id ==
                                nodes_[static_cast<std::size_t>(spec.endpoint_b)].domain_id
                            ? LinkKind::intra
                            : LinkKind::inter;
      links_.push_back({id, spec.endpoint_a, spec.endpoint_b, kind, spec.bw_capacity, spec.bw_capacity});
      pair_index_.emplace(pair_key(spec.endpoint_a, spec.endpoint_b), id);
      incident_[static_cast<std::size_t>(spec.endpoint_a)].push_back(id);
      incident_[static_cast<std::size_t>(spec.endpoint_b)].push_back(id);
    }
    if (connectivity == Connectivity::required) check_connectivity();
  }

  int num_domains() const { return num_domains_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_links() const { return links_.size(); }
  const std::vector<SubstrateNode>& nodes() const { return nodes_; }
  const std::vector<SubstrateLink>& links() const { return links_; }
  const SubstrateNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const SubstrateLink& link(int id) const { return links_.at(static_cast<std::size_t>(id)); }
  std::span<const int> incident(int node_id) const { return incident_.at(static_cast<std::size_t>(node_id)); }
  std::span<const int> domain_nodes(int domain_id) const {
    return domain_nodes_.at(static_cast<std::size_t>(domain_id));
  }
  bool valid_node(int id) const { return id >= 0 && static_cast<std::size_t>(id) < nodes_.size(); }
  bool valid_link(int id) const { return id >= 0 && static_cast<std::size_t>(id) < links_.size(); }

  std::optional<int> find_link(int a, int b) const {
    auto it = pair_index_.find(pair_key(a, b));
    if (it == pair_index_.end()) return std::nullopt;
    return it->second;
  }

  void allocate_node(int node_id, double cpu_demand) {
    auto& n = nodes_.at(static_cast<std::size_t>(node_id));
    if (!(cpu_demand <= n.cpu_available)) throw InsufficientCpu(node_id, cpu_demand, n.cpu_available);
    n.cpu_available -= cpu_demand;
  }

  /// All-or-nothing: either every link on the path is charged or none is.
  void allocate_path(std::span<const int> path, double bw_demand) {
    check_walk(path);
    for (int id : path) {
      const auto& l = links_.at(static_cast<std::size_t>(id));
      if (!(bw_demand <= l.bw_available)) throw InsufficientBandwidth(id, bw_demand, l.bw_available);
    }
    for (int id : path) links_[static_cast<std::size_t>(id)].bw_available -= bw_demand;
  }

  void free_node(int node_id, double cpu) {
    auto& n = nodes_.at(static_cast<std::size_t>(node_id));
    if (beyond(n.cpu_available + cpu, n.cpu_capacity))
      throw std::logic_error("freeing node " + std::to_string(node_id) + " beyond its capacity");
    n.cpu_available = std::min(n.cpu_capacity, n.cpu_available + cpu);
  }

  void free_path(std::span<const int> path, double bw) {
    for (int id : path) {
      const auto& l = links_.at(static_cast<std::size_t>(id));
      if (beyond(l.bw_available + bw, l.bw_capacity))
        throw std::logic_error("freeing link " + std::to_string(id) + " beyond its capacity");
    }
    for (int id : path) {
      auto& l = links_[static_cast<std::size_t>(id)];
      l.bw_available = std::min(l.bw_capacity, l.bw_available + bw);
    }
  }

  /// Marks a fully allocated record as holding resources until release().
  void commit(const EmbeddingRecord& record) {
    if (!active_.insert(record.vnr_id).second)
      throw std::logic_error("vnr " + std::to_string(record.vnr_id) + " committed twice");
  }

  /// Returns everything `record` holds. Throws DoubleRelease if the record
  /// is not currently committed here.
  void release(const EmbeddingRecord& record) {
    if (!active_.count(record.vnr_id)) throw DoubleRelease(record.vnr_id);
    for (std::size_t v = 0; v < record.node_map.size(); ++v) free_node(record.node_map[v], record.node_cpu[v]);
    for (std::size_t e = 0; e < record.link_paths.size(); ++e) free_path(record.link_paths[e], record.link_bw[e]);
    active_.erase(record.vnr_id);
  }

  bool is_active(int vnr_id) const { return active_.count(vnr_id) != 0; }
  std::size_t active_count() const { return active_.size(); }

  /// Residual cpu of every node followed by residual bandwidth of every link.
  std::vector<double> resource_vector() const {
    std::vector<double> v;
    v.reserve(nodes_.size() + links_.size());
    for (const auto& n : nodes_) v.push_back(n.cpu_available);
    for (const auto& l : links_) v.push_back(l.bw_available);
    return v;
  }

  /// Puts back residuals taken earlier with resource_vector(). Used to undo
  /// a rejected request exactly, without floating-point round trips.
  void restore_resources(const std::vector<double>& v) {
    if (v.size() != nodes_.size() + links_.size()) throw std::invalid_argument("resource vector size mismatch");
    for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].cpu_available = v[i];
    for (std::size_t i = 0; i < links_.size(); ++i) links_[i].bw_available = v[nodes_.size() + i];
  }

  /// Restores all capacities and forgets every committed record.
  void reset_resources() {
    for (auto& n : nodes_) n.cpu_available = n.cpu_capacity;
    for (auto& l : links_) l.bw_available = l.bw_capacity;
    active_.clear();
  }

  std::vector<NodeSpec> node_specs() const {
    std::vector<NodeSpec> out;
    for (const auto& n : nodes_) out.push_back({n.domain_id, n.coord, n.cpu_capacity});
    return out;
  }

  std::vector<LinkSpec> link_specs() const {
    std::vector<LinkSpec> out;
    for (const auto& l : links_) out.push_back({l.endpoint_a, l.endpoint_b, l.bw_capacity});
    return out;
  }

  /// Structural equality: same topology and capacities (residuals ignored).
  bool same_structure(const Substrate& o) const {
    if (num_domains_ != o.num_domains_ || nodes_.size() != o.nodes_.size() || links_.size() != o.links_.size())
      return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto &a = nodes_[i], &b = o.nodes_[i];
      if (a.domain_id != b.domain_id || !(a.coord == b.coord) || a.cpu_capacity != b.cpu_capacity) return false;
    }
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const auto &a = links_[i], &b = o.links_[i];
      if (a.endpoint_a != b.endpoint_a || a.endpoint_b != b.endpoint_b || a.bw_capacity != b.bw_capacity ||
          a.kind != b.kind)
        return false;
    }
    return true;
  }

 private:
  // Out-of-order releases of real-valued demands may overshoot by rounding.
  static bool beyond(double value, double capacity) { return value > capacity + 1e-9 * std::max(1.0, capacity); }

  static long long pair_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<long long>(a) << 32) | static_cast<unsigned>(b);
  }

  void check_walk(std::span<const int> path) const {
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (!valid_link(path[i])) throw std::invalid_argument("path references unknown link " + std::to_string(path[i]));
      if (i == 0) continue;
      const auto& prev = links_[static_cast<std::size_t>(path[i - 1])];
      const auto& cur = links_[static_cast<std::size_t>(path[i])];
      if (!cur.touches(prev.endpoint_a) && !cur.touches(prev.endpoint_b))
        throw std::invalid_argument("path links " + std::to_string(path[i - 1]) + " and " + std::to_string(path[i]) +
                                    " are not adjacent");
    }
  }

  // Counts nodes reachable from `start`, optionally restricted to intra links of one domain.
  std::size_t reach(int start, std::optional<int> domain) const {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<int> stack{start};
    seen[static_cast<std::size_t>(start)] = 1;
    std::size_t count = 0;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      ++count;
      for (int lid : incident_[static_cast<std::size_t>(u)]) {
        const auto& l = links_[static_cast<std::size_t>(lid)];
        if (domain && l.kind != LinkKind::intra) continue;
        int v = l.other(u);
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
    return count;
  }

  void check_connectivity() const {
    for (int d = 0; d < num_domains_; ++d) {
      const auto& members = domain_nodes_[static_cast<std::size_t>(d)];
      if (members.empty()) throw ValidationError("domain " + std::to_string(d) + " has no nodes");
      if (reach(members.front(), d) != members.size())
        throw ValidationError("domain " + std::to_string(d) + " is not connected by intra-domain links");
    }
    if (!nodes_.empty() && reach(0, std::nullopt) != nodes_.size())
      throw ValidationError("substrate graph is not connected");
  }

  int num_domains_ = 0;
  std::vector<SubstrateNode> nodes_;
  std::vector<SubstrateLink> links_;
  std::vector<std::vector<int>> incident_;
  std::vector<std::vector<int>> domain_nodes_;
  std::unordered_map<long long, int> pair_index_;
  std::unordered_set<int> active_;
};

}  // namespace hflvne
