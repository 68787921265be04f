#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hflvne/errors.hpp"
#include "hflvne/substrate.hpp"
#include "hflvne/text_io.hpp"

namespace hflvne {

struct VirtualLink {
  int a = 0;
  int b = 0;
  double bw = 0.0;
  friend bool operator==(const VirtualLink&, const VirtualLink&) = default;
};

struct VirtualNetworkRequest {
  int vnr_id = 0;
  std::vector<double> node_demands;
  std::vector<VirtualLink> links;
  double t_s = 0.0;
  double t_e = 0.0;

  std::size_t num_nodes() const { return node_demands.size(); }
  double lifetime() const { return t_e - t_s; }
  friend bool operator==(const VirtualNetworkRequest&, const VirtualNetworkRequest&) = default;
};

using VnrStream = std::vector<VirtualNetworkRequest>;

struct SubstrateConfig {
  int num_domains = 4;
  int nodes_per_domain = 25;
  int total_links = 600;
  double intra_link_ratio = 0.8;  // share of links kept inside domains
  int cpu_min = 50;
  int cpu_max = 100;
  int bw_min = 50;
  int bw_max = 100;
  double grid_size = 100.0;
};

struct WorkloadConfig {
  int vnr_count = 2000;
  int vnode_min = 2;
  int vnode_max = 10;
  double vlink_probability = 0.5;
  int vcpu_min = 1;
  int vcpu_max = 50;
  int vbw_min = 1;
  int vbw_max = 50;
  double arrival_rate = 0.05;
  double mean_lifetime = 1000.0;
};

/// splitmix64 finaliser; used to derive independent sub-seeds from one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

inline bool connected(std::size_t n, const std::vector<VirtualLink>& links) {
  if (n == 0) return false;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n;
  for (const auto& l : links) {
    auto ra = find(static_cast<std::size_t>(l.a)), rb = find(static_cast<std::size_t>(l.b));
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

}  // namespace detail

/// Throws ValidationError naming the first violated invariant.
inline void validate_vnr(const VirtualNetworkRequest& vnr) {
  const std::string who = "vnr " + std::to_string(vnr.vnr_id) + ": ";
  if (!std::isfinite(vnr.t_s) || !std::isfinite(vnr.t_e)) throw ValidationError(who + "non-finite time");
  if (!(vnr.t_e > vnr.t_s)) throw ValidationError(who + "departure time must exceed arrival time (t_e > t_s)");
  if (vnr.node_demands.empty()) throw ValidationError(who + "no virtual nodes");
  for (double d : vnr.node_demands)
    if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError(who + "invalid cpu demand");
  const int n = static_cast<int>(vnr.node_demands.size());
  std::set<std::pair<int, int>> seen;
  for (const auto& l : vnr.links) {
    if (l.a < 0 || l.a >= n || l.b < 0 || l.b >= n) throw ValidationError(who + "virtual link endpoint out of range");
    if (l.a == l.b) throw ValidationError(who + "virtual self-loop");
    if (!seen.insert(std::minmax(l.a, l.b)).second) throw ValidationError(who + "duplicate virtual link");
    if (!(l.bw >= 0.0) || !std::isfinite(l.bw)) throw ValidationError(who + "invalid bandwidth demand");
  }
  if (!detail::connected(vnr.node_demands.size(), vnr.links))
    throw ValidationError(who + "virtual topology is not connected");
}

inline void validate_stream(const VnrStream& stream) {
  std::set<int> ids;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    validate_vnr(stream[i]);
    if (!ids.insert(stream[i].vnr_id).second)
      throw ValidationError("duplicate vnr id " + std::to_string(stream[i].vnr_id));
    if (i > 0 && stream[i].t_s < stream[i - 1].t_s)
      throw ValidationError("stream is not sorted by arrival time at vnr " + std::to_string(stream[i].vnr_id));
  }
}

inline Substrate generate_substrate(const SubstrateConfig& cfg, std::uint64_t seed) {
  const int D = cfg.num_domains, npd = cfg.nodes_per_domain;
  if (D <= 0 || npd <= 0) throw InfeasibleTopology("need at least one domain with one node");
  const long long n = static_cast<long long>(D) * npd;
  const long long min_links = static_cast<long long>(D) * (npd - 1) + (D - 1);
  const long long max_intra = static_cast<long long>(npd) * (npd - 1) / 2;
  const long long max_inter = static_cast<long long>(npd) * npd * D * (D - 1) / 2;
  const long long total = cfg.total_links;
  if (total < min_links)
    throw InfeasibleTopology("total_links " + std::to_string(total) + " is below the " + std::to_string(min_links) +
                             " links needed to connect every domain and the whole substrate");
  if (total > n * (n - 1) / 2) throw InfeasibleTopology("total_links exceeds the number of node pairs");

  // Split the link budget between domains and the inter-domain remainder.
  const long long intra_total = D == 1 ? total : std::llround(static_cast<double>(total) * cfg.intra_link_ratio);
  std::vector<long long> intra(static_cast<std::size_t>(D));
  for (int d = 0; d < D; ++d) {
    long long share = intra_total / D + (d < intra_total % D ? 1 : 0);
    intra[static_cast<std::size_t>(d)] = std::clamp<long long>(share, npd - 1, max_intra);
  }
  auto inter_count = [&] { return total - std::accumulate(intra.begin(), intra.end(), 0LL); };
  for (int d = 0; inter_count() < D - 1; d = (d + 1) % D)
    if (intra[static_cast<std::size_t>(d)] > npd - 1) --intra[static_cast<std::size_t>(d)];
  for (int d = 0; inter_count() > max_inter; d = (d + 1) % D)
    if (intra[static_cast<std::size_t>(d)] < max_intra) ++intra[static_cast<std::size_t>(d)];
  const long long inter = inter_count();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, cfg.grid_size);
  std::uniform_int_distribution<int> cpu(cfg.cpu_min, cfg.cpu_max);
  std::uniform_int_distribution<int> bw(cfg.bw_min, cfg.bw_max);

  std::vector<NodeSpec> nodes;
  nodes.reserve(static_cast<std::size_t>(n));
  for (int d = 0; d < D; ++d)
    for (int k = 0; k < npd; ++k) {
      NodeSpec s;
      s.domain_id = d;
      s.coord.x = coord(rng);
      s.coord.y = coord(rng);
      s.cpu_capacity = cpu(rng);
      nodes.push_back(s);
    }

  std::vector<LinkSpec> links;
  std::set<std::pair<int, int>> used;
  auto add = [&](int a, int b) {
    used.insert(std::minmax(a, b));
    links.push_back({a, b, 0.0});
  };
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  for (int d = 0; d < D; ++d) {
    const int base = d * npd;
    std::vector<int> order(static_cast<std::size_t>(npd));
    std::iota(order.begin(), order.end(), base);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 1; i < npd; ++i) add(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(0, i - 1))]);

    std::vector<std::pair<int, int>> free_pairs;
    for (int a = base; a < base + npd; ++a)
      for (int b = a + 1; b < base + npd; ++b)
        if (!used.count({a, b})) free_pairs.emplace_back(a, b);
    std::shuffle(free_pairs.begin(), free_pairs.end(), rng);
    const auto extra = static_cast<std::size_t>(intra[static_cast<std::size_t>(d)] - (npd - 1));
    for (std::size_t i = 0; i < extra; ++i) add(free_pairs[i].first, free_pairs[i].second);
  }

  for (int d = 1; d < D; ++d) {
    const int peer = pick(0, d - 1);
    add(d * npd + pick(0, npd - 1), peer * npd + pick(0, npd - 1));
  }
  if (D > 1) {
    std::vector<std::pair<int, int>> free_pairs;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (a / npd != b / npd && !used.count({a, b})) free_pairs.emplace_back(a, b);
    std::shuffle(free_pairs.begin(), free_pairs.end(), rng);
    const auto extra = static_cast<std::size_t>(inter - (D - 1));
    for (std::size_t i = 0; i < extra; ++i) add(free_pairs[i].first, free_pairs[i].second);
  }
  for (auto& l : links) l.bw_capacity = bw(rng);

  return Substrate(D, nodes, links);
}

inline VnrStream generate_vnr_stream(const WorkloadConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(cfg.arrival_rate);
  std::exponential_distribution<double> life(1.0 / cfg.mean_lifetime);
  std::uniform_int_distribution<int> size(cfg.vnode_min, cfg.vnode_max);
  std::uniform_int_distribution<int> vcpu(cfg.vcpu_min, cfg.vcpu_max);
  std::uniform_int_distribution<int> vbw(cfg.vbw_min, cfg.vbw_max);
  std::bernoulli_distribution edge(cfg.vlink_probability);

  VnrStream out;
  out.reserve(static_cast<std::size_t>(std::max(cfg.vnr_count, 0)));
  double t = 0.0;
  for (int id = 0; id < cfg.vnr_count; ++id) {
    VirtualNetworkRequest vnr;
    vnr.vnr_id = id;
    t += gap(rng);
    vnr.t_s = t;
    double duration = life(rng);
    vnr.t_e = t + duration;
    if (!(vnr.t_e > vnr.t_s)) vnr.t_e = std::nextafter(vnr.t_s, INFINITY);

    const int n = size(rng);
    for (int v = 0; v < n; ++v) vnr.node_demands.push_back(vcpu(rng));
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (edge(rng)) vnr.links.push_back({a, b, 0.0});

    // Join components: each later component gets one edge into the union of earlier ones.
    std::vector<int> comp(static_cast<std::size_t>(n));
    std::iota(comp.begin(), comp.end(), 0);
    auto find = [&](int x) {
      while (comp[static_cast<std::size_t>(x)] != x) x = comp[static_cast<std::size_t>(x)];
      return x;
    };
    for (const auto& l : vnr.links) comp[static_cast<std::size_t>(find(l.a))] = find(l.b);
    std::vector<std::vector<int>> groups;
    std::vector<int> group_of(static_cast<std::size_t>(n), -1);
    for (int v = 0; v < n; ++v) {
      int r = find(v);
      if (group_of[static_cast<std::size_t>(r)] < 0) {
        group_of[static_cast<std::size_t>(r)] = static_cast<int>(groups.size());
        groups.emplace_back();
      }
      groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(r)])].push_back(v);
    }
    std::vector<int> joined = groups.empty() ? std::vector<int>{} : groups.front();
    for (std::size_t g = 1; g < groups.size(); ++g) {
      const auto& grp = groups[g];
      int a = grp[static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, grp.size() - 1)(rng))];
      int b = joined[std::uniform_int_distribution<std::size_t>(0, joined.size() - 1)(rng)];
      vnr.links.push_back({std::min(a, b), std::max(a, b), 0.0});
      joined.insert(joined.end(), grp.begin(), grp.end());
    }
    for (auto& l : vnr.links) l.bw = vbw(rng);
    out.push_back(std::move(vnr));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text formats

inline void save_substrate(std::ostream& out, const Substrate& s) {
  out << s.num_nodes() << ' ' << s.num_links() << ' ' << s.num_domains() << '\n';
  for (const auto& n : s.nodes())
    out << n.node_id << ' ' << n.domain_id << ' ' << text::fmt(n.coord.x) << ' ' << text::fmt(n.coord.y) << ' '
        << text::fmt(n.cpu_capacity) << '\n';
  for (const auto& l : s.links())
    out << l.endpoint_a << ' ' << l.endpoint_b << ' ' << text::fmt(l.bw_capacity) << '\n';
}

inline Substrate load_substrate(std::istream& in, const std::string& source = "substrate") {
  text::LineReader r(in, source);
  auto head = r.expect(3, "header <num_nodes> <num_links> <num_domains>");
  const auto num_nodes = r.to_int(head[0]), num_links = r.to_int(head[1]), num_domains = r.to_int(head[2]);
  if (num_nodes < 0 || num_links < 0 || num_domains <= 0) r.fail("header counts must be non-negative, domains positive");
  std::vector<NodeSpec> nodes;
  for (long long i = 0; i < num_nodes; ++i) {
    auto t = r.expect(5, "node line <node_id> <domain_id> <x> <y> <cpu_capacity>");
    if (r.to_int(t[0]) != i) throw ValidationError(source + ":" + std::to_string(r.line()) + ": node ids must be 0..n-1 in order");
    nodes.push_back({static_cast<int>(r.to_int(t[1])), {r.to_real(t[2]), r.to_real(t[3])}, r.to_real(t[4])});
  }
  std::vector<LinkSpec> links;
  for (long long i = 0; i < num_links; ++i) {
    auto t = r.expect(3, "link line <node_a> <node_b> <bw_capacity>");
    links.push_back({static_cast<int>(r.to_int(t[0])), static_cast<int>(r.to_int(t[1])), r.to_real(t[2])});
  }
  if (!r.at_end()) r.fail("trailing content after the declared links");
  return Substrate(static_cast<int>(num_domains), nodes, links);
}

inline void save_vnrs(std::ostream& out, const VnrStream& stream) {
  out << stream.size() << '\n';
  for (const auto& v : stream) {
    out << v.vnr_id << ' ' << text::fmt(v.t_s) << ' ' << text::fmt(v.t_e) << ' ' << v.node_demands.size() << ' '
        << v.links.size() << '\n';
    for (double d : v.node_demands) out << text::fmt(d) << '\n';
    for (const auto& l : v.links) out << l.a << ' ' << l.b << ' ' << text::fmt(l.bw) << '\n';
  }
}

inline VnrStream load_vnrs(std::istream& in, const std::string& source = "vnrs") {
  text::LineReader r(in, source);
  auto head = r.expect(1, "header <vnr_count>");
  const auto count = r.to_int(head[0]);
  if (count < 0) r.fail("negative vnr count");
  VnrStream out;
  for (long long i = 0; i < count; ++i) {
    auto h = r.expect(5, "vnr header <vnr_id> <t_s> <t_e> <num_vnodes> <num_vlinks>");
    VirtualNetworkRequest v;
    v.vnr_id = static_cast<int>(r.to_int(h[0]));
    v.t_s = r.to_real(h[1]);
    v.t_e = r.to_real(h[2]);
    const auto nv = r.to_int(h[3]), nl = r.to_int(h[4]);
    if (nv < 0 || nl < 0) r.fail("negative virtual node or link count");
    for (long long k = 0; k < nv; ++k) v.node_demands.push_back(r.to_real(r.expect(1, "virtual node <cpu_demand>")[0]));
    for (long long k = 0; k < nl; ++k) {
      auto t = r.expect(3, "virtual link <v_a> <v_b> <bw_demand>");
      v.links.push_back({static_cast<int>(r.to_int(t[0])), static_cast<int>(r.to_int(t[1])), r.to_real(t[2])});
    }
    out.push_back(std::move(v));
  }
  if (!r.at_end()) r.fail("trailing content after the declared requests");
  validate_stream(out);
  return out;
}

inline Substrate load_substrate_file(const std::string& path) {
  auto in = text::open_input(path);
  return load_substrate(in, path);
}

inline VnrStream load_vnrs_file(const std::string& path) {
  auto in = text::open_input(path);
  return load_vnrs(in, path);
}

inline void save_substrate_file(const std::string& path, const Substrate& s) {
  auto out = text::open_output(path);
  save_substrate(out, s);
}

inline void save_vnrs_file(const std::string& path, const VnrStream& stream) {
  auto out = text::open_output(path);
  save_vnrs(out, stream);
}

}  // namespace hflvne
