#pragma once

#include <initializer_list>
#include <tuple>
#include <vector>

#include "hflvne/hflvne.hpp"

namespace testing_util {

using namespace hflvne;

// Single-domain substrate; node i sits at (i, 0) unless coords are given.
inline Substrate line_substrate(std::vector<double> cpu, std::vector<std::tuple<int, int, double>> links,
                                Connectivity conn = Connectivity::required) {
  std::vector<NodeSpec> nodes;
  for (std::size_t i = 0; i < cpu.size(); ++i) nodes.push_back({0, {static_cast<double>(i), 0.0}, cpu[i]});
  std::vector<LinkSpec> ls;
  for (auto [a, b, bw] : links) ls.push_back({a, b, bw});
  return Substrate(1, nodes, ls, conn);
}

inline VirtualNetworkRequest make_vnr(int id, std::vector<double> cpu, std::vector<VirtualLink> links, double t_s = 0.0,
                                      double t_e = 1.0) {
  VirtualNetworkRequest v;
  v.vnr_id = id;
  v.node_demands = std::move(cpu);
  v.links = std::move(links);
  v.t_s = t_s;
  v.t_e = t_e;
  return v;
}

// Ranks every node by ascending id for every virtual node.
class IdOrderPolicy : public PolicyProvider {
 public:
  std::string name() const override { return "id-order"; }
  CandidateLists rank(const Substrate& s, const VirtualNetworkRequest& vnr) override {
    CandidateLists out(vnr.num_nodes());
    for (std::size_t v = 0; v < vnr.num_nodes(); ++v)
      for (const auto& n : s.nodes())
        if (n.cpu_available >= vnr.node_demands[v]) out[v].push_back(n.node_id);
    return out;
  }
};

}  // namespace testing_util
