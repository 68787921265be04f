#pragma once

#include <cstddef>
#include <vector>

namespace hflvne {

inline constexpr int kUnmapped = -1;

/// Outcome of one embedding attempt. For a rejected request the maps keep
/// whatever was placed before the failure so that per-element indicators
/// can still be inspected; none of those resources remain allocated.
struct EmbeddingRecord {
  int vnr_id = -1;
  std::vector<int> node_map;                 // virtual node -> substrate node, kUnmapped if none
  std::vector<std::vector<int>> link_paths;  // virtual link -> substrate link ids, empty if none
  std::vector<double> node_cpu;              // cpu held per virtual node
  std::vector<double> link_bw;               // bandwidth held per virtual link, on every hop
  double revenue = 0.0;
  double cost = 0.0;
  bool accepted = false;

  std::size_t hops(std::size_t vlink) const { return link_paths[vlink].size(); }

  /// Product of the node and link placement indicators: 1 only if every
  /// virtual node is mapped and every virtual link has a path.
  bool indicator_product() const {
    for (int n : node_map)
      if (n == kUnmapped) return false;
    for (const auto& p : link_paths)
      if (p.empty()) return false;
    return true;
  }
};

}  // namespace hflvne
