#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hflvne/agent.hpp"
#include "hflvne/engine.hpp"
#include "hflvne/substrate.hpp"
#include "hflvne/workload.hpp"

namespace hflvne {

struct RankScore {
  int node_id = 0;
  double score = 0.0;
};

/// NodeRank-style topology/resource score. Each node starts from
/// cpu_available * (sum of incident available bandwidth); two passes then
/// blend that seed with a random-walk step in which every node spreads its
/// current score evenly over its neighbours:
///   r' = 0.5 * r0 + 0.5 * sum_{j ~ k} r_j / deg(j)
inline std::vector<RankScore> noderank_scores(const Substrate& s) {
  const std::size_t n = s.num_nodes();
  std::vector<double> seed(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double bw = 0.0;
    for (int lid : s.incident(static_cast<int>(k))) bw += s.link(lid).bw_available;
    seed[k] = s.nodes()[k].cpu_available * bw;
  }
  std::vector<double> r = seed, next(n);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t k = 0; k < n; ++k) {
      double walk = 0.0;
      for (int lid : s.incident(static_cast<int>(k))) {
        const int j = s.link(lid).other(static_cast<int>(k));
        walk += r[static_cast<std::size_t>(j)] / static_cast<double>(s.incident(j).size());
      }
      next[k] = 0.5 * seed[k] + 0.5 * walk;
    }
    r.swap(next);
  }
  std::vector<RankScore> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back({static_cast<int>(k), r[k]});
  return out;
}

inline std::vector<RankScore> random_ranking(const Substrate& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RankScore> out;
  out.reserve(s.num_nodes());
  for (std::size_t k = 0; k < s.num_nodes(); ++k) out.push_back({static_cast<int>(k), u(rng)});
  return out;
}

/// Same candidate list for every virtual node, minus nodes short on cpu.
inline CandidateLists candidates_from_scores(const Substrate& s, const VirtualNetworkRequest& vnr,
                                             const std::vector<RankScore>& scores) {
  std::vector<double> priority;
  std::vector<int> ids;
  for (const auto& r : scores) {
    priority.push_back(r.score);
    ids.push_back(r.node_id);
  }
  CandidateLists out(vnr.num_nodes());
  for (std::size_t v = 0; v < vnr.num_nodes(); ++v) {
    const double demand = vnr.node_demands[v];
    out[v] = rank_by_priority(priority, ids, [&](std::size_t i) { return s.node(ids[i]).cpu_available >= demand; });
  }
  return out;
}

class NodeRankPolicy : public PolicyProvider {
 public:
  std::string name() const override { return "noderank"; }
  CandidateLists rank(const Substrate& s, const VirtualNetworkRequest& vnr) override {
    return candidates_from_scores(s, vnr, noderank_scores(s));
  }
};

/// Fresh uniform scores per request, keyed by (seed, vnr_id).
class RandomPolicy : public PolicyProvider {
 public:
  explicit RandomPolicy(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  CandidateLists rank(const Substrate& s, const VirtualNetworkRequest& vnr) override {
    return candidates_from_scores(s, vnr, random_ranking(s, derive_seed(seed_, static_cast<std::uint64_t>(vnr.vnr_id))));
  }

 private:
  std::uint64_t seed_;
};

}  // namespace hflvne
