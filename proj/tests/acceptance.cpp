// Acceptance run: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hflvne/hflvne.hpp"
#include "oracles.hpp"

using namespace hflvne;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 10;

struct Verdict {
  bool pass = true;
  std::string detail;
};

bool report(int n, const Verdict& v) {
  std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << std::endl;
  return v.pass;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) {
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------
// 1. CLI pipeline per seed: generate, train, evaluate every policy over the
// whole stream, validate each decision log.

Verdict constraint_soundness(const fs::path& work) {
  Verdict v;
  const std::string bin = HFLVNE_BIN;
  double worst_s = 0;
  std::size_t logs = 0, violations = 0, accepted = 0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const auto dir = work / ("seed" + std::to_string(seed));
    fs::create_directories(dir);
    const std::string cd = "cd '" + dir.string() + "' && '" + bin + "' ";
    const std::string quiet = " > /dev/null 2>> err.txt";
    const std::string s = " --seed " + std::to_string(seed);
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = shell(cd + "generate --out ." + s + quiet) == 0 && shell(cd + "train --out tr" + s + quiet) == 0;
    for (const char* p : {"hfl", "noderank", "random"}) {
      if (!ok) break;
      const std::string ck = std::string(p) == "hfl" ? " --checkpoint tr/checkpoint.txt" : "";
      ok = shell(cd + "evaluate --split all --policy " + p + ck + " --out " + p + s + quiet) == 0;
      if (!ok) break;
      const int rc = shell(cd + "validate --log " + p + "/decisions.csv > " + p + "/validate.txt 2>> err.txt");
      const auto out = read_file(dir / p / "validate.txt");
      std::size_t checked = 0, acc = 0, bad = 0;
      if (std::sscanf(out.substr(out.rfind("checked=")).c_str(), "checked=%zu accepted=%zu violations=%zu", &checked,
                      &acc, &bad) != 3 ||
          checked != 2000)
        ok = false;
      ++logs;
      violations += bad;
      accepted += acc;
      if (rc != 0 || bad) v.pass = false;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    worst_s = std::max(worst_s, secs);
    if (!ok) {
      v.pass = false;
      v.detail += "seed " + std::to_string(seed) + " pipeline failed; ";
    }
    if (secs >= 120) v.pass = false;
  }
  v.detail += "logs=" + std::to_string(logs) + " accepted=" + std::to_string(accepted) +
              " violations=" + std::to_string(violations) + " slowest_run_s=" + text::fmt(std::round(worst_s * 100) / 100);
  return v;
}

// ---------------------------------------------------------------------------
// 2. Replays a decision log on plain arrays: release-before-allocate at equal
// times, departures by (t_e, vnr_id), link charges in descending-bandwidth
// order, releases capped at capacity.

std::vector<double> replay(const Substrate& s, const VnrStream& stream, const std::vector<DecisionLogRow>& rows,
                           bool flush) {
  std::vector<double> cpu, bw, cpu_cap, bw_cap;
  for (const auto& n : s.nodes()) {
    cpu.push_back(n.cpu_capacity);
    cpu_cap.push_back(n.cpu_capacity);
  }
  for (const auto& l : s.links()) {
    bw.push_back(l.bw_capacity);
    bw_cap.push_back(l.bw_capacity);
  }
  std::map<std::pair<double, int>, std::size_t> active;  // (t_e, id) -> row
  auto free = [&](std::size_t i) {
    const auto& vnr = stream[i];
    const auto& r = rows[i].record;
    for (std::size_t k = 0; k < r.node_map.size(); ++k) {
      auto n = static_cast<std::size_t>(r.node_map[k]);
      cpu[n] = std::min(cpu_cap[n], cpu[n] + vnr.node_demands[k]);
    }
    for (std::size_t e = 0; e < r.link_paths.size(); ++e)
      for (int l : r.link_paths[e]) {
        auto li = static_cast<std::size_t>(l);
        bw[li] = std::min(bw_cap[li], bw[li] + vnr.links[e].bw);
      }
  };
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& vnr = stream[i];
    while (!active.empty() && active.begin()->first.first <= vnr.t_s) {
      free(active.begin()->second);
      active.erase(active.begin());
    }
    const auto& r = rows[i].record;
    if (!r.accepted) continue;
    for (std::size_t k = 0; k < r.node_map.size(); ++k) cpu[static_cast<std::size_t>(r.node_map[k])] -= vnr.node_demands[k];
    std::vector<std::size_t> order(vnr.links.size());
    for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vnr.links[a].bw > vnr.links[b].bw; });
    for (auto e : order)
      for (int l : r.link_paths[e]) bw[static_cast<std::size_t>(l)] -= vnr.links[e].bw;
    active[{vnr.t_e, vnr.vnr_id}] = i;
  }
  if (flush)
    for (const auto& [key, i] : active) free(i);
  cpu.insert(cpu.end(), bw.begin(), bw.end());
  return cpu;
}

bool bit_identical(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  return true;
}

struct ConservationTally {
  int runs = 0, replay_mismatch = 0, restore_mismatch = 0;
};

void check_conservation(const Substrate& initial, const VnrStream& stream, PolicyProvider& policy, ConservationTally& t) {
  for (bool flush : {false, true}) {
    Substrate s = initial;
    s.reset_resources();
    const auto start = s.resource_vector();
    MetricsLedger ledger;
    auto res = run_simulation(s, stream, policy, ledger, {flush});
    std::stringstream log;
    write_decision_log(log, stream, res.records);
    auto rows = read_decision_log(log);
    ++t.runs;
    if (!bit_identical(replay(initial, stream, rows, flush), s.resource_vector())) ++t.replay_mismatch;
    if (flush && !bit_identical(start, s.resource_vector())) ++t.restore_mismatch;
  }
}

// ---------------------------------------------------------------------------
// 3. Tiny instances: membership in the enumerated feasible set and minimum
// hop counts on the residuals each link actually saw.

class Probe : public PolicyProvider {
 public:
  explicit Probe(PolicyProvider& inner) : inner_(inner) {}
  CandidateLists rank(const Substrate& s, const VirtualNetworkRequest& vnr) override {
    before_ = s;
    return inner_.rank(s, vnr);
  }
  void observe(const VirtualNetworkRequest& vnr, const EmbeddingRecord& r) override {
    if (!r.accepted) return;
    ++accepted;
    if (!oracle::feasible_embeddings(before_, vnr).count({r.node_map, r.link_paths})) ++outside;
    auto bw = oracle::residual_bw(before_);
    std::vector<std::size_t> order(vnr.links.size());
    for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vnr.links[a].bw > vnr.links[b].bw; });
    for (auto e : order) {
      const auto& vl = vnr.links[e];
      const int best = oracle::min_hops(before_, bw, r.node_map[static_cast<std::size_t>(vl.a)],
                                        r.node_map[static_cast<std::size_t>(vl.b)], vl.bw);
      if (best != static_cast<int>(r.link_paths[e].size())) ++longer;
      for (int l : r.link_paths[e]) bw[static_cast<std::size_t>(l)] -= vl.bw;
    }
  }
  std::string name() const override { return "probe"; }

  int accepted = 0, outside = 0, longer = 0;

 private:
  PolicyProvider& inner_;
  Substrate before_;
};

Verdict oracle_equivalence() {
  std::mt19937_64 rng(2024);
  int instances = 0, requests = 0;
  RandomPolicy random(99);
  Probe probe(random);
  while (instances < 200) {
    SubstrateConfig sc;
    sc.num_domains = 1 + static_cast<int>(rng() % 2);
    sc.nodes_per_domain = 2 + static_cast<int>(rng() % 2);
    const int n = sc.num_domains * sc.nodes_per_domain;  // 2..6
    sc.total_links = std::min(n * (n - 1) / 2, n - 1 + static_cast<int>(rng() % 4));
    sc.cpu_min = 10;
    sc.cpu_max = 60;
    sc.bw_min = 10;
    sc.bw_max = 60;
    Substrate s;
    try {
      s = generate_substrate(sc, rng());
    } catch (const InfeasibleTopology&) {
      continue;
    }
    WorkloadConfig wc;
    wc.vnr_count = 6;
    wc.vnode_min = 2;
    wc.vnode_max = std::min(3, n);
    wc.vcpu_max = 30;
    wc.vbw_max = 30;
    wc.arrival_rate = 1;
    wc.mean_lifetime = 3;
    auto stream = generate_vnr_stream(wc, rng());
    MetricsLedger ledger;
    run_simulation(s, stream, probe, ledger);
    ++instances;
    requests += static_cast<int>(stream.size());
  }
  Verdict v;
  v.pass = probe.outside == 0 && probe.longer == 0 && probe.accepted > 0;
  v.detail = "instances=" + std::to_string(instances) + " requests=" + std::to_string(requests) +
             " accepted=" + std::to_string(probe.accepted) + " outside_set=" + std::to_string(probe.outside) +
             " non_minimal_paths=" + std::to_string(probe.longer);
  return v;
}

// ---------------------------------------------------------------------------
// 4. Central differences against the analytic gradient.

Verdict gradient_check() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  const double eps = 1e-5;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    PolicyParams p{{n(rng), n(rng), n(rng)}, n(rng)};
    std::vector<DecisionTrace> batch(2 + rng() % 6);
    for (auto& t : batch) {
      t.reward = u(rng) * 2 - 0.5;
      for (std::size_t k = 0, m = 1 + rng() % 4; k < m; ++k) {
        auto st = std::make_shared<StateMatrix>();
        for (std::size_t r = 0, rows = 2 + rng() % 10; r < rows; ++r) {
          st->node_ids.push_back(static_cast<int>(r));
          st->raw.push_back({u(rng) * 100, u(rng) * 500, u(rng) * 150});
        }
        st->values = normalize_columns(st->raw);
        t.decisions.push_back({st, rng() % st->rows(), forward(p, *st)});
      }
    }
    const double b = batch_baseline(batch);
    const auto g = loss_gradient(p, batch, b);
    double diff = 0, na = 0, nf = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      auto up = p, dn = p;
      (k < 3 ? up.kernel[k] : up.bias) += eps;
      (k < 3 ? dn.kernel[k] : dn.bias) -= eps;
      const double fd = (local_loss(up, batch, b) - local_loss(dn, batch, b)) / (2 * eps);
      const double an = k < 3 ? g.kernel[k] : g.bias;
      diff += (an - fd) * (an - fd);
      na += an * an;
      nf += fd * fd;
    }
    worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nf), 1e-8}));
  }
  return {worst < 1e-4, "pairs=100 max_rel_err=" + text::fmt(worst)};
}

// ---------------------------------------------------------------------------
// 5. Federation algebra against a long-double weighted mean.

Verdict federation_algebra() {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0, 3);
  double worst_mean = 0, worst_perm = 0, worst_idem = 0, worst_loss = 0;
  int broadcast_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t D = 1 + rng() % 8;
    std::vector<ParamUpload> ups(D);
    for (std::size_t d = 0; d < D; ++d) {
      ups[d].domain_id = static_cast<int>(d);
      ups[d].params = {{n(rng), n(rng), n(rng)}, n(rng)};
      ups[d].sample_count = 1 + rng() % 500;
      ups[d].local_loss = n(rng);
    }
    const auto g = aggregate(ups);
    long double total = 0, loss = 0;
    std::array<long double, 4> mean{};
    for (const auto& u : ups) {
      const auto w = static_cast<long double>(u.sample_count);
      total += w;
      loss += w * u.local_loss;
      for (std::size_t k = 0; k < 3; ++k) mean[k] += w * u.params.kernel[k];
      mean[3] += w * u.params.bias;
    }
    auto component = [](const PolicyParams& p, std::size_t k) { return k < 3 ? p.kernel[k] : p.bias; };
    for (std::size_t k = 0; k < 4; ++k)
      worst_mean = std::max(worst_mean, static_cast<double>(std::fabs(component(g, k) - mean[k] / total)));
    worst_loss = std::max(worst_loss, static_cast<double>(std::fabs(global_loss(ups) - loss / total)));

    auto shuffled = ups;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto h = aggregate(shuffled);
    for (std::size_t k = 0; k < 4; ++k) worst_perm = std::max(worst_perm, std::fabs(component(g, k) - component(h, k)));

    auto same = ups;
    for (auto& u : same) u.params = ups[0].params;
    const auto i = aggregate(same);
    for (std::size_t k = 0; k < 4; ++k)
      worst_idem = std::max(worst_idem, std::fabs(component(i, k) - component(ups[0].params, k)));

    std::vector<DomainAgent> agents;
    for (std::size_t d = 0; d < D; ++d) {
      agents.emplace_back(static_cast<int>(d), PolicyParams{});
      agents.back().stage_upload(ups[d]);
    }
    const auto round = run_round(std::span<DomainAgent>(agents), trial);
    for (const auto& a : agents)
      if (!(a.params() == round.global_params) || a.upload()) ++broadcast_mismatch;
  }
  Verdict v;
  v.pass = worst_mean <= 1e-12 && worst_perm <= 1e-12 && worst_idem <= 1e-12 && worst_loss <= 1e-12 && broadcast_mismatch == 0;
  v.detail = "trials=200 weighted_mean_err=" + text::fmt(worst_mean) + " permutation_err=" + text::fmt(worst_perm) +
             " idempotence_err=" + text::fmt(worst_idem) + " loss_err=" + text::fmt(worst_loss) +
             " broadcast_mismatch=" + std::to_string(broadcast_mismatch);
  return v;
}

// ---------------------------------------------------------------------------
// 6-9 share one training run per seed.

double mean(const std::vector<EpochSummary>& e, std::size_t from, std::size_t to, bool ratio) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += ratio ? e[i].metrics.ltar2c : e[i].metrics.acc;
  return s / static_cast<double>(to - from);
}

struct MetricCheck {
  int runs = 0, bound_violations = 0, indicator_mismatch = 0;
  void add_summary(const Summary& s) {
    if (!std::isnan(s.acc) && !(s.acc >= 0 && s.acc <= 1)) ++bound_violations;
    if (!std::isnan(s.ltar2c) && !(s.ltar2c > 0 && s.ltar2c <= 1)) ++bound_violations;
  }
  void add(const Evaluation& ev) {
    ++runs;
    add_summary(ev.summary);
    for (const auto& p : ev.series) add_summary({p.ltar, p.ltar2c, p.acc});
    for (const auto& r : ev.result.records)
      if (r.indicator_product() != r.accepted) ++indicator_mismatch;
  }
};

std::string ratio(int k) { return std::to_string(k) + "/" + std::to_string(kSeeds); }

}  // namespace

int main() {
  const auto work = fs::temp_directory_path() / ("hflvne_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(work);
  bool all = true;

  all &= report(1, constraint_soundness(work));

  int improved = 0, depleting = 0, beat_noderank = 0, beat_random = 0;
  ConservationTally conservation;
  MetricCheck metrics;
  std::ostringstream per_seed;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    ExperimentConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto sc = generate_scenario(cfg);
    const auto run = train_federated(sc.substrate, train_split(sc.stream, cfg), cfg);

    const auto& ep = run.epochs;
    const std::size_t third = ep.size() / 3;
    const bool up = mean(ep, ep.size() - third, ep.size(), true) > mean(ep, 0, third, true) &&
                    mean(ep, ep.size() - third, ep.size(), false) > mean(ep, 0, third, false);
    improved += up;
    for (const auto& e : ep) metrics.add_summary(e.metrics);

    const auto test = test_split(sc.stream, cfg);
    std::map<std::string, Evaluation> evs;
    for (const char* name : {"hfl", "noderank", "random"}) {
      auto policy = make_policy(name, cfg, &run.checkpoint, sc.substrate.num_domains());
      evs[name] = evaluate_policy(sc.substrate, test, *policy, cfg.sample_interval);
      metrics.add(evs[name]);
      auto fresh = make_policy(name, cfg, &run.checkpoint, sc.substrate.num_domains());
      check_conservation(sc.substrate, sc.stream, *fresh, conservation);
    }

    std::vector<double> t, ltar, acc;
    for (const auto& p : evs["hfl"].series) {
      t.push_back(p.t);
      ltar.push_back(p.ltar);
      acc.push_back(p.acc);
    }
    const double s_ltar = least_squares_slope(t, ltar), s_acc = least_squares_slope(t, acc);
    const bool down = s_ltar <= 0 && s_acc <= 0;
    depleting += down;

    const auto &h = evs["hfl"].summary, &nr = evs["noderank"].summary, &rd = evs["random"].summary;
    const bool vs_nr = h.ltar2c > nr.ltar2c && h.acc >= nr.acc;
    const bool vs_rd = h.ltar2c > rd.ltar2c && h.acc > rd.acc;
    beat_noderank += vs_nr;
    beat_random += vs_rd;
    per_seed << "  seed " << seed << ": train_improved=" << up << " slope_ltar=" << text::fmt(s_ltar)
             << " slope_acc=" << text::fmt(s_acc) << " hfl=" << text::fmt(h.ltar2c) << "/" << text::fmt(h.acc)
             << " noderank=" << text::fmt(nr.ltar2c) << "/" << text::fmt(nr.acc) << " random=" << text::fmt(rd.ltar2c)
             << "/" << text::fmt(rd.acc) << '\n';
  }

  all &= report(2, {conservation.replay_mismatch == 0 && conservation.restore_mismatch == 0,
                    "runs=" + std::to_string(conservation.runs) + " replay_mismatch=" +
                        std::to_string(conservation.replay_mismatch) +
                        " flushed_not_restored=" + std::to_string(conservation.restore_mismatch)});
  all &= report(3, oracle_equivalence());
  all &= report(4, gradient_check());
  all &= report(5, federation_algebra());
  all &= report(6, {improved >= 8, "last third beats first third (ltar2c and acc) in " + ratio(improved)});
  all &= report(7, {depleting >= 8, "test ltar and acc slopes <= 0 in " + ratio(depleting)});
  all &= report(8, {beat_noderank >= 6 && beat_random >= 8,
                    "vs noderank " + ratio(beat_noderank) + " (need 6), vs random " + ratio(beat_random) + " (need 8)"});
  all &= report(9, {metrics.bound_violations == 0 && metrics.indicator_mismatch == 0 && metrics.runs > 0,
                    "evaluations=" + std::to_string(metrics.runs) + " bound_violations=" +
                        std::to_string(metrics.bound_violations) +
                        " indicator_mismatch=" + std::to_string(metrics.indicator_mismatch)});
  std::cout << "per-seed detail:\n" << per_seed.str();
  fs::remove_all(work);
  return all ? 0 : 1;
}
