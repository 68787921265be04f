#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "hflvne/agent.hpp"
#include "hflvne/baselines.hpp"
#include "hflvne/config.hpp"
#include "hflvne/engine.hpp"
#include "hflvne/federation.hpp"
#include "hflvne/metrics.hpp"
#include "hflvne/substrate.hpp"
#include "hflvne/workload.hpp"

namespace hflvne {

/// Sub-seed streams derived from the run seed.
enum class SeedStream : std::uint64_t { substrate = 1, workload = 2, init = 3, explore = 4, random_policy = 5 };

inline std::uint64_t stream_seed(std::uint64_t seed, SeedStream s, std::uint64_t index = 0) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(s)), index);
}

struct Scenario {
  Substrate substrate;
  VnrStream stream;
};

inline Scenario generate_scenario(const ExperimentConfig& cfg) {
  return {generate_substrate(cfg.substrate, stream_seed(cfg.seed, SeedStream::substrate)),
          generate_vnr_stream(cfg.workload, stream_seed(cfg.seed, SeedStream::workload))};
}

/// A contiguous slice of the stream plus the time its phase starts (the
/// arrival time of the request just before it, or 0).
struct Split {
  VnrStream requests;
  double origin = 0.0;
};

inline Split slice(const VnrStream& stream, std::size_t begin, std::size_t count) {
  Split s;
  begin = std::min(begin, stream.size());
  const auto end = std::min(stream.size(), begin + count);
  s.requests.assign(stream.begin() + static_cast<std::ptrdiff_t>(begin), stream.begin() + static_cast<std::ptrdiff_t>(end));
  s.origin = begin == 0 ? 0.0 : stream[begin - 1].t_s;
  return s;
}

inline Split train_split(const VnrStream& stream, const ExperimentConfig& cfg) {
  return slice(stream, 0, static_cast<std::size_t>(cfg.train_size));
}

inline Split test_split(const VnrStream& stream, const ExperimentConfig& cfg) {
  return slice(stream, static_cast<std::size_t>(cfg.train_size), static_cast<std::size_t>(cfg.test_size));
}

struct Summary {
  double ltar = 0.0;
  double ltar2c = 0.0;
  double acc = 0.0;
};

/// Whole-run indicators; undefined values are reported as NaN.
inline Summary summarize(const MetricsLedger& ledger) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Summary s{nan, nan, nan};
  if (ledger.span() > 0.0) s.ltar = ledger.ltar();
  if (ledger.total_cost() > 0.0) s.ltar2c = ledger.ltar2c();
  if (ledger.total_count() > 0) s.acc = ledger.acc();
  return s;
}

struct EpochSummary {
  int epoch = 0;
  Summary metrics;
  std::size_t rounds = 0;  // federation rounds completed during the epoch
};

struct TrainingRun {
  Checkpoint checkpoint;
  std::vector<FederationRound> rounds;
  std::vector<EpochSummary> epochs;
  std::optional<FederatedSnapshot> last_snapshot;
  double wall_ms_per_round = 0.0;
};

/// Federated training over repeated passes of the training split. Each pass
/// replays the split on a fresh copy of the substrate with exploring
/// policies. Whenever every domain has `batch_size` new episodes, all of
/// them take one local step and a synchronous aggregation round follows.
inline TrainingRun train_federated(const Substrate& initial, const Split& split, const ExperimentConfig& cfg,
                                   std::ostream* round_log = nullptr) {
  const int D = initial.num_domains();
  const auto& tc = cfg.training;
  const PolicyParams init = random_params(stream_seed(cfg.seed, SeedStream::init), tc.init_scale);
  std::vector<DomainAgent> agents;
  for (int d = 0; d < D; ++d) agents.emplace_back(d, init);

  TrainingRun run;
  if (round_log) write_round_log_header(*round_log, static_cast<std::size_t>(D));
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Substrate substrate = initial;
    substrate.reset_resources();
    std::vector<PolicyParams> published;
    for (const auto& a : agents) published.push_back(a.params());
    HflPolicy policy(published, HflPolicy::Mode::explore, stream_seed(cfg.seed, SeedStream::explore, static_cast<std::uint64_t>(epoch)));
    policy.set_rejection_reward(tc.rejection_reward);
    std::size_t rounds_before = run.rounds.size();

    policy.set_episode_sink([&](int d, DecisionTrace trace) {
      agents[static_cast<std::size_t>(d)].add_episode(std::move(trace));
      for (const auto& a : agents)
        if (a.pending_episodes() < static_cast<std::size_t>(tc.batch_size)) return;

      std::vector<DomainReport> reports;
      for (auto& a : agents) {
        DomainReport rep;
        rep.domain_id = a.domain_id();
        rep.state = *a.buffer().front().decisions.front().state;
        for (const auto& t : a.buffer())
          for (const auto& dec : t.decisions) rep.actions.push_back(dec.state->node_ids[dec.chosen_row]);
        a.train_local(tc.learning_rate);
        rep.reward = a.upload()->reward_sum;
        rep.next_state = extract_state(substrate, a.domain_id());
        reports.push_back(std::move(rep));
      }
      auto round = run_round(std::span<DomainAgent>(agents), static_cast<int>(run.rounds.size()));
      run.last_snapshot = assemble_snapshot(reports);
      for (const auto& a : agents) policy.publish(a.domain_id(), a.params());
      if (round_log) write_round_log_row(*round_log, round);
      run.rounds.push_back(std::move(round));
    });

    MetricsLedger ledger(split.origin);
    run_simulation(substrate, split.requests, policy, ledger);
    run.epochs.push_back({epoch, summarize(ledger), run.rounds.size() - rounds_before});
  }

  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  run.wall_ms_per_round = run.rounds.empty() ? 0.0 : ms / static_cast<double>(run.rounds.size());
  for (const auto& a : agents) run.checkpoint.domains.push_back(a.params());
  run.checkpoint.global = run.rounds.empty() ? init : run.rounds.back().global_params;
  return run;
}

struct Evaluation {
  std::string policy;
  Summary summary;
  std::vector<SeriesPoint> series;
  SimulationResult result;
  MetricsLedger ledger;
  double wall_ms = 0.0;
};

/// Frozen-policy run over one split on a fresh copy of the substrate.
inline Evaluation evaluate_policy(const Substrate& initial, const Split& split, PolicyProvider& policy,
                                  double sample_interval, SimulationOptions options = {}) {
  Substrate substrate = initial;
  substrate.reset_resources();
  Evaluation ev;
  ev.policy = policy.name();
  ev.ledger = MetricsLedger(split.origin);
  const auto t0 = std::chrono::steady_clock::now();
  ev.result = run_simulation(substrate, split.requests, policy, ev.ledger, options);
  ev.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  ev.summary = summarize(ev.ledger);
  ev.series = ev.ledger.series(sample_interval);
  return ev;
}

/// Builds the named policy. `hfl` needs a checkpoint.
inline std::unique_ptr<PolicyProvider> make_policy(const std::string& name, const ExperimentConfig& cfg,
                                                   const Checkpoint* checkpoint, int num_domains) {
  if (name == "noderank") return std::make_unique<NodeRankPolicy>();
  if (name == "random") return std::make_unique<RandomPolicy>(stream_seed(cfg.seed, SeedStream::random_policy));
  if (name == "hfl") {
    if (!checkpoint) throw ConfigError("policy hfl needs a checkpoint");
    if (static_cast<int>(checkpoint->domains.size()) != num_domains)
      throw ValidationError("checkpoint has " + std::to_string(checkpoint->domains.size()) +
                            " domain lines but the substrate has " + std::to_string(num_domains) + " domains");
    return std::make_unique<HflPolicy>(checkpoint->domains, HflPolicy::Mode::greedy);
  }
  throw ConfigError("unknown policy '" + name + "'");
}

inline void write_epoch_csv(std::ostream& out, const std::vector<EpochSummary>& epochs) {
  out << "epoch,ltar,ltar2c,acc,rounds\n";
  for (const auto& e : epochs)
    out << e.epoch << ',' << text::fmt(e.metrics.ltar) << ',' << text::fmt(e.metrics.ltar2c) << ','
        << text::fmt(e.metrics.acc) << ',' << e.rounds << '\n';
}

}  // namespace hflvne
