#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hflvne/engine.hpp"
#include "hflvne/record.hpp"
#include "hflvne/substrate.hpp"
#include "hflvne/text_io.hpp"
#include "hflvne/workload.hpp"

namespace hflvne {

inline constexpr std::size_t kNumFeatures = 3;
using Features = std::array<double, kNumFeatures>;

/// Per-domain observation: one row per node with
/// [available cpu, summed incident bandwidth, distance term].
struct StateMatrix {
  int domain_id = 0;
  std::vector<int> node_ids;     // row -> substrate node id
  std::vector<Features> raw;     // before normalisation
  std::vector<Features> values;  // min-max normalised per column
  std::size_t rows() const { return node_ids.size(); }
};

/// Rescales each column to [0, 1]; a constant column maps to 0.5.
inline std::vector<Features> normalize_columns(const std::vector<Features>& raw) {
  std::vector<Features> out(raw.size());
  for (std::size_t c = 0; c < kNumFeatures; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : raw) {
      lo = std::min(lo, r[c]);
      hi = std::max(hi, r[c]);
    }
    for (std::size_t i = 0; i < raw.size(); ++i) out[i][c] = hi > lo ? (raw[i][c] - lo) / (hi - lo) : 0.5;
  }
  return out;
}

inline StateMatrix extract_state(const Substrate& s, int domain_id) {
  StateMatrix m;
  m.domain_id = domain_id;
  for (int id : s.domain_nodes(domain_id)) {
    const auto& n = s.node(id);
    double sum_bw = 0.0, dis = 0.0;
    for (int lid : s.incident(id)) {
      const auto& l = s.link(lid);
      sum_bw += l.bw_available;
      // a direct incident link is one hop
      dis += distance(n.coord, s.node(l.other(id)).coord) / (1.0 + 1.0);
    }
    m.node_ids.push_back(id);
    m.raw.push_back({n.cpu_available, sum_bw, dis});
  }
  m.values = normalize_columns(m.raw);
  return m;
}

struct PolicyParams {
  std::array<double, kNumFeatures> kernel{};
  double bias = 0.0;
  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

inline PolicyParams random_params(std::uint64_t seed, double scale = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  PolicyParams p;
  for (auto& k : p.kernel) k = u(rng);
  return p;
}

inline std::vector<double> scores(const PolicyParams& p, const StateMatrix& state) {
  std::vector<double> out;
  out.reserve(state.rows());
  for (const auto& row : state.values) {
    double s = p.bias;
    for (std::size_t c = 0; c < kNumFeatures; ++c) s += row[c] * p.kernel[c];
    out.push_back(s);
  }
  return out;
}

inline std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> p(z.size());
  if (z.empty()) return p;
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - m);
  for (auto& x : p) x /= sum;
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> z) {
  std::vector<double> out(z.size());
  if (z.empty()) return out;
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - m);
  const double lse = m + std::log(sum);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

/// Probability per row of the state matrix.
inline std::vector<double> forward(const PolicyParams& p, const StateMatrix& state) {
  auto s = scores(p, state);
  return softmax(s);
}

/// Node ids sorted by descending priority (ties: lower node id first),
/// keeping only rows that `keep` accepts.
inline std::vector<int> rank_by_priority(std::span<const double> priority, std::span<const int> node_ids,
                                         const std::function<bool(std::size_t)>& keep) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < node_ids.size(); ++i)
    if (keep(i)) rows.push_back(i);
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    if (priority[a] != priority[b]) return priority[a] > priority[b];
    return node_ids[a] < node_ids[b];
  });
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(node_ids[r]);
  return out;
}

/// Filter layer: drops nodes without enough cpu, then orders by probability.
inline std::vector<int> rank_candidates(const PolicyParams& p, const StateMatrix& state, double cpu_demand) {
  auto probs = forward(p, state);
  return rank_by_priority(probs, state.node_ids, [&](std::size_t i) { return state.raw[i][0] >= cpu_demand; });
}

/// Revenue-to-cost ratio of an accepted request, `rejection_reward` otherwise.
inline double episode_reward(const EmbeddingRecord& record, double rejection_reward = 0.0) {
  if (!record.accepted) return rejection_reward;
  return record.cost > 0.0 ? record.revenue / record.cost : 1.0;
}

struct Decision {
  std::shared_ptr<const StateMatrix> state;
  std::size_t chosen_row = 0;
  std::vector<double> probabilities;
};

/// The decisions one domain made for one request plus the request's reward.
struct DecisionTrace {
  std::vector<Decision> decisions;
  double reward = 0.0;
};

struct Gradient {
  std::array<double, kNumFeatures> kernel{};
  double bias = 0.0;
};

struct TrainResult {
  PolicyParams params;
  double local_loss = 0.0;
  std::size_t sample_count = 0;
  bool degenerate = false;  // every advantage was exactly zero; params untouched
};

inline std::size_t sample_count(std::span<const DecisionTrace> traces) {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.decisions.size();
  return n;
}

/// Mean reward over the episodes of the batch.
inline double batch_baseline(std::span<const DecisionTrace> traces) {
  if (traces.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : traces) s += t.reward;
  return s / static_cast<double>(traces.size());
}

/// Mean over samples of -log p(chosen) * (reward - baseline), with p
/// recomputed from `params` on the stored state.
inline double local_loss(const PolicyParams& params, std::span<const DecisionTrace> traces, double baseline) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& t : traces)
    for (const auto& d : t.decisions) {
      auto z = scores(params, *d.state);
      total += -log_softmax(z)[d.chosen_row] * (t.reward - baseline);
      ++n;
    }
  return n ? total / static_cast<double>(n) : 0.0;
}

/// Analytic gradient of local_loss. For the chosen row c,
///   d(-log p_c)/dz_j = p_j - [j == c]
/// and dz_j/dkernel = x_j, dz_j/dbias = 1.
inline Gradient loss_gradient(const PolicyParams& params, std::span<const DecisionTrace> traces, double baseline) {
  Gradient g;
  std::size_t n = 0;
  for (const auto& t : traces) {
    const double adv = t.reward - baseline;
    for (const auto& d : t.decisions) {
      ++n;
      if (adv == 0.0) continue;
      const auto& x = d.state->values;
      auto p = forward(params, *d.state);
      double psum = 0.0;
      Features expected{};
      for (std::size_t j = 0; j < p.size(); ++j) {
        psum += p[j];
        for (std::size_t c = 0; c < kNumFeatures; ++c) expected[c] += p[j] * x[j][c];
      }
      for (std::size_t c = 0; c < kNumFeatures; ++c) g.kernel[c] += -adv * (x[d.chosen_row][c] - expected[c]);
      g.bias += -adv * (1.0 - psum);
    }
  }
  if (n) {
    for (auto& k : g.kernel) k /= static_cast<double>(n);
    g.bias /= static_cast<double>(n);
  }
  return g;
}

/// One REINFORCE step. The baseline defaults to the batch-mean reward.
inline TrainResult train_step(const PolicyParams& params, std::span<const DecisionTrace> traces, double learning_rate,
                              std::optional<double> baseline = std::nullopt) {
  if (traces.empty()) throw std::invalid_argument("train_step needs at least one trace");
  const double b = baseline.value_or(batch_baseline(traces));
  TrainResult out;
  out.params = params;
  out.sample_count = sample_count(traces);
  out.degenerate = std::all_of(traces.begin(), traces.end(), [&](const DecisionTrace& t) { return t.reward == b; });
  if (out.degenerate) return out;
  out.local_loss = local_loss(params, traces, b);
  auto g = loss_gradient(params, traces, b);
  for (std::size_t c = 0; c < kNumFeatures; ++c) out.params.kernel[c] -= learning_rate * g.kernel[c];
  out.params.bias -= learning_rate * g.bias;
  return out;
}

/// What a domain hands to the coordinator: parameters and loss only.
struct ParamUpload {
  int domain_id = 0;
  PolicyParams params;
  std::size_t sample_count = 0;
  double local_loss = 0.0;
  double reward_mean = 0.0;  // mean episode reward of the batch
  double reward_sum = 0.0;
};

/// One domain's learner: buffers its own episodes, trains locally and
/// exposes the result as an upload until the next broadcast arrives.
class DomainAgent {
 public:
  DomainAgent(int domain_id, PolicyParams initial) : domain_id_(domain_id), params_(initial) {}

  int domain_id() const { return domain_id_; }
  const PolicyParams& params() const { return params_; }
  std::size_t pending_episodes() const { return buffer_.size(); }
  const std::vector<DecisionTrace>& buffer() const { return buffer_; }
  const std::optional<ParamUpload>& upload() const { return upload_; }

  void add_episode(DecisionTrace trace) {
    if (!trace.decisions.empty()) buffer_.push_back(std::move(trace));
  }

  /// Trains on every buffered episode and stages the upload.
  /// Returns false (and stages nothing) when the buffer is empty.
  bool train_local(double learning_rate) {
    if (buffer_.empty()) return false;
    auto r = train_step(params_, buffer_, learning_rate);
    ParamUpload up;
    up.domain_id = domain_id_;
    up.params = r.params;
    up.sample_count = r.sample_count;
    up.local_loss = r.local_loss;
    for (const auto& t : buffer_) up.reward_sum += t.reward;
    up.reward_mean = up.reward_sum / static_cast<double>(buffer_.size());
    params_ = r.params;
    upload_ = up;
    buffer_.clear();
    return true;
  }

  /// Installs broadcast parameters and clears the staged upload.
  void receive(const PolicyParams& global) {
    params_ = global;
    upload_.reset();
  }

  void stage_upload(ParamUpload up) { upload_ = std::move(up); }

 private:
  int domain_id_;
  PolicyParams params_;
  std::vector<DecisionTrace> buffer_;
  std::optional<ParamUpload> upload_;
};

/// Policy provider backed by one parameter set per domain.
///
/// Each domain scores its own nodes. In greedy mode the order inside a
/// domain is deterministic; in explore mode each virtual node gets an
/// independent Gumbel-perturbed order (a sample of the softmax without
/// replacement). After each request the decisions go to the episode sink,
/// one trace per participating domain.
class HflPolicy : public PolicyProvider {
 public:
  enum class Mode { greedy, explore };
  using EpisodeSink = std::function<void(int domain_id, DecisionTrace)>;

  HflPolicy(std::vector<PolicyParams> per_domain, Mode mode = Mode::greedy, std::uint64_t seed = 0)
      : params_(std::move(per_domain)), mode_(mode), rng_(seed) {}

  void publish(int domain_id, const PolicyParams& p) { params_.at(static_cast<std::size_t>(domain_id)) = p; }
  const std::vector<PolicyParams>& params() const { return params_; }
  void set_episode_sink(EpisodeSink sink) { sink_ = std::move(sink); }
  void set_rejection_reward(double r) { rejection_reward_ = r; }

  std::string name() const override { return "hfl"; }

  CandidateLists rank(const Substrate& s, const VirtualNetworkRequest& vnr) override {
    const int D = s.num_domains();
    if (static_cast<int>(params_.size()) != D) throw std::invalid_argument("one parameter set per domain required");
    states_.clear();
    probs_.clear();
    row_of_.assign(s.num_nodes(), 0);
    domain_of_.assign(s.num_nodes(), 0);
    std::vector<double> priority(s.num_nodes());
    std::vector<int> ids(s.num_nodes());
    std::iota(ids.begin(), ids.end(), 0);
    for (int d = 0; d < D; ++d) {
      auto state = std::make_shared<const StateMatrix>(extract_state(s, d));
      auto p = forward(params_[static_cast<std::size_t>(d)], *state);
      for (std::size_t r = 0; r < state->rows(); ++r) {
        priority[static_cast<std::size_t>(state->node_ids[r])] = p[r];
        row_of_[static_cast<std::size_t>(state->node_ids[r])] = r;
        domain_of_[static_cast<std::size_t>(state->node_ids[r])] = d;
      }
      states_.push_back(std::move(state));
      probs_.push_back(std::move(p));
    }

    // Domains are tried in descending order of available cpu (ties by id);
    // inside a domain the agent's probabilities decide, or in explore mode
    // their Gumbel-perturbed logs. A request spills into the next domain
    // only when the current one runs out of usable nodes.
    std::vector<double> domain_cpu(static_cast<std::size_t>(D), 0.0);
    for (const auto& n : s.nodes()) domain_cpu[static_cast<std::size_t>(n.domain_id)] += n.cpu_available;
    std::vector<std::size_t> domain_rank(static_cast<std::size_t>(D));
    {
      auto order = descending_order(domain_cpu);
      for (std::size_t r = 0; r < order.size(); ++r) domain_rank[order[r]] = r;
    }

    CandidateLists out(vnr.num_nodes());
    std::vector<double> keyed(priority.size());
    std::extreme_value_distribution<double> gumbel(0.0, 1.0);
    for (std::size_t v = 0; v < vnr.num_nodes(); ++v) {
      const double demand = vnr.node_demands[v];
      for (std::size_t i = 0; i < priority.size(); ++i)
        keyed[i] = mode_ == Mode::explore ? std::log(priority[i]) + gumbel(rng_) : priority[i];
      auto& list = out[v];
      for (std::size_t i = 0; i < ids.size(); ++i)
        if (s.nodes()[i].cpu_available >= demand) list.push_back(ids[i]);
      std::sort(list.begin(), list.end(), [&](int a, int b) {
        const auto ra = domain_rank[static_cast<std::size_t>(domain_of_[static_cast<std::size_t>(a)])];
        const auto rb = domain_rank[static_cast<std::size_t>(domain_of_[static_cast<std::size_t>(b)])];
        if (ra != rb) return ra < rb;
        const double ka = keyed[static_cast<std::size_t>(a)], kb = keyed[static_cast<std::size_t>(b)];
        if (ka != kb) return ka > kb;
        return a < b;
      });
    }
    return out;
  }

  void observe(const VirtualNetworkRequest& /*vnr*/, const EmbeddingRecord& record) override {
    if (!sink_) return;
    const double reward = episode_reward(record, rejection_reward_);
    std::vector<DecisionTrace> per_domain(states_.size());
    for (std::size_t v = 0; v < record.node_map.size(); ++v) {
      const int n = record.node_map[v];
      if (n == kUnmapped) continue;
      const auto d = static_cast<std::size_t>(domain_of_[static_cast<std::size_t>(n)]);
      per_domain[d].decisions.push_back({states_[d], row_of_[static_cast<std::size_t>(n)], probs_[d]});
    }
    for (std::size_t d = 0; d < per_domain.size(); ++d) {
      if (per_domain[d].decisions.empty()) continue;
      per_domain[d].reward = reward;
      sink_(static_cast<int>(d), std::move(per_domain[d]));
    }
  }

 private:
  std::vector<PolicyParams> params_;
  Mode mode_;
  std::mt19937_64 rng_;
  EpisodeSink sink_;
  double rejection_reward_ = 0.0;
  std::vector<std::shared_ptr<const StateMatrix>> states_;
  std::vector<std::vector<double>> probs_;
  std::vector<std::size_t> row_of_;
  std::vector<int> domain_of_;
};

// ---------------------------------------------------------------------------
// Checkpoints: one line per domain, then one line for the global model,
// each `kernel_0 kernel_1 kernel_2 bias`.

struct Checkpoint {
  std::vector<PolicyParams> domains;
  PolicyParams global;
};

inline void save_checkpoint(std::ostream& out, const Checkpoint& c) {
  auto line = [&](const PolicyParams& p) {
    out << text::fmt(p.kernel[0]) << ' ' << text::fmt(p.kernel[1]) << ' ' << text::fmt(p.kernel[2]) << ' '
        << text::fmt(p.bias) << '\n';
  };
  for (const auto& p : c.domains) line(p);
  line(c.global);
}

inline Checkpoint load_checkpoint(std::istream& in, const std::string& source = "checkpoint") {
  text::LineReader r(in, source);
  std::vector<PolicyParams> all;
  std::vector<std::string> t;
  while (r.next(t)) {
    if (t.size() != 4) r.fail("expected 4 fields: kernel_0 kernel_1 kernel_2 bias");
    PolicyParams p;
    for (std::size_t c = 0; c < 3; ++c) p.kernel[c] = r.to_real(t[c]);
    p.bias = r.to_real(t[3]);
    for (double x : {p.kernel[0], p.kernel[1], p.kernel[2], p.bias})
      if (!std::isfinite(x)) throw ValidationError(source + ": non-finite parameter");
    all.push_back(p);
  }
  if (all.size() < 2) throw ValidationError(source + ": need at least one domain line and the global line");
  Checkpoint c;
  c.global = all.back();
  all.pop_back();
  c.domains = std::move(all);
  return c;
}

}  // namespace hflvne
