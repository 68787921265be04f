#pragma once

#include <concepts>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "hflvne/agent.hpp"
#include "hflvne/errors.hpp"
#include "hflvne/text_io.hpp"

namespace hflvne {

/// Sample-count weighted mean of the uploaded parameters.
inline PolicyParams aggregate(std::span<const ParamUpload> uploads) {
  if (uploads.empty()) throw EmptyRound();
  double total = 0.0;
  for (const auto& u : uploads) {
    if (u.sample_count == 0) throw std::invalid_argument("upload with zero samples");
    total += static_cast<double>(u.sample_count);
  }
  PolicyParams g;
  for (const auto& u : uploads) {
    const double w = static_cast<double>(u.sample_count) / total;
    for (std::size_t c = 0; c < kNumFeatures; ++c) g.kernel[c] += w * u.params.kernel[c];
    g.bias += w * u.params.bias;
  }
  return g;
}

/// sum_i n_i * loss_i / sum_i n_i
inline double global_loss(std::span<const ParamUpload> uploads) {
  if (uploads.empty()) throw EmptyRound();
  double num = 0.0, den = 0.0;
  for (const auto& u : uploads) {
    if (u.sample_count == 0) throw std::invalid_argument("upload with zero samples");
    num += static_cast<double>(u.sample_count) * u.local_loss;
    den += static_cast<double>(u.sample_count);
  }
  return num / den;
}

struct FederationRound {
  int round_id = 0;
  std::vector<ParamUpload> uploads;
  PolicyParams global_params;
  double global_loss = 0.0;
};

/// A federated participant exposes a staged upload and accepts broadcasts.
template <class P>
concept Participant = requires(P p, const P cp, const PolicyParams& g) {
  { cp.domain_id() } -> std::convertible_to<int>;
  { cp.upload() } -> std::convertible_to<const std::optional<ParamUpload>&>;
  p.receive(g);
};

/// One synchronous round: collect every upload, aggregate, broadcast.
/// Throws MissingUpload before touching anyone if a participant is not ready.
template <Participant P>
FederationRound run_round(std::span<P> participants, int round_id) {
  if (participants.empty()) throw EmptyRound();
  FederationRound round;
  round.round_id = round_id;
  for (const auto& p : participants) {
    if (!p.upload()) throw MissingUpload(p.domain_id());
    round.uploads.push_back(*p.upload());
  }
  round.global_params = aggregate(round.uploads);
  round.global_loss = global_loss(round.uploads);
  for (auto& p : participants) p.receive(round.global_params);
  return round;
}

/// What one domain reports to the global model for logging.
struct DomainReport {
  int domain_id = 0;
  std::optional<StateMatrix> state;
  std::vector<int> actions;  // chosen substrate nodes, in decision order
  double reward = 0.0;       // batch reward sum
  std::optional<StateMatrix> next_state;
};

struct FederatedSnapshot {
  std::vector<int> domain_ids;
  std::vector<std::optional<StateMatrix>> states;
  std::vector<std::vector<int>> actions;
  std::vector<double> rewards;
  std::vector<std::optional<StateMatrix>> next_states;
};

inline FederatedSnapshot assemble_snapshot(std::span<const DomainReport> reports) {
  if (reports.empty()) throw std::invalid_argument("federated snapshot needs at least one domain report");
  FederatedSnapshot s;
  for (const auto& r : reports) {
    s.domain_ids.push_back(r.domain_id);
    s.states.push_back(r.state);
    s.actions.push_back(r.actions);
    s.rewards.push_back(r.reward);
    s.next_states.push_back(r.next_state);
  }
  return s;
}

/// Round log header for `num_domains` participants.
inline void write_round_log_header(std::ostream& out, std::size_t num_domains) {
  out << "round_id,global_loss";
  for (std::size_t d = 0; d < num_domains; ++d) out << ",local_loss_" << d;
  for (std::size_t d = 0; d < num_domains; ++d) out << ",reward_mean_" << d;
  out << '\n';
}

inline void write_round_log_row(std::ostream& out, const FederationRound& r) {
  out << r.round_id << ',' << text::fmt(r.global_loss);
  for (const auto& u : r.uploads) out << ',' << text::fmt(u.local_loss);
  for (const auto& u : r.uploads) out << ',' << text::fmt(u.reward_mean);
  out << '\n';
}

}  // namespace hflvne
