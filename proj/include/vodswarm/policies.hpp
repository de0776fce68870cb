#pragma once

// Peer selection strategies. Everything here is a pure decision function:
// callers pass in all state and apply the result themselves.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vodswarm/metrics.hpp"
#include "vodswarm/random.hpp"
#include "vodswarm/swarm.hpp"
#include "vodswarm/workload.hpp"

namespace vodswarm::policies {

using swarm::PeerId;

enum class PolicyKind {
  DispersionGreedy,
  TitForTatOnly,
  Random,
  LLP,
  LRP,
  TrackerClosest,
  YNP,
  CNP,
  GiveToGet,
  PerPieceOptimistic,
};

struct Policy {
  PolicyKind kind = PolicyKind::DispersionGreedy;
  std::size_t n = 2;  // YNP / CNP window, at least 2
};

std::string_view to_string(PolicyKind k);
// Accepts the lowercase names, optionally with an inline window, e.g. "ynp(3)".
// Throws ConfigError listing the valid names.
Policy parse_policy(std::string_view name, std::optional<std::size_t> n = std::nullopt);
std::string policy_names();
bool is_request_baseline(PolicyKind k);

// What a peer learns about a prospective neighbour.
struct CandidateInfo {
  PeerId peer_id{};
  metrics::PopularityRecord popularity_record;
  swarm::Bitfield buffer_summary;
  double request_rate = 0.0;         // N, requests per object duration
  double join_time = 0.0;
  bool has_started = false;          // holds at least one piece
  std::size_t queue_length = 0;      // requests queued at the peer (LLP)
  std::size_t requests_sent_to = 0;  // requests we sent it (LRP)
  double recent_forward_rate = 0.0;  // bytes/s forwarded to third parties
  double upload_capacity = 0.0;      // bytes/s
  std::size_t upload_slots = 4;
};

struct SelectionOutcome {
  std::vector<PeerId> selected;             // greedy order
  std::vector<double> per_step_dispersion;  // D after each step

  friend bool operator==(const SelectionOutcome&, const SelectionOutcome&) = default;
};

// Greedy dispersion-minimizing neighbour selection. Each step moves the
// candidate whose addition gives the lowest spatial dispersion of the merged
// records {own} + S + {c}; ties prefer higher request rate, then (LI only)
// peers that already hold data, then the lowest id. A merged record with no
// mass scores as D = 1.
SelectionOutcome select_neighbors_greedy(const metrics::PopularityRecord& own,
                                         std::span<const CandidateInfo> candidates,
                                         std::size_t max_size,
                                         workload::InteractivityProfile profile_hint);

// Uniform random neighbour subset, scored the same way for comparison.
SelectionOutcome select_neighbors_random(const metrics::PopularityRecord& own,
                                         std::span<const CandidateInfo> candidates,
                                         std::size_t max_size, Rng& rng);

// D of own merged with every record in `set`. Throws InputError on zero mass.
double evaluate_set_dispersion(const metrics::PopularityRecord& own,
                               std::span<const CandidateInfo> set);

// Upload a neighbour can be expected to give us: capacity over its slots.
double expected_contribution(const CandidateInfo& c);

// If the selected peers cannot jointly sustain `demand` bytes/s, reruns the
// greedy loop ranking dispersion ties by forwarding rate first.
SelectionOutcome capacity_check_and_reselect(const SelectionOutcome& outcome,
                                             const metrics::PopularityRecord& own,
                                             std::span<const CandidateInfo> candidates,
                                             std::size_t max_size,
                                             workload::InteractivityProfile profile_hint,
                                             double demand);

// The k neighbours with the highest rates; ties by lowest id.
std::vector<PeerId> tit_for_tat_unchoke(std::span<const std::pair<PeerId, double>> rates,
                                        std::size_t k);

std::optional<PeerId> optimistic_unchoke(std::span<const PeerId> choked_interested, Rng& rng);

// Request target for the LLP / LRP / TrackerClosest / YNP / CNP schemes among
// neighbours holding `piece`. Throws InputError when nobody holds it.
PeerId baseline_request_target(const Policy& policy, std::size_t piece,
                               std::span<const CandidateInfo> neighbours, double self_join_time,
                               Rng& rng);

struct PlaybackEvent {
  double time = 0.0;
  std::size_t piece = 0;
};

// Per-piece optimistic unchoke: returns the instant of the re-evaluation the
// playback event triggers, or nothing for other policies.
std::optional<double> per_piece_optimistic_hook(const Policy& policy, const PlaybackEvent& e);

}  // namespace vodswarm::policies
