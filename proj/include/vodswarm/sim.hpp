#pragma once

// Deterministic discrete-event simulation of a streaming swarm.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vodswarm/metrics.hpp"
#include "vodswarm/policies.hpp"
#include "vodswarm/swarm.hpp"
#include "vodswarm/workload.hpp"

namespace vodswarm::sim {

struct CapacityClass {
  double upload = 0.0;   // bytes/s
  double fraction = 0.0;
};

struct SimConfig {
  // Content layout. total_size follows from object_length * playback_rate.
  double object_length = 300.0;
  std::uint64_t piece_size = 262144;
  std::uint64_t block_size = 16384;
  double playback_rate = 65536.0;

  swarm::SwarmConfig swarm;
  policies::Policy policy;

  // Workload: a preloaded workload wins, then a trace file, then the generator.
  // generator.object_length / playback_rate / seed are filled in from this config.
  workload::GeneratorConfig generator;
  std::string trace_path;
  std::optional<workload::Workload> workload;

  std::vector<CapacityClass> capacity_classes{{131072.0, 0.5}, {65536.0, 0.5}};
  std::size_t initial_seeds = 1;
  double seed_capacity = 655360.0;
  double linger_fraction = 0.0;  // share of finished leechers that stay online
  std::size_t startup_pieces = 1;
  std::size_t streaming_window = 8;  // missing pieces ahead of playback to fetch

  std::uint64_t seed = 1;
  double horizon = 0.0;  // 0: observation window plus three object lengths
  bool check_invariants = false;
  bool record_event_log = false;

  // Throws ConfigError naming the offending field.
  void validate() const;
  swarm::ContentSpec content() const;
};

struct PeerQoS {
  std::uint32_t peer = 0;
  std::string client_id;
  std::string capacity_class;
  double arrival = 0.0;
  double continuity_index = 0.0;
  double startup_delay = 0.0;
  double bootstrap_time = 0.0;
  double mean_time_to_return = 0.0;
  std::size_t interruption_count = 0;
  double total_download_time = 0.0;
  double link_utilization = 0.0;
  double download_rate = 0.0;  // bytes/s over time present
  std::size_t pieces_played = 0;
  std::size_t formation_neighbours = 0;
  std::optional<metrics::DispersionReport> formation;
};

struct AggregateQoS {
  std::size_t peers = 0;
  double continuity_index = 0.0;
  double startup_delay = 0.0;
  double bootstrap_time = 0.0;
  double mean_time_to_return = 0.0;
  double interruption_count = 0.0;
  double total_download_time = 0.0;
  double link_utilization = 0.0;
  double fairness = 1.0;
  double formation_dispersion = 0.0;  // mean D over peers with a formation report
  std::size_t formation_samples = 0;
  std::uint64_t bytes_uploaded = 0;
  std::uint64_t bytes_downloaded = 0;
  std::uint64_t seed_bytes_uploaded = 0;
  std::uint64_t blocks_transferred = 0;
  std::uint64_t events = 0;
  double end_time = 0.0;
};

struct QoSReport {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<PeerQoS> peers;
  AggregateQoS aggregate;
};

// Stable field order; equal reports serialize to identical bytes.
std::string to_json(const QoSReport& r);
// One row per peer; formation columns are empty when absent.
std::string to_csv(const QoSReport& r);

struct InvariantStats {
  std::uint64_t checks = 0;             // events checked
  std::uint64_t duplicate_blocks = 0;   // would have thrown
  std::uint64_t incomplete_serves = 0;  // would have thrown
  std::uint64_t seed_requests = 0;
  std::size_t max_unchoked = 0;
  std::size_t max_lanes_busy = 0;
  double min_continuity = 1.0;
  double max_continuity = 0.0;
};

struct RunResult {
  QoSReport report;
  std::string event_log;  // empty unless record_event_log
  InvariantStats invariants;
};

// Runs one simulation. Identical configs yield identical results.
RunResult run(const SimConfig& cfg);

// The workload a config resolves to (trace, preloaded or generated).
workload::Workload resolve_workload(const SimConfig& cfg);

}  // namespace vodswarm::sim
