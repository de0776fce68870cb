#pragma once

// Streaming playback: piece deadlines, stalls and the QoS ratios built on them.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vodswarm/policies.hpp"
#include "vodswarm/swarm.hpp"

namespace vodswarm::playback {

// Inclusive piece interval of one request.
struct PieceRange {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t size() const { return last - first + 1; }
};

// One piece reaching its deadline, in playback order.
struct PathEntry {
  std::size_t piece = 0;
  double deadline = 0.0;
  double played_at = 0.0;  // equals deadline when on time
  bool on_time() const { return played_at <= deadline; }
};

struct PlaybackStats {
  std::vector<PathEntry> path;
  std::size_t interruptions = 0;
  std::vector<double> stall_durations;
  // Wait from each request until its playback started (or was abandoned).
  std::vector<double> startup_latencies;
  std::vector<policies::PlaybackEvent> played;
  std::size_t completed_requests = 0;
  std::size_t on_time() const;
};

enum class PlaybackState { Idle, Starting, Playing, Stalled, Done };

// Event-driven playback of one peer. Methods return the time of the next
// playback tick the caller must deliver through on_tick(), if any; a newer
// tick always supersedes older ones (see epoch()).
class PlaybackTracker {
 public:
  PlaybackTracker(double piece_duration, std::size_t startup_pieces);

  std::optional<double> begin_request(double now, PieceRange region, const swarm::Bitfield& have);
  // Pause/stop: abandons the current request.
  void halt(double now);
  std::optional<double> on_piece(double now, std::size_t piece, const swarm::Bitfield& have);
  std::optional<double> on_tick(double now, const swarm::Bitfield& have);
  // Closes stalls and startups still open at the end of the run.
  void close(double horizon);

  PlaybackState state() const { return state_; }
  // Next piece to play (region start while starting up).
  std::size_t frontier() const { return next_piece_; }
  const PieceRange& region() const { return region_; }
  bool active() const {
    return state_ == PlaybackState::Starting || state_ == PlaybackState::Playing ||
           state_ == PlaybackState::Stalled;
  }
  std::uint64_t epoch() const { return epoch_; }
  const PlaybackStats& stats() const { return stats_; }

 private:
  std::optional<double> try_start(double now, const swarm::Bitfield& have);
  void end_stall(double now);
  std::optional<double> schedule(double t);

  double piece_duration_;
  std::size_t startup_pieces_;
  PlaybackState state_ = PlaybackState::Idle;
  PieceRange region_;
  std::size_t next_piece_ = 0;
  double request_time_ = 0.0;
  double stall_start_ = 0.0;
  double stall_deadline_ = 0.0;
  std::uint64_t epoch_ = 0;
  PlaybackStats stats_;
};

struct PlaybackRequest {
  double arrival = 0.0;
  PieceRange region;
  bool halt = false;  // pause/stop instead of a new region
};

// Replays a session against known piece arrival times (infinity = never).
// Pieces arriving at or before the first request start out buffered.
PlaybackStats playback_model(std::span<const PlaybackRequest> requests, std::span<const double> piece_arrivals,
                             double piece_duration, std::size_t startup_pieces, double horizon);

// Fraction of pieces that arrived by their deadline. Throws InputError on an empty path.
double continuity_index(std::span<const double> deadlines, std::span<const double> arrivals);

// Jain's index (sum x)^2 / (n sum x^2). Throws InputError when empty or all zero.
double fairness(std::span<const double> rates);

}  // namespace vodswarm::playback
