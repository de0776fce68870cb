#include "vodswarm/playback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vodswarm/error.hpp"

namespace vodswarm::playback {

std::size_t PlaybackStats::on_time() const {
  return static_cast<std::size_t>(
      std::count_if(path.begin(), path.end(), [](const PathEntry& e) { return e.on_time(); }));
}

PlaybackTracker::PlaybackTracker(double piece_duration, std::size_t startup_pieces)
    : piece_duration_(piece_duration), startup_pieces_(std::max<std::size_t>(1, startup_pieces)) {}

std::optional<double> PlaybackTracker::schedule(double t) {
  ++epoch_;
  return t;
}

void PlaybackTracker::end_stall(double now) {
  stats_.stall_durations.push_back(now - stall_start_);
}

std::optional<double> PlaybackTracker::try_start(double now, const swarm::Bitfield& have) {
  const std::size_t need = std::min(startup_pieces_, region_.size());
  for (std::size_t i = 0; i < need; ++i)
    if (!have[region_.first + i]) return std::nullopt;
  stats_.startup_latencies.push_back(now - request_time_);
  state_ = PlaybackState::Playing;
  next_piece_ = region_.first;
  return schedule(now);
}

std::optional<double> PlaybackTracker::begin_request(double now, PieceRange region, const swarm::Bitfield& have) {
  halt(now);
  region_ = region;
  request_time_ = now;
  next_piece_ = region.first;
  state_ = PlaybackState::Starting;
  return try_start(now, have);
}

void PlaybackTracker::halt(double now) {
  if (state_ == PlaybackState::Stalled) end_stall(now);
  if (state_ == PlaybackState::Starting) stats_.startup_latencies.push_back(now - request_time_);
  if (state_ != PlaybackState::Idle && state_ != PlaybackState::Done) ++epoch_;
  state_ = PlaybackState::Idle;
}

std::optional<double> PlaybackTracker::on_piece(double now, std::size_t piece, const swarm::Bitfield& have) {
  if (state_ == PlaybackState::Starting) return try_start(now, have);
  if (state_ == PlaybackState::Stalled && piece == next_piece_) {
    end_stall(now);
    stats_.path.push_back({piece, stall_deadline_, now});
    stats_.played.push_back({now, piece});
    ++next_piece_;
    state_ = PlaybackState::Playing;
    return schedule(now + piece_duration_);
  }
  return std::nullopt;
}

std::optional<double> PlaybackTracker::on_tick(double now, const swarm::Bitfield& have) {
  if (state_ != PlaybackState::Playing) return std::nullopt;
  if (next_piece_ > region_.last) {
    state_ = PlaybackState::Done;
    ++stats_.completed_requests;
    return std::nullopt;
  }
  if (have[next_piece_]) {
    stats_.path.push_back({next_piece_, now, now});
    stats_.played.push_back({now, next_piece_});
    ++next_piece_;
    return schedule(now + piece_duration_);
  }
  ++stats_.interruptions;
  state_ = PlaybackState::Stalled;
  stall_start_ = now;
  stall_deadline_ = now;
  return std::nullopt;
}

void PlaybackTracker::close(double horizon) {
  if (state_ == PlaybackState::Stalled) {
    end_stall(horizon);
    stats_.path.push_back({next_piece_, stall_deadline_, std::numeric_limits<double>::infinity()});
  }
  if (state_ == PlaybackState::Starting) stats_.startup_latencies.push_back(horizon - request_time_);
  if (state_ != PlaybackState::Done) state_ = PlaybackState::Idle;
}

PlaybackStats playback_model(std::span<const PlaybackRequest> requests, std::span<const double> piece_arrivals,
                             double piece_duration, std::size_t startup_pieces, double horizon) {
  constexpr double kNever = std::numeric_limits<double>::infinity();
  PlaybackTracker tracker(piece_duration, startup_pieces);
  swarm::Bitfield have(piece_arrivals.size(), false);

  std::vector<std::size_t> order(piece_arrivals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return piece_arrivals[a] < piece_arrivals[b]; });

  const double first_request = requests.empty() ? 0.0 : requests.front().arrival;
  std::size_t next_arrival = 0;
  while (next_arrival < order.size() && piece_arrivals[order[next_arrival]] <= first_request) {
    have[order[next_arrival]] = true;
    ++next_arrival;
  }

  std::size_t next_request = 0;
  std::optional<double> tick;
  double now = first_request;
  while (true) {
    double t_piece = next_arrival < order.size() ? piece_arrivals[order[next_arrival]] : kNever;
    double t_request = next_request < requests.size() ? requests[next_request].arrival : kNever;
    double t_tick = tick.value_or(kNever);
    double t = std::min({t_piece, t_request, t_tick});
    if (t == kNever || t > horizon) break;
    now = t;
    // Equal instants: arrivals first, so a piece landing on its deadline is on time.
    if (t_piece == t) {
      std::size_t piece = order[next_arrival++];
      have[piece] = true;
      if (auto next = tracker.on_piece(now, piece, have)) tick = next;
    } else if (t_request == t) {
      const auto& r = requests[next_request++];
      if (r.halt) {
        tracker.halt(now);
        tick.reset();
      } else {
        tick = tracker.begin_request(now, r.region, have);
      }
    } else {
      tick.reset();
      if (auto next = tracker.on_tick(now, have)) tick = next;
    }
  }
  tracker.close(horizon);
  return tracker.stats();
}

double continuity_index(std::span<const double> deadlines, std::span<const double> arrivals) {
  if (deadlines.empty()) throw InputError("continuity index undefined for an empty playback path");
  if (deadlines.size() != arrivals.size()) throw InputError("deadline and arrival counts differ");
  std::size_t on_time = 0;
  for (std::size_t i = 0; i < deadlines.size(); ++i)
    if (arrivals[i] <= deadlines[i]) ++on_time;
  return static_cast<double>(on_time) / static_cast<double>(deadlines.size());
}

double fairness(std::span<const double> rates) {
  if (rates.empty()) throw InputError("fairness undefined without peers");
  double sum = 0.0, sum_sq = 0.0;
  for (double x : rates) {
    sum += x;
    sum_sq += x * x;
  }
  if (sum_sq == 0.0) throw InputError("fairness undefined when every rate is zero");
  return (sum * sum) / (static_cast<double>(rates.size()) * sum_sq);
}

}  // namespace vodswarm::playback
