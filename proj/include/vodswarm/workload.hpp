#pragma once

// Interactive streaming workloads: requests, sessions, traces, profiles and
// the synthetic generator.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vodswarm::workload {

enum class Interaction { Play, Pause, JumpForward, JumpBackward, Stop };

std::string_view to_string(Interaction i);
std::optional<Interaction> parse_interaction(std::string_view s);

// One interactive request. Times and positions are in seconds.
struct Request {
  double arrival_time = 0.0;
  double start_pos = 0.0;
  double end_pos = 0.0;
  Interaction interaction = Interaction::Play;

  double duration() const { return end_pos - start_pos; }
  friend bool operator==(const Request&, const Request&) = default;
};

struct Session {
  std::string client_id;
  std::vector<Request> requests;  // ordered by arrival_time

  friend bool operator==(const Session&, const Session&) = default;
};

struct Workload {
  double object_length = 0.0;      // seconds
  double playback_rate = 65536.0;  // bytes per second
  double observation_window = 0.0; // seconds
  std::vector<Session> sessions;

  std::size_t request_count() const;
  friend bool operator==(const Workload&, const Workload&) = default;
};

enum class InteractivityProfile { HI, MI, LI };

std::string_view to_string(InteractivityProfile p);
std::optional<InteractivityProfile> parse_profile(std::string_view s);

struct SessionStats {
  std::size_t request_count = 0;         // R
  double session_duration = 0.0;         // D_S
  double mean_request_duration = 0.0;    // mean D_R
  double mean_inactivity_gap = 0.0;      // 0 when R = 1
  std::vector<double> inactivity_gaps;   // size R - 1
  std::vector<double> jump_distances;    // size R - 1, signed
};

// Throws InputError when the session is empty.
SessionStats session_stats(const Session& s);

// Total over all non-empty sessions: HI/MI when mean D_R is under 20% of the
// object, LI/MI otherwise.
InteractivityProfile classify_session(const Session& s, double object_length);

// Checks every Workload invariant; throws InputError naming the first breach.
void validate(const Workload& w);

// Out-of-band trace metadata (CLI flags). By default these override the
// trace's `#` metadata line; with override_file = false they only fill gaps.
struct TraceDefaults {
  std::optional<double> object_length;
  std::optional<double> observation_window;
  std::optional<double> playback_rate;
  bool override_file = true;
  // With no window anywhere, span the trace: ceil(latest request end) + 1,
  // the same rule the generator uses.
  bool window_from_extent = false;
};

// Parses the CSV trace format; errors carry the offending line number.
Workload parse_trace(std::string_view text, const TraceDefaults& defaults = {});

// Writes the trace format; parse_trace(serialize_trace(w)) == w.
std::string serialize_trace(const Workload& w);

struct GeneratorConfig {
  InteractivityProfile profile = InteractivityProfile::HI;
  std::size_t session_count = 100;
  double object_length = 300.0;
  double playback_rate = 65536.0;
  double mean_session_gap = 60.0;   // mean of the exponential inter-session gap
  double mean_think_time = 5.0;     // pause between consecutive requests
  // Per-bin decay of the start-position distribution over 20 bins.
  // 0.85 puts about half of the starts in the first 20% of the object.
  double start_skew = 0.85;
  std::uint64_t seed = 1;
};

// Throws ConfigError for non-positive counts or rates.
Workload generate_workload(const GeneratorConfig& cfg);

}  // namespace vodswarm::workload
