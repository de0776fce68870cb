#include "vodswarm/workload.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "text.hpp"
#include "vodswarm/error.hpp"
#include "vodswarm/random.hpp"

namespace vodswarm::workload {

namespace {

constexpr std::string_view kHeader = "client_id,arrival_time,start_pos,end_pos,interaction";
constexpr double kShortRequestFraction = 0.2;
constexpr int kStartBins = 20;

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::string_view to_string(Interaction i) {
  switch (i) {
    case Interaction::Play: return "play";
    case Interaction::Pause: return "pause";
    case Interaction::JumpForward: return "jumpf";
    case Interaction::JumpBackward: return "jumpb";
    case Interaction::Stop: return "stop";
  }
  return "play";
}

std::optional<Interaction> parse_interaction(std::string_view s) {
  for (auto i : {Interaction::Play, Interaction::Pause, Interaction::JumpForward,
                 Interaction::JumpBackward, Interaction::Stop}) {
    if (to_string(i) == s) return i;
  }
  return std::nullopt;
}

std::string_view to_string(InteractivityProfile p) {
  switch (p) {
    case InteractivityProfile::HI: return "hi";
    case InteractivityProfile::MI: return "mi";
    case InteractivityProfile::LI: return "li";
  }
  return "hi";
}

std::optional<InteractivityProfile> parse_profile(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "hi") return InteractivityProfile::HI;
  if (lower == "mi") return InteractivityProfile::MI;
  if (lower == "li") return InteractivityProfile::LI;
  return std::nullopt;
}

std::size_t Workload::request_count() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.requests.size();
  return n;
}

SessionStats session_stats(const Session& s) {
  if (s.requests.empty()) throw InputError("session '" + s.client_id + "' has no requests");
  SessionStats st;
  const auto& rs = s.requests;
  st.request_count = rs.size();
  double total_duration = 0.0;
  for (const auto& r : rs) total_duration += r.duration();
  st.mean_request_duration = total_duration / static_cast<double>(rs.size());
  st.session_duration = (rs.back().arrival_time + rs.back().duration()) - rs.front().arrival_time;
  for (std::size_t i = 0; i + 1 < rs.size(); ++i) {
    // A request issued before the previous one finished leaves no idle time.
    double gap = rs[i + 1].arrival_time - (rs[i].arrival_time + rs[i].duration());
    st.inactivity_gaps.push_back(std::max(gap, 0.0));
    st.jump_distances.push_back(rs[i + 1].start_pos - rs[i].end_pos);
  }
  if (!st.inactivity_gaps.empty()) {
    double sum = 0.0;
    for (double g : st.inactivity_gaps) sum += g;
    st.mean_inactivity_gap = sum / static_cast<double>(st.inactivity_gaps.size());
  }
  return st;
}

InteractivityProfile classify_session(const Session& s, double object_length) {
  const auto st = session_stats(s);
  if (st.mean_request_duration < kShortRequestFraction * object_length) {
    return st.request_count >= 3 ? InteractivityProfile::HI : InteractivityProfile::MI;
  }
  return st.request_count <= 1 ? InteractivityProfile::LI : InteractivityProfile::MI;
}

void validate(const Workload& w) {
  if (!(std::isfinite(w.object_length) && w.object_length > 0))
    throw InputError("object_length must be positive");
  if (!(std::isfinite(w.observation_window) && w.observation_window > 0))
    throw InputError("observation window must be positive");
  if (!(std::isfinite(w.playback_rate) && w.playback_rate > 0))
    throw InputError("playback_rate must be positive");
  for (const auto& s : w.sessions) {
    if (s.requests.empty()) throw InputError("session '" + s.client_id + "' has no requests");
    for (std::size_t i = 0; i < s.requests.size(); ++i) {
      const auto& r = s.requests[i];
      if (!finite_non_negative(r.arrival_time) || !finite_non_negative(r.start_pos) ||
          !finite_non_negative(r.end_pos))
        throw InputError("session '" + s.client_id + "': negative or non-finite value");
      if (r.end_pos < r.start_pos)
        throw InputError("session '" + s.client_id + "': end_pos < start_pos");
      if (r.end_pos > w.object_length)
        throw InputError("session '" + s.client_id + "': end_pos beyond object_length");
      if (r.arrival_time >= w.observation_window)
        throw InputError("session '" + s.client_id + "': arrival beyond observation window");
      if (i > 0 && r.arrival_time < s.requests[i - 1].arrival_time)
        throw InputError("session '" + s.client_id + "': arrivals out of order");
    }
  }
}

Workload parse_trace(std::string_view text, const TraceDefaults& defaults) {
  TraceDefaults meta;
  bool seen_header = false;
  std::vector<std::string> order;
  std::map<std::string, std::vector<Request>> by_client;
  struct Pending {
    std::size_t line;
    double arrival;
  };
  std::vector<Pending> arrivals;
  std::vector<std::pair<std::size_t, double>> end_positions;

  std::size_t line_no = 0;
  for (auto raw : text::split(text, '\n')) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (seen_header) throw ParseError(line_no, "metadata line after header");
      std::istringstream in{std::string(line.substr(1))};
      std::string item;
      while (in >> item) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected key=value, got '" + item + "'");
        auto key = item.substr(0, eq);
        auto value = text::parse_double(std::string_view(item).substr(eq + 1));
        if (!value || !(*value > 0) || !std::isfinite(*value))
          throw ParseError(line_no, "bad value for '" + key + "'");
        if (key == "object_length") meta.object_length = value;
        else if (key == "window") meta.observation_window = value;
        else if (key == "playback_rate") meta.playback_rate = value;
        else throw ParseError(line_no, "unknown metadata key '" + key + "'");
      }
      continue;
    }
    if (!seen_header) {
      if (line != kHeader) throw ParseError(line_no, "expected header '" + std::string(kHeader) + "'");
      seen_header = true;
      continue;
    }
    auto fields = text::split(line, ',');
    if (fields.size() != 5) throw ParseError(line_no, "expected 5 fields, got " + std::to_string(fields.size()));
    auto client = std::string(text::trim(fields[0]));
    if (client.empty()) throw ParseError(line_no, "empty client_id");
    auto arrival = text::parse_double(fields[1]);
    auto start = text::parse_double(fields[2]);
    auto end = text::parse_double(fields[3]);
    auto interaction = parse_interaction(text::trim(fields[4]));
    if (!arrival || !finite_non_negative(*arrival)) throw ParseError(line_no, "bad arrival_time");
    if (!start || !finite_non_negative(*start)) throw ParseError(line_no, "bad start_pos");
    if (!end || !finite_non_negative(*end)) throw ParseError(line_no, "bad end_pos");
    if (!interaction) throw ParseError(line_no, "unknown interaction '" + std::string(text::trim(fields[4])) + "'");
    if (*end < *start) throw ParseError(line_no, "end_pos < start_pos");
    arrivals.push_back({line_no, *arrival});
    end_positions.emplace_back(line_no, *end);
    auto [it, inserted] = by_client.try_emplace(client);
    if (inserted) order.push_back(client);
    it->second.push_back(Request{*arrival, *start, *end, *interaction});
  }
  if (!seen_header) throw ParseError(0, "missing header");

  Workload w;
  auto pick = [&](const std::optional<double>& flag, const std::optional<double>& from_file) {
    if (defaults.override_file) return flag ? flag : from_file;
    return from_file ? from_file : flag;
  };
  auto length = pick(defaults.object_length, meta.object_length);
  auto window = pick(defaults.observation_window, meta.observation_window);
  auto rate = pick(defaults.playback_rate, meta.playback_rate);
  if (!length) throw ParseError(0, "object_length not given (flag or '# object_length=' line)");
  if (!window && defaults.window_from_extent && !order.empty()) {
    double extent = 0.0;
    for (const auto& [client, requests] : by_client)
      for (const auto& r : requests) extent = std::max(extent, r.arrival_time + r.duration());
    window = std::ceil(extent) + 1.0;
  }
  if (!window) throw ParseError(0, "observation window not given (flag or '# window=' line)");
  w.object_length = *length;
  w.observation_window = *window;
  if (rate) w.playback_rate = *rate;

  if (order.empty()) throw ParseError(0, "no sessions");
  for (const auto& a : arrivals)
    if (a.arrival >= w.observation_window) throw ParseError(a.line, "arrival beyond observation window");
  for (const auto& [line, e] : end_positions)
    if (e > w.object_length) throw ParseError(line, "end_pos beyond object_length");

  for (const auto& id : order) {
    Session s{id, std::move(by_client[id])};
    std::stable_sort(s.requests.begin(), s.requests.end(),
                     [](const Request& a, const Request& b) { return a.arrival_time < b.arrival_time; });
    w.sessions.push_back(std::move(s));
  }
  return w;
}

std::string serialize_trace(const Workload& w) {
  std::string out;
  out += "# object_length=" + text::format_double(w.object_length) +
         " window=" + text::format_double(w.observation_window) +
         " playback_rate=" + text::format_double(w.playback_rate) + "\n";
  out += kHeader;
  out += '\n';
  for (const auto& s : w.sessions) {
    for (const auto& r : s.requests) {
      out += s.client_id;
      out += ',' + text::format_double(r.arrival_time);
      out += ',' + text::format_double(r.start_pos);
      out += ',' + text::format_double(r.end_pos);
      out += ',';
      out += to_string(r.interaction);
      out += '\n';
    }
  }
  return out;
}

namespace {

// Draws a fraction in [0, 1) whose bins decay geometrically by `decay`.
class StartSampler {
 public:
  explicit StartSampler(double decay) {
    double weight = 1.0, total = 0.0;
    for (int k = 0; k < kStartBins; ++k) {
      total += weight;
      cumulative_[k] = total;
      weight *= decay;
    }
    for (auto& c : cumulative_) c /= total;
  }

  double draw(Rng& rng) const {
    double u = rng.uniform();
    int bin = 0;
    while (bin < kStartBins - 1 && u >= cumulative_[bin]) ++bin;
    return (bin + rng.uniform()) / kStartBins;
  }

 private:
  std::array<double, kStartBins> cumulative_{};
};

std::string client_name(std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "c" + digits;
}

// Low interactivity: one long request. A share of viewers watch everything;
// the rest quit early, which keeps the beginning of the object the most popular.
Request li_request(double length, const StartSampler& starts, Rng& rng) {
  constexpr double kFullViewShare = 0.4;
  constexpr double kFromBeginningShare = 0.5;
  if (rng.uniform() < kFullViewShare) return {0.0, 0.0, length, Interaction::Play};
  double start = rng.uniform() < kFromBeginningShare ? 0.0 : starts.draw(rng) * (1.0 - kShortRequestFraction) * length;
  double min_duration = kShortRequestFraction * length;
  double spare = length - start - min_duration;
  double u = rng.uniform();
  double end = std::min(length, start + min_duration + spare * u * u);
  return {0.0, start, end, Interaction::Play};
}

}  // namespace

Workload generate_workload(const GeneratorConfig& cfg) {
  if (cfg.session_count == 0) throw ConfigError("session_count must be positive");
  if (!(cfg.object_length > 0) || !std::isfinite(cfg.object_length))
    throw ConfigError("object_length must be positive");
  if (!(cfg.playback_rate > 0)) throw ConfigError("playback_rate must be positive");
  if (!(cfg.mean_session_gap > 0)) throw ConfigError("mean_session_gap must be positive");
  if (!(cfg.mean_think_time > 0)) throw ConfigError("mean_think_time must be positive");
  if (!(cfg.start_skew > 0 && cfg.start_skew <= 1.0)) throw ConfigError("start_skew must be in (0, 1]");

  const double length = cfg.object_length;
  Rng rng(cfg.seed);
  StartSampler starts(cfg.start_skew);

  Workload w;
  w.object_length = length;
  w.playback_rate = cfg.playback_rate;
  double session_start = 0.0;
  double horizon = 0.0;

  for (std::size_t i = 0; i < cfg.session_count; ++i) {
    session_start += rng.exponential(cfg.mean_session_gap);
    Session s{client_name(i), {}};

    if (cfg.profile == InteractivityProfile::LI) {
      Request r = li_request(length, starts, rng);
      r.arrival_time = session_start;
      s.requests.push_back(r);
    } else {
      std::size_t count = cfg.profile == InteractivityProfile::HI
                              ? 3 + static_cast<std::size_t>(rng.below(6))
                              : 1 + static_cast<std::size_t>(rng.below(2));
      double max_fraction = cfg.profile == InteractivityProfile::HI ? 0.15 : 0.18;
      double arrival = session_start;
      for (std::size_t k = 0; k < count; ++k) {
        double duration = rng.uniform(0.02, max_fraction) * length;
        double start = starts.draw(rng) * (length - duration);
        Request r{arrival, start, start + duration, Interaction::Play};
        if (k > 0) {
          r.interaction = start >= s.requests.back().end_pos ? Interaction::JumpForward
                                                             : Interaction::JumpBackward;
        }
        s.requests.push_back(r);
        arrival += duration + rng.exponential(cfg.mean_think_time);
      }
    }
    for (const auto& r : s.requests) horizon = std::max(horizon, r.arrival_time + r.duration());
    w.sessions.push_back(std::move(s));
  }
  w.observation_window = std::ceil(horizon) + 1.0;
  return w;
}

}  // namespace vodswarm::workload
