#include "vodswarm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <queue>
#include <set>
#include <sstream>

#include "text.hpp"
#include "vodswarm/error.hpp"
#include "vodswarm/playback.hpp"
#include "vodswarm/random.hpp"

namespace vodswarm::sim {

using swarm::BlockRef;
using swarm::PeerId;

void SimConfig::validate() const {
  if (!(object_length > 0) || !std::isfinite(object_length)) throw ConfigError("content.object_length must be positive");
  content().validate();
  swarm.validate();
  if ((policy.kind == policies::PolicyKind::YNP || policy.kind == policies::PolicyKind::CNP) && policy.n < 2)
    throw ConfigError("policy.n must be at least 2");
  if (capacity_classes.empty()) throw ConfigError("peers.capacity_classes must not be empty");
  double total = 0.0;
  for (const auto& c : capacity_classes) {
    if (!(c.upload > 0)) throw ConfigError("peers.capacity_classes: upload rates must be positive");
    if (!(c.fraction > 0)) throw ConfigError("peers.capacity_classes: fractions must be positive");
    total += c.fraction;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("peers.capacity_classes: fractions must sum to 1");
  if (initial_seeds < 1) throw ConfigError("peers.initial_seeds must be at least 1");
  if (!(seed_capacity > 0)) throw ConfigError("peers.seed_capacity must be positive");
  if (!(linger_fraction >= 0 && linger_fraction <= 1)) throw ConfigError("peers.linger_fraction must be in [0, 1]");
  if (startup_pieces < 1) throw ConfigError("playback.startup_pieces must be at least 1");
  if (streaming_window < 1) throw ConfigError("playback.streaming_window must be at least 1");
  if (horizon < 0 || !std::isfinite(horizon)) throw ConfigError("run.horizon must be non-negative");
  if (!workload && trace_path.empty()) {
    if (!(generator.mean_session_gap > 0)) throw ConfigError("workload.mean_session_gap must be positive");
    if (!(generator.mean_think_time > 0)) throw ConfigError("workload.mean_think_time must be positive");
    if (!(generator.start_skew > 0 && generator.start_skew <= 1))
      throw ConfigError("workload.start_skew must be in (0, 1]");
  }
}

swarm::ContentSpec SimConfig::content() const {
  swarm::ContentSpec c;
  c.total_size = static_cast<std::uint64_t>(std::ceil(object_length * playback_rate));
  c.piece_size = piece_size;
  c.block_size = block_size;
  c.playback_rate = playback_rate;
  return c;
}

workload::Workload resolve_workload(const SimConfig& cfg) {
  if (cfg.workload) return *cfg.workload;
  if (!cfg.trace_path.empty()) {
    std::ifstream in(cfg.trace_path);
    if (!in) throw InputError("cannot read trace '" + cfg.trace_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    workload::TraceDefaults fallback;
    fallback.object_length = cfg.object_length;
    fallback.playback_rate = cfg.playback_rate;
    fallback.override_file = false;
    fallback.window_from_extent = true;
    return workload::parse_trace(buf.str(), fallback);
  }
  if (cfg.generator.session_count == 0) {
    workload::Workload empty;
    empty.object_length = cfg.object_length;
    empty.playback_rate = cfg.playback_rate;
    empty.observation_window = cfg.object_length;
    return empty;
  }
  auto gen = cfg.generator;
  gen.object_length = cfg.object_length;
  gen.playback_rate = cfg.playback_rate;
  gen.seed = derive_stream_seed(cfg.seed, 1);
  return workload::generate_workload(gen);
}

namespace {

enum class EventKind {
  PeerArrival,
  RequestIssued,
  BlockTransferComplete,
  UnchokeTick,
  OptimisticTick,
  PlaybackTick,
  TrackerUpdate,
  PeerDeparture,
};

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::PeerArrival: return "peer_arrival";
    case EventKind::RequestIssued: return "request_issued";
    case EventKind::BlockTransferComplete: return "block_complete";
    case EventKind::UnchokeTick: return "unchoke_tick";
    case EventKind::OptimisticTick: return "optimistic_tick";
    case EventKind::PlaybackTick: return "playback_tick";
    case EventKind::TrackerUpdate: return "tracker_update";
    case EventKind::PeerDeparture: return "peer_departure";
  }
  return "?";
}

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::UnchokeTick;
  std::uint32_t actor = 0;
  std::uint32_t other = 0;
  std::uint64_t value = 0;  // request index, transfer token or playback epoch
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

struct InFlight {
  BlockRef block;
  std::uint64_t token = 0;
  double remaining = 0.0;  // bytes, as of the uploader's last settle()
};

// Uploader-side state of one directed connection.
struct UploadLink {
  bool unchoked = false;
  std::deque<BlockRef> queue;
  std::optional<InFlight> in_flight;
  double window_bytes = 0.0;  // sent during the current unchoke window

  std::size_t outstanding() const { return queue.size() + (in_flight ? 1 : 0); }
};

struct Node {
  swarm::PeerState state;
  bool present = false;
  bool departed = false;
  bool lingering = false;
  const workload::Session* session = nullptr;
  std::size_t next_request = 0;
  std::size_t requests_issued = 0;
  std::string capacity_class;

  std::map<PeerId, UploadLink> uploads;  // keyed by downloader
  std::size_t lanes_busy = 0;  // transfers in flight, sharing upload_capacity equally
  double settled_at = 0.0;
  PeerId rr_cursor{};
  std::map<PeerId, double> recv_window;     // bytes from each neighbour this unchoke window
  std::map<PeerId, double> forward_window;  // bytes each neighbour forwarded of our data
  std::map<PeerId, std::size_t> requests_sent;
  std::vector<std::optional<PeerId>> piece_source;

  playback::PlaybackTracker playback;
  std::size_t played_seen = 0;

  double arrival = 0.0;
  std::optional<double> first_piece;
  std::optional<double> last_piece;
  std::optional<double> departure;
  std::uint64_t uploaded = 0;
  std::uint64_t downloaded = 0;
  std::optional<metrics::DispersionReport> formation;
  std::size_t formation_size = 0;

  Node(double piece_duration, std::size_t startup) : playback(piece_duration, startup) {}
};

class Simulation {
 public:
  explicit Simulation(const SimConfig& cfg)
      : cfg_(cfg),
        workload_(resolve_workload(cfg)),
        content_(content_for(cfg, workload_)),
        tracker_(cfg.swarm.tracker_list_size, cfg.swarm.tracker_update_interval),
        tracker_rng_(derive_stream_seed(cfg.seed, 2)),
        policy_rng_(derive_stream_seed(cfg.seed, 3)),
        piece_rng_(derive_stream_seed(cfg.seed, 4)),
        capacity_rng_(derive_stream_seed(cfg.seed, 5)),
        linger_rng_(derive_stream_seed(cfg.seed, 6)) {
    workload::validate(workload_);
    content_.validate();
    granularity_ = content_.piece_duration();
    horizon_bins_ = static_cast<std::size_t>(std::ceil(workload_.object_length / granularity_));
    empty_record_ = metrics::PopularityRecord(granularity_, std::max<std::size_t>(1, horizon_bins_));
    horizon_ = cfg.horizon > 0 ? cfg.horizon : workload_.observation_window + 3.0 * workload_.object_length;
  }

  RunResult run();

 private:
  static swarm::ContentSpec content_for(const SimConfig& cfg, const workload::Workload& w) {
    SimConfig c = cfg;
    c.object_length = w.object_length;
    c.playback_rate = w.playback_rate;
    return c.content();
  }

  Node& node(PeerId id) { return nodes_[swarm::to_index(id)]; }
  PeerId id_of(std::size_t i) const { return PeerId{static_cast<std::uint32_t>(i)}; }

  void push(double time, EventKind kind, std::uint32_t actor = 0, std::uint32_t other = 0, std::uint64_t value = 0) {
    queue_.push(Event{time, next_seq_++, kind, actor, other, value});
  }
  void log(const Event& e, const std::string& extra = {});
  void log_line(double time, const std::string& what);

  void setup();
  void dispatch(const Event& e);
  void on_arrival(PeerId id, double now);
  void on_request(PeerId id, std::size_t index, double now);
  void on_block(PeerId from, PeerId to, std::uint64_t token, double now);
  void on_unchoke_tick(double now);
  void on_optimistic_tick(double now);
  void on_playback_tick(PeerId id, std::uint64_t epoch, double now);
  void on_tracker_update(double now);
  void on_departure(PeerId id, double now);

  policies::CandidateInfo candidate_info(PeerId viewer, PeerId id, double now);
  double request_rate(const Node& n, double now) const;
  void form_neighbourhood(PeerId id, const std::vector<PeerId>& list, std::size_t max_size, bool record, double now);
  bool connect(PeerId a, PeerId b);
  void refill(PeerId id, double now);

  swarm::Bitfield wanted(const Node& d) const;
  bool interested(PeerId d, PeerId u);
  void offer_slot(PeerId u, PeerId d);
  void unchoke(PeerId u, PeerId d);
  void choke(PeerId u, PeerId d);
  void apply_unchoke_set(PeerId u, const std::set<PeerId>& next);
  void refresh_interest(PeerId d);
  void announce_piece(PeerId d, std::size_t piece);
  void schedule_requests(PeerId d);
  std::optional<std::size_t> next_piece(const Node& d, const swarm::Bitfield& want, const swarm::Bitfield& eligible,
                                        const std::vector<const swarm::Bitfield*>& maps);
  void settle(PeerId u);
  void start_uploads(PeerId u);
  void handle_playback(PeerId id, std::optional<double> tick, double now);
  void optimistic_for(PeerId u, double now);
  void maybe_depart(PeerId id, double now);

  void check_invariants();
  QoSReport build_report();

  const SimConfig& cfg_;
  workload::Workload workload_;
  swarm::ContentSpec content_;
  double granularity_ = 1.0;
  std::size_t horizon_bins_ = 0;
  metrics::PopularityRecord empty_record_;
  double horizon_ = 0.0;
  double now_ = 0.0;
  double end_time_ = 0.0;

  swarm::TrackerState tracker_;
  Rng tracker_rng_;
  Rng policy_rng_;
  Rng piece_rng_;
  Rng capacity_rng_;
  Rng linger_rng_;

  std::vector<Node> nodes_;
  std::size_t seeds_ = 0;
  std::size_t pending_leechers_ = 0;  // not yet departed
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_token_ = 1;
  std::uint64_t events_ = 0;
  std::uint64_t blocks_ = 0;
  std::string log_;
  InvariantStats inv_;
};

void Simulation::log_line(double time, const std::string& what) {
  if (!cfg_.record_event_log) return;
  log_ += text::format_double(time);
  log_ += ' ';
  log_ += what;
  log_ += '\n';
}

void Simulation::log(const Event& e, const std::string& extra) {
  if (!cfg_.record_event_log) return;
  std::string line = kind_name(e.kind);
  line += ' ';
  line += std::to_string(e.actor);
  if (e.kind == EventKind::BlockTransferComplete) line += " to=" + std::to_string(e.other);
  if (e.kind == EventKind::RequestIssued) line += " request=" + std::to_string(e.value);
  if (!extra.empty()) line += " " + extra;
  log_line(e.time, line);
}

void Simulation::setup() {
  const double pd = content_.piece_duration();
  seeds_ = cfg_.initial_seeds;
  for (std::size_t i = 0; i < seeds_; ++i) {
    Node n(pd, cfg_.startup_pieces);
    n.state = swarm::make_peer(id_of(i), swarm::PeerRole::Seed, content_, cfg_.seed_capacity, 0.0, empty_record_);
    n.capacity_class = "seed";
    n.piece_source.resize(content_.piece_count());
    nodes_.push_back(std::move(n));
    push(0.0, EventKind::PeerArrival, static_cast<std::uint32_t>(i));
  }
  for (const auto& s : workload_.sessions) {
    std::size_t i = nodes_.size();
    double u = capacity_rng_.uniform();
    std::size_t cls = 0;
    double acc = 0.0;
    for (; cls + 1 < cfg_.capacity_classes.size(); ++cls) {
      acc += cfg_.capacity_classes[cls].fraction;
      if (u < acc) break;
    }
    const double arrival = s.requests.front().arrival_time;
    Node n(pd, cfg_.startup_pieces);
    n.state = swarm::make_peer(id_of(i), swarm::PeerRole::Leecher, content_,
                               cfg_.capacity_classes[cls].upload, arrival, empty_record_);
    n.capacity_class = text::format_double(cfg_.capacity_classes[cls].upload);
    n.session = &s;
    n.arrival = arrival;
    n.piece_source.resize(content_.piece_count());
    nodes_.push_back(std::move(n));
    if (arrival <= horizon_) {
      ++pending_leechers_;
      push(arrival, EventKind::PeerArrival, static_cast<std::uint32_t>(i));
    }
  }
  if (pending_leechers_ > 0) {
    push(cfg_.swarm.unchoke_interval, EventKind::UnchokeTick);
    push(cfg_.swarm.optimistic_interval, EventKind::OptimisticTick);
    push(cfg_.swarm.tracker_update_interval, EventKind::TrackerUpdate);
  }
}

RunResult Simulation::run() {
  setup();
  while (!queue_.empty()) {
    Event e = queue_.top();
    if (e.time > horizon_) break;
    queue_.pop();
    now_ = e.time;
    ++events_;
    dispatch(e);
    if (cfg_.check_invariants) check_invariants();
  }
  end_time_ = queue_.empty() ? now_ : horizon_;
  for (auto& n : nodes_)
    if (n.present && !n.state.is_seed()) n.playback.close(end_time_);
  RunResult r;
  r.report = build_report();
  r.event_log = std::move(log_);
  r.invariants = inv_;
  return r;
}

void Simulation::dispatch(const Event& e) {
  const PeerId actor{e.actor};
  switch (e.kind) {
    case EventKind::PeerArrival:
      log(e);
      on_arrival(actor, e.time);
      break;
    case EventKind::RequestIssued:
      log(e);
      on_request(actor, static_cast<std::size_t>(e.value), e.time);
      break;
    case EventKind::BlockTransferComplete:
      on_block(actor, PeerId{e.other}, e.value, e.time);
      break;
    case EventKind::UnchokeTick:
      log(e);
      on_unchoke_tick(e.time);
      if (pending_leechers_ > 0) push(e.time + cfg_.swarm.unchoke_interval, EventKind::UnchokeTick);
      break;
    case EventKind::OptimisticTick:
      log(e);
      on_optimistic_tick(e.time);
      if (pending_leechers_ > 0) push(e.time + cfg_.swarm.optimistic_interval, EventKind::OptimisticTick);
      break;
    case EventKind::PlaybackTick:
      on_playback_tick(actor, e.value, e.time);
      break;
    case EventKind::TrackerUpdate:
      log(e);
      on_tracker_update(e.time);
      if (pending_leechers_ > 0) push(e.time + cfg_.swarm.tracker_update_interval, EventKind::TrackerUpdate);
      break;
    case EventKind::PeerDeparture:
      log(e);
      on_departure(actor, e.time);
      break;
  }
}

double Simulation::request_rate(const Node& n, double now) const {
  // Requests per object duration, measured over at least one object duration.
  const double elapsed = std::max(now - n.state.join_time, workload_.object_length);
  return static_cast<double>(n.requests_issued) * workload_.object_length / elapsed;
}

policies::CandidateInfo Simulation::candidate_info(PeerId viewer, PeerId id, double now) {
  const Node& n = node(id);
  const Node& v = node(viewer);
  policies::CandidateInfo c;
  c.peer_id = id;
  c.popularity_record = n.state.popularity;
  c.buffer_summary = n.state.have;
  c.request_rate = request_rate(n, now);
  c.join_time = n.state.join_time;
  c.has_started = n.state.pieces_owned > 0;
  for (const auto& [d, link] : n.uploads) c.queue_length += link.outstanding();
  if (auto it = v.requests_sent.find(id); it != v.requests_sent.end()) c.requests_sent_to = it->second;
  if (auto it = v.state.forward_rate_history.find(id); it != v.state.forward_rate_history.end())
    c.recent_forward_rate = it->second;
  c.upload_capacity = n.state.upload_capacity;
  c.upload_slots = cfg_.swarm.regular_slots;
  return c;
}

void Simulation::on_arrival(PeerId id, double now) {
  Node& n = node(id);
  n.present = true;
  auto list = tracker_.join(id, now, tracker_rng_);
  if (n.state.is_seed()) return;
  // The newcomer's own record starts with the request it is about to issue.
  const auto& first = n.session->requests.front();
  n.state.popularity.add_interval(first.start_pos, first.end_pos);
  form_neighbourhood(id, list, cfg_.swarm.neighbourhood_target, true, now);
  push(now, EventKind::RequestIssued, swarm::to_index(id), 0, 0);
}

void Simulation::form_neighbourhood(PeerId id, const std::vector<PeerId>& list, std::size_t max_size, bool record,
                                    double now) {
  Node& n = node(id);
  std::vector<policies::CandidateInfo> candidates;
  for (auto p : list)
    if (node(p).present && !n.state.neighbourhood.count(p)) candidates.push_back(candidate_info(id, p, now));

  policies::SelectionOutcome outcome;
  if (cfg_.policy.kind == policies::PolicyKind::DispersionGreedy) {
    const auto hint = workload::classify_session(*n.session, workload_.object_length);
    outcome = policies::select_neighbors_greedy(n.state.popularity, candidates, max_size, hint);
    outcome = policies::capacity_check_and_reselect(outcome, n.state.popularity, candidates, max_size, hint,
                                                    content_.playback_rate);
  } else {
    outcome = policies::select_neighbors_random(n.state.popularity, candidates, max_size, policy_rng_);
  }

  if (record) {
    std::vector<metrics::PopularityRecord> records{n.state.popularity};
    // The first request is counted before it is issued.
    double rate = std::max(request_rate(n, now), 1.0);
    for (auto p : outcome.selected) {
      const auto& c = *std::find_if(candidates.begin(), candidates.end(),
                                    [p](const policies::CandidateInfo& ci) { return ci.peer_id == p; });
      records.push_back(c.popularity_record);
      rate += c.request_rate;
    }
    auto merged = metrics::merge_records(records);
    if (!merged.empty()) n.formation = metrics::dispersion_report(merged, rate);
    n.formation_size = outcome.selected.size();
    if (cfg_.record_event_log) {
      std::string line = "formation " + swarm::to_string(id) + " candidates=" + std::to_string(candidates.size()) +
                         " selected=";
      for (std::size_t i = 0; i < outcome.selected.size(); ++i)
        line += (i ? "," : "") + swarm::to_string(outcome.selected[i]);
      if (n.formation) line += " d=" + text::format_double(n.formation->spatial_dispersion);
      log_line(now, line);
    }
  }
  for (auto p : outcome.selected) connect(id, p);
}

bool Simulation::connect(PeerId a, PeerId b) {
  Node& na = node(a);
  Node& nb = node(b);
  if (a == b || na.state.neighbourhood.count(b)) return false;
  if (nb.state.neighbourhood.size() >= cfg_.swarm.neighbourhood_max) return false;
  na.state.neighbourhood.insert(b);
  nb.state.neighbourhood.insert(a);
  na.uploads.try_emplace(b);
  nb.uploads.try_emplace(a);
  if (interested(a, b)) offer_slot(b, a);
  if (interested(b, a)) offer_slot(a, b);
  schedule_requests(a);
  schedule_requests(b);
  return true;
}

void Simulation::refill(PeerId id, double now) {
  Node& n = node(id);
  const std::size_t floor = cfg_.swarm.neighbourhood_floor;
  if (n.state.neighbourhood.size() >= floor) return;
  auto list = tracker_.refill(id, n.state.neighbourhood, tracker_rng_);
  if (list.empty()) return;
  const std::size_t want = cfg_.swarm.neighbourhood_target - n.state.neighbourhood.size();
  if (n.state.is_seed()) {
    for (std::size_t i = 0; i < list.size() && i < want; ++i) connect(id, list[i]);
    return;
  }
  form_neighbourhood(id, list, want, false, now);
}

swarm::Bitfield Simulation::wanted(const Node& d) const {
  swarm::Bitfield w(content_.piece_count(), false);
  if (d.state.is_seed() || !d.present || !d.playback.active()) return w;
  const auto& region = d.playback.region();
  std::size_t taken = 0;
  for (std::size_t p = std::max(d.playback.frontier(), region.first); p <= region.last; ++p) {
    if (d.state.have[p]) continue;
    w[p] = true;
    if (++taken == cfg_.streaming_window) break;
  }
  return w;
}

bool Simulation::interested(PeerId d, PeerId u) {
  const Node& nd = node(d);
  const Node& nu = node(u);
  if (nd.state.is_seed() || !nd.present || !nu.present) return false;
  auto w = wanted(nd);
  for (std::size_t p = 0; p < w.size(); ++p)
    if (w[p] && nu.state.have[p]) return true;
  return false;
}

void Simulation::unchoke(PeerId u, PeerId d) {
  auto& link = node(u).uploads[d];
  if (link.unchoked) return;
  link.unchoked = true;
  schedule_requests(d);
}

void Simulation::choke(PeerId u, PeerId d) {
  Node& nu = node(u);
  auto it = nu.uploads.find(d);
  if (it == nu.uploads.end() || !it->second.unchoked) return;
  it->second.unchoked = false;
  Node& nd = node(d);
  for (const auto& b : it->second.queue) nd.state.release_request(b);
  it->second.queue.clear();
}

// Fills a free regular slot right away instead of waiting for the next tick.
void Simulation::offer_slot(PeerId u, PeerId d) {
  Node& nu = node(u);
  if (!nu.present || nu.state.regular_slots.count(d) || nu.state.optimistic_slot == d) return;
  if (nu.state.regular_slots.size() >= cfg_.swarm.regular_slots) return;
  nu.state.regular_slots.insert(d);
  unchoke(u, d);
}

void Simulation::apply_unchoke_set(PeerId u, const std::set<PeerId>& next) {
  Node& nu = node(u);
  std::vector<PeerId> to_choke;
  for (const auto& [d, link] : nu.uploads)
    if (link.unchoked && !next.count(d)) to_choke.push_back(d);
  for (auto d : to_choke) choke(u, d);
  for (auto d : next) unchoke(u, d);
}

void Simulation::refresh_interest(PeerId d) {
  Node& nd = node(d);
  for (auto u : nd.state.neighbourhood)
    if (interested(d, u)) offer_slot(u, d);
  schedule_requests(d);
}

void Simulation::announce_piece(PeerId d, std::size_t piece) {
  // Have-announcements are instantaneous.
  Node& nd = node(d);
  for (auto n : nd.state.neighbourhood) {
    Node& nn = node(n);
    if (nn.state.is_seed() || nn.state.have[piece]) continue;
    if (!interested(n, d)) continue;
    offer_slot(d, n);
    if (nd.uploads[n].unchoked) schedule_requests(n);
  }
}

void Simulation::schedule_requests(PeerId d) {
  Node& nd = node(d);
  if (!nd.present) return;
  if (nd.state.is_seed()) return;
  auto want = wanted(nd);
  if (std::find(want.begin(), want.end(), true) == want.end()) return;

  std::vector<PeerId> sources;
  std::vector<const swarm::Bitfield*> maps;
  for (auto u : nd.state.neighbourhood) {
    Node& nu = node(u);
    if (!nu.present) continue;
    maps.push_back(&nu.state.have);
    auto it = nu.uploads.find(d);
    if (it != nu.uploads.end() && it->second.unchoked) sources.push_back(u);
  }
  if (sources.empty()) return;

  const std::size_t depth = cfg_.swarm.pipeline_depth;
  const std::size_t pieces = content_.piece_count();
  auto issue = [&](PeerId u, std::size_t piece) {
    auto& link = node(u).uploads[d];
    auto blocks = swarm::pipeline_requests(nd.state, piece, link.outstanding(), depth);
    for (const auto& b : blocks) link.queue.push_back(b);
    nd.requests_sent[u] += blocks.size();
    return blocks.size();
  };

  if (!policies::is_request_baseline(cfg_.policy.kind)) {
    for (auto u : sources) {
      Node& nu = node(u);
      while (nu.uploads[d].outstanding() < depth) {
        swarm::Bitfield eligible(pieces, false);
        for (std::size_t p = 0; p < pieces; ++p)
          eligible[p] = want[p] && nu.state.have[p] && nd.state.unrequested_blocks(p) > 0;
        auto piece = next_piece(nd, want, eligible, maps);
        if (!piece || issue(u, *piece) == 0) break;
      }
      start_uploads(u);
    }
    return;
  }

  while (true) {
    std::vector<PeerId> open;
    for (auto u : sources)
      if (node(u).uploads[d].outstanding() < depth) open.push_back(u);
    if (open.empty()) break;
    swarm::Bitfield eligible(pieces, false);
    for (std::size_t p = 0; p < pieces; ++p) {
      if (!want[p] || nd.state.unrequested_blocks(p) == 0) continue;
      for (auto u : open)
        if (node(u).state.have[p]) {
          eligible[p] = true;
          break;
        }
    }
    auto piece = next_piece(nd, want, eligible, maps);
    if (!piece) break;
    std::vector<policies::CandidateInfo> holders;
    for (auto u : open)
      if (node(u).state.have[*piece]) holders.push_back(candidate_info(d, u, now_));
    auto target = policies::baseline_request_target(cfg_.policy, *piece, holders, nd.state.join_time, piece_rng_);
    if (issue(target, *piece) == 0) break;
  }
  for (auto u : sources) start_uploads(u);
}

// Streaming order: finish started pieces, then the earliest missing one, then rarest first.
std::optional<std::size_t> Simulation::next_piece(const Node& d, const swarm::Bitfield& want,
                                                  const swarm::Bitfield& eligible,
                                                  const std::vector<const swarm::Bitfield*>& maps) {
  for (std::size_t p = 0; p < eligible.size(); ++p)
    if (eligible[p] && d.state.unrequested_blocks(p) < content_.blocks_in_piece(p)) return p;
  auto first = std::find(want.begin(), want.end(), true);
  if (first != want.end() && eligible[static_cast<std::size_t>(first - want.begin())])
    return static_cast<std::size_t>(first - want.begin());
  return swarm::rarest_first(d.state.have, maps, piece_rng_, &eligible);
}

// Advances every in-flight transfer of u to now_ at the share in force since the last settle.
void Simulation::settle(PeerId u) {
  Node& nu = node(u);
  if (nu.lanes_busy > 0) {
    const double moved = (now_ - nu.settled_at) * nu.state.upload_capacity / static_cast<double>(nu.lanes_busy);
    for (auto& [d, link] : nu.uploads)
      if (link.in_flight) link.in_flight->remaining = std::max(0.0, link.in_flight->remaining - moved);
  }
  nu.settled_at = now_;
}

// Starts queued blocks on free lanes and reschedules every completion at the new share.
void Simulation::start_uploads(PeerId u) {
  Node& nu = node(u);
  if (!nu.present) return;
  settle(u);
  const std::size_t lanes = cfg_.swarm.total_slots();
  // Round robin over connections, starting after the last one served.
  std::vector<PeerId> order;
  for (auto it = nu.uploads.upper_bound(nu.rr_cursor); it != nu.uploads.end(); ++it) order.push_back(it->first);
  for (auto it = nu.uploads.begin(); it != nu.uploads.end() && it->first <= nu.rr_cursor; ++it)
    order.push_back(it->first);
  for (auto d : order) {
    if (nu.lanes_busy >= lanes) break;
    auto& link = nu.uploads[d];
    if (!link.unchoked || link.in_flight || link.queue.empty()) continue;
    BlockRef b = link.queue.front();
    link.queue.pop_front();
    if (!nu.state.have[b.piece]) {
      ++inv_.incomplete_serves;
      throw InvariantViolation("peer " + swarm::to_string(u) + " asked to serve incomplete piece " +
                               std::to_string(b.piece));
    }
    link.in_flight = InFlight{b, 0, static_cast<double>(content_.block_bytes(b.piece, b.block))};
    ++nu.lanes_busy;
    nu.rr_cursor = d;
  }
  if (nu.lanes_busy == 0) return;
  const double rate = nu.state.upload_capacity / static_cast<double>(nu.lanes_busy);
  for (auto& [d, link] : nu.uploads) {
    if (!link.in_flight) continue;
    link.in_flight->token = next_token_++;
    push(now_ + link.in_flight->remaining / rate, EventKind::BlockTransferComplete, swarm::to_index(u),
         swarm::to_index(d), link.in_flight->token);
  }
}

void Simulation::on_block(PeerId from, PeerId to, std::uint64_t token, double now) {
  Node& nu = node(from);
  Node& nd = node(to);
  auto it = nu.uploads.find(to);
  if (!nu.present || !nd.present || it == nu.uploads.end() || !it->second.in_flight ||
      it->second.in_flight->token != token)
    return;  // cancelled by a departure
  settle(from);
  auto& link = it->second;
  const BlockRef b = link.in_flight->block;
  link.in_flight.reset();
  --nu.lanes_busy;

  const auto bytes = content_.block_bytes(b.piece, b.block);
  nu.uploaded += bytes;
  nd.downloaded += bytes;
  ++blocks_;
  link.window_bytes += static_cast<double>(bytes);
  nd.recv_window[from] += static_cast<double>(bytes);
  // Indirect reciprocity bookkeeping: credit whoever gave `from` this piece.
  if (auto src = nu.piece_source[b.piece]; src && *src != to && node(*src).present)
    node(*src).forward_window[from] += static_cast<double>(bytes);

  bool complete = false;
  try {
    complete = swarm::record_block(nd.state, content_, b);
  } catch (const InvariantViolation&) {
    ++inv_.duplicate_blocks;
    throw;
  }
  if (cfg_.record_event_log)
    log_line(now, "block_complete " + swarm::to_string(from) + " to=" + swarm::to_string(to) +
                      " piece=" + std::to_string(b.piece) + " block=" + std::to_string(b.block));
  if (complete) {
    if (!nd.first_piece) nd.first_piece = now;
    nd.last_piece = now;
    nd.piece_source[b.piece] = from;
    announce_piece(to, b.piece);
    handle_playback(to, nd.playback.on_piece(now, b.piece, nd.state.have), now);
  }
  schedule_requests(to);
  start_uploads(from);
}

void Simulation::handle_playback(PeerId id, std::optional<double> tick, double now) {
  Node& n = node(id);
  if (tick) push(*tick, EventKind::PlaybackTick, swarm::to_index(id), 0, n.playback.epoch());
  const auto& played = n.playback.stats().played;
  for (; n.played_seen < played.size(); ++n.played_seen) {
    const auto& ev = played[n.played_seen];
    if (cfg_.record_event_log)
      log_line(ev.time, "played " + swarm::to_string(id) + " piece=" + std::to_string(ev.piece));
    if (auto trigger = policies::per_piece_optimistic_hook(cfg_.policy, ev)) {
      if (cfg_.record_event_log) log_line(*trigger, "optimistic_trigger " + swarm::to_string(id));
      optimistic_for(id, *trigger);
    }
  }
  if (n.playback.state() == playback::PlaybackState::Done) maybe_depart(id, now);
}

void Simulation::on_request(PeerId id, std::size_t index, double now) {
  Node& n = node(id);
  if (!n.present) return;
  const auto& r = n.session->requests[index];
  n.next_request = index + 1;
  ++n.requests_issued;
  if (index > 0) n.state.popularity.add_interval(r.start_pos, r.end_pos);
  if (n.next_request < n.session->requests.size())
    push(n.session->requests[n.next_request].arrival_time, EventKind::RequestIssued, swarm::to_index(id), 0,
         n.next_request);

  using workload::Interaction;
  if (r.interaction == Interaction::Pause || r.interaction == Interaction::Stop) {
    n.playback.halt(now);
    if (r.interaction == Interaction::Stop || n.next_request >= n.session->requests.size()) {
      n.next_request = n.session->requests.size();
      maybe_depart(id, now);
    }
    return;
  }
  playback::PieceRange region;
  region.first = content_.piece_at(r.start_pos);
  double last_instant = r.end_pos > r.start_pos ? std::nextafter(r.end_pos, r.start_pos) : r.start_pos;
  region.last = std::max(region.first, content_.piece_at(last_instant));
  handle_playback(id, n.playback.begin_request(now, region, n.state.have), now);
  refresh_interest(id);
}

void Simulation::on_playback_tick(PeerId id, std::uint64_t epoch, double now) {
  Node& n = node(id);
  if (!n.present || epoch != n.playback.epoch()) return;
  const auto before = n.playback.frontier();
  handle_playback(id, n.playback.on_tick(now, n.state.have), now);
  if (n.present && n.playback.frontier() != before) refresh_interest(id);
}

void Simulation::maybe_depart(PeerId id, double now) {
  Node& n = node(id);
  if (n.state.is_seed() || n.departed || n.lingering) return;
  if (n.next_request < n.session->requests.size()) return;
  if (n.playback.active()) return;
  if (cfg_.linger_fraction > 0 && linger_rng_.uniform() < cfg_.linger_fraction) {
    n.lingering = true;
    --pending_leechers_;
    return;
  }
  n.departed = true;
  --pending_leechers_;
  push(now, EventKind::PeerDeparture, swarm::to_index(id));
}

void Simulation::on_departure(PeerId id, double now) {
  Node& n = node(id);
  if (!n.present) return;
  n.present = false;
  n.departure = now;
  tracker_.leave(id);
  std::vector<PeerId> affected(n.state.neighbourhood.begin(), n.state.neighbourhood.end());
  for (auto p : affected) {
    Node& np = node(p);
    // Requests p had queued at the departing peer go back to the pool.
    if (auto it = n.uploads.find(p); it != n.uploads.end()) {
      for (const auto& b : it->second.queue) np.state.release_request(b);
      if (it->second.in_flight) np.state.release_request(it->second.in_flight->block);
    }
    if (auto it = np.uploads.find(id); it != np.uploads.end()) {
      if (it->second.in_flight) {
        settle(p);
        --np.lanes_busy;
      }
      np.uploads.erase(it);
    }
    np.state.neighbourhood.erase(id);
    np.state.regular_slots.erase(id);
    if (np.state.optimistic_slot == id) np.state.optimistic_slot.reset();
  }
  n.uploads.clear();
  n.lanes_busy = 0;
  n.state.neighbourhood.clear();
  n.state.regular_slots.clear();
  n.state.optimistic_slot.reset();
  for (auto p : affected) {
    if (!node(p).present) continue;
    refill(p, now);
    schedule_requests(p);
    start_uploads(p);
  }
}

void Simulation::on_unchoke_tick(double now) {
  const double window = cfg_.swarm.unchoke_interval;
  for (auto& n : nodes_) {
    if (!n.present) continue;
    for (auto p : n.state.neighbourhood) {
      n.state.download_rate_history[p] = n.recv_window[p] / window;
    }
    n.recv_window.clear();
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& nu = nodes_[i];
    if (!nu.present) continue;
    const PeerId u = id_of(i);
    std::vector<std::pair<PeerId, double>> rates;
    std::vector<PeerId> interested_peers;
    for (auto d : nu.state.neighbourhood) {
      if (!interested(d, u)) continue;
      interested_peers.push_back(d);
      double score = 0.0;
      if (nu.state.is_seed()) {
        score = nu.uploads[d].window_bytes / window;
      } else if (cfg_.policy.kind == policies::PolicyKind::GiveToGet) {
        auto it = nu.state.forward_rate_history.find(d);
        score = it == nu.state.forward_rate_history.end() ? 0.0 : it->second;
      } else {
        score = nu.state.download_rate_history[d];
      }
      rates.emplace_back(d, score);
    }
    std::vector<PeerId> regular;
    if (cfg_.policy.kind == policies::PolicyKind::Random && !nu.state.is_seed()) {
      policy_rng_.shuffle(interested_peers);
      interested_peers.resize(std::min(interested_peers.size(), cfg_.swarm.regular_slots));
      regular = interested_peers;
    } else {
      regular = policies::tit_for_tat_unchoke(rates, cfg_.swarm.regular_slots);
    }
    for (auto& [d, link] : nu.uploads) link.window_bytes = 0.0;
    nu.state.regular_slots = std::set<PeerId>(regular.begin(), regular.end());
    if (nu.state.optimistic_slot && nu.state.regular_slots.count(*nu.state.optimistic_slot))
      nu.state.optimistic_slot.reset();
    std::set<PeerId> next = nu.state.regular_slots;
    if (nu.state.optimistic_slot) next.insert(*nu.state.optimistic_slot);
    apply_unchoke_set(u, next);
    if (cfg_.record_event_log) {
      std::string line = "unchoke " + swarm::to_string(u) + " slots=";
      bool first = true;
      for (auto d : next) {
        line += (first ? "" : ",") + swarm::to_string(d);
        first = false;
      }
      log_line(now, line);
    }
  }
}

void Simulation::optimistic_for(PeerId u, double now) {
  Node& nu = node(u);
  if (!nu.present || cfg_.swarm.optimistic_slots == 0) return;
  std::vector<PeerId> choked;
  for (auto d : nu.state.neighbourhood)
    if (!nu.state.regular_slots.count(d) && interested(d, u)) choked.push_back(d);
  auto pick = policies::optimistic_unchoke(choked, policy_rng_);
  auto previous = nu.state.optimistic_slot;
  nu.state.optimistic_slot = pick;
  if (previous && previous != pick && !nu.state.regular_slots.count(*previous)) choke(u, *previous);
  if (pick) unchoke(u, *pick);
  if (cfg_.record_event_log && pick)
    log_line(now, "optimistic " + swarm::to_string(u) + " peer=" + swarm::to_string(*pick));
}

void Simulation::on_optimistic_tick(double now) {
  const double window = cfg_.swarm.optimistic_interval;
  for (auto& n : nodes_) {
    if (!n.present) continue;
    n.state.forward_rate_history.clear();
    for (const auto& [p, bytes] : n.forward_window) n.state.forward_rate_history[p] = bytes / window;
    n.forward_window.clear();
  }
  // Per-piece optimistic unchoking replaces the fixed cadence.
  if (cfg_.policy.kind == policies::PolicyKind::PerPieceOptimistic) return;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].present) optimistic_for(id_of(i), now);
}

void Simulation::on_tracker_update(double now) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].present) continue;
    tracker_.update(id_of(i), now);
    refill(id_of(i), now);
  }
}

void Simulation::check_invariants() {
  ++inv_.checks;
  std::uint64_t up = 0, down = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    up += n.uploaded;
    down += n.downloaded;
    if (!n.present) continue;
    std::size_t unchoked = 0;
    for (const auto& [d, link] : n.uploads)
      if (link.unchoked) ++unchoked;
    if (n.state.regular_slots.size() > cfg_.swarm.regular_slots)
      throw InvariantViolation("regular slot cap exceeded at peer " + std::to_string(i));
    if (n.state.regular_slots.size() + (n.state.optimistic_slot ? 1 : 0) > cfg_.swarm.total_slots())
      throw InvariantViolation("slot cap exceeded at peer " + std::to_string(i));
    if (unchoked > cfg_.swarm.total_slots())
      throw InvariantViolation("more unchoked connections than slots at peer " + std::to_string(i));
    if (n.lanes_busy > cfg_.swarm.total_slots())
      throw InvariantViolation("more concurrent uploads than slots at peer " + std::to_string(i));
    inv_.max_unchoked = std::max(inv_.max_unchoked, unchoked);
    inv_.max_lanes_busy = std::max(inv_.max_lanes_busy, n.lanes_busy);
    if (n.state.is_seed()) {
      for (const auto& bits : n.state.requested_blocks)
        if (std::find(bits.begin(), bits.end(), true) != bits.end()) ++inv_.seed_requests;
      continue;
    }
    const auto& path = n.playback.stats().path;
    if (!path.empty()) {
      double ci = static_cast<double>(n.playback.stats().on_time()) / static_cast<double>(path.size());
      if (!(ci >= 0.0 && ci <= 1.0)) throw InvariantViolation("continuity index out of range");
      inv_.min_continuity = std::min(inv_.min_continuity, ci);
      inv_.max_continuity = std::max(inv_.max_continuity, ci);
    }
  }
  if (up != down) throw InvariantViolation("uploaded bytes != downloaded bytes");
  if (inv_.seed_requests) throw InvariantViolation("a seed issued block requests");
}

QoSReport Simulation::build_report() {
  QoSReport r;
  r.policy = std::string(policies::to_string(cfg_.policy.kind));
  if (cfg_.policy.kind == policies::PolicyKind::YNP || cfg_.policy.kind == policies::PolicyKind::CNP)
    r.policy += "(" + std::to_string(cfg_.policy.n) + ")";
  r.seed = cfg_.seed;
  auto& agg = r.aggregate;
  std::vector<double> rates;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    agg.bytes_uploaded += n.uploaded;
    agg.bytes_downloaded += n.downloaded;
    if (n.state.is_seed()) {
      agg.seed_bytes_uploaded += n.uploaded;
      continue;
    }
    if (!n.present && !n.departed) continue;  // never arrived
    PeerQoS q;
    q.peer = static_cast<std::uint32_t>(i);
    q.client_id = n.session->client_id;
    q.capacity_class = n.capacity_class;
    q.arrival = n.arrival;
    const double end = n.departure.value_or(end_time_);
    const auto& st = n.playback.stats();
    if (!st.path.empty()) {
      std::vector<double> deadlines, arrivals;
      for (const auto& e : st.path) {
        deadlines.push_back(e.deadline);
        arrivals.push_back(e.played_at);
      }
      q.continuity_index = playback::continuity_index(deadlines, arrivals);
    }
    q.startup_delay = st.startup_latencies.empty() ? end - n.arrival : st.startup_latencies.front();
    q.bootstrap_time = n.first_piece ? *n.first_piece - n.arrival : end - n.arrival;
    if (!st.stall_durations.empty()) {
      double s = 0.0;
      for (double d : st.stall_durations) s += d;
      q.mean_time_to_return = s / static_cast<double>(st.stall_durations.size());
    }
    q.interruption_count = st.interruptions;
    q.total_download_time = n.last_piece ? *n.last_piece - n.arrival : 0.0;
    const double present_for = end - n.arrival;
    if (present_for > 0) {
      // min() absorbs rounding when every upload lane was busy the whole time.
      q.link_utilization = std::min(1.0, static_cast<double>(n.uploaded) / (n.state.upload_capacity * present_for));
      q.download_rate = static_cast<double>(n.downloaded) / present_for;
    }
    q.pieces_played = st.path.size();
    q.formation_neighbours = n.formation_size;
    q.formation = n.formation;
    rates.push_back(q.download_rate);
    r.peers.push_back(std::move(q));
  }
  agg.peers = r.peers.size();
  if (!r.peers.empty()) {
    const double count = static_cast<double>(r.peers.size());
    for (const auto& q : r.peers) {
      agg.continuity_index += q.continuity_index;
      agg.startup_delay += q.startup_delay;
      agg.bootstrap_time += q.bootstrap_time;
      agg.mean_time_to_return += q.mean_time_to_return;
      agg.interruption_count += static_cast<double>(q.interruption_count);
      agg.total_download_time += q.total_download_time;
      agg.link_utilization += q.link_utilization;
      if (q.formation) {
        agg.formation_dispersion += q.formation->spatial_dispersion;
        ++agg.formation_samples;
      }
    }
    // Sum then divide: a mean of values in [0, 1] stays in [0, 1].
    for (double* f : {&agg.continuity_index, &agg.startup_delay, &agg.bootstrap_time, &agg.mean_time_to_return,
                      &agg.interruption_count, &agg.total_download_time, &agg.link_utilization})
      *f /= count;
    if (agg.formation_samples) agg.formation_dispersion /= static_cast<double>(agg.formation_samples);
    bool any = std::any_of(rates.begin(), rates.end(), [](double x) { return x > 0; });
    agg.fairness = any ? playback::fairness(rates) : 1.0;
  }
  agg.blocks_transferred = blocks_;
  agg.events = events_;
  agg.end_time = end_time_;
  return r;
}

nlohmann::ordered_json dispersion_json(const metrics::DispersionReport& d) {
  nlohmann::ordered_json j;
  j["n"] = d.request_rate;
  j["temporal_dispersion"] = d.temporal_dispersion;
  j["p"] = d.sharing_potential;
  j["m"] = d.retrieved;
  j["d"] = d.spatial_dispersion;
  j["category"] = std::string(metrics::to_string(d.category));
  return j;
}

}  // namespace

std::string to_json(const QoSReport& r) {
  nlohmann::ordered_json j;
  j["policy"] = r.policy;
  j["seed"] = r.seed;
  const auto& a = r.aggregate;
  nlohmann::ordered_json agg;
  agg["peers"] = a.peers;
  agg["continuity_index"] = a.continuity_index;
  agg["startup_delay"] = a.startup_delay;
  agg["bootstrap_time"] = a.bootstrap_time;
  agg["mean_time_to_return"] = a.mean_time_to_return;
  agg["interruption_count"] = a.interruption_count;
  agg["total_download_time"] = a.total_download_time;
  agg["link_utilization"] = a.link_utilization;
  agg["fairness"] = a.fairness;
  agg["formation_dispersion"] = a.formation_dispersion;
  agg["formation_samples"] = a.formation_samples;
  agg["bytes_uploaded"] = a.bytes_uploaded;
  agg["bytes_downloaded"] = a.bytes_downloaded;
  agg["seed_bytes_uploaded"] = a.seed_bytes_uploaded;
  agg["blocks_transferred"] = a.blocks_transferred;
  agg["events"] = a.events;
  agg["end_time"] = a.end_time;
  j["aggregate"] = std::move(agg);
  auto peers = nlohmann::ordered_json::array();
  for (const auto& q : r.peers) {
    nlohmann::ordered_json p;
    p["peer"] = q.peer;
    p["client_id"] = q.client_id;
    p["capacity_class"] = q.capacity_class;
    p["arrival"] = q.arrival;
    p["continuity_index"] = q.continuity_index;
    p["startup_delay"] = q.startup_delay;
    p["bootstrap_time"] = q.bootstrap_time;
    p["mean_time_to_return"] = q.mean_time_to_return;
    p["interruption_count"] = q.interruption_count;
    p["total_download_time"] = q.total_download_time;
    p["link_utilization"] = q.link_utilization;
    p["download_rate"] = q.download_rate;
    p["pieces_played"] = q.pieces_played;
    p["formation_neighbours"] = q.formation_neighbours;
    p["formation"] = q.formation ? dispersion_json(*q.formation) : nlohmann::ordered_json(nullptr);
    peers.push_back(std::move(p));
  }
  j["peers"] = std::move(peers);
  return j.dump(2);
}

std::string to_csv(const QoSReport& r) {
  using text::format_double;
  std::string out =
      "peer,client_id,capacity_class,arrival,continuity_index,startup_delay,bootstrap_time,mean_time_to_return,"
      "interruption_count,total_download_time,link_utilization,download_rate,pieces_played,formation_neighbours,"
      "formation_d,formation_category\n";
  for (const auto& q : r.peers) {
    out += std::to_string(q.peer) + "," + q.client_id + "," + q.capacity_class + "," + format_double(q.arrival) + "," +
           format_double(q.continuity_index) + "," + format_double(q.startup_delay) + "," +
           format_double(q.bootstrap_time) + "," + format_double(q.mean_time_to_return) + "," +
           std::to_string(q.interruption_count) + "," + format_double(q.total_download_time) + "," +
           format_double(q.link_utilization) + "," + format_double(q.download_rate) + "," +
           std::to_string(q.pieces_played) + "," + std::to_string(q.formation_neighbours) + ",";
    if (q.formation)
      out += format_double(q.formation->spatial_dispersion) + "," + std::string(metrics::to_string(q.formation->category));
    else
      out += ",";
    out += '\n';
  }
  return out;
}

RunResult run(const SimConfig& cfg) {
  cfg.validate();
  Simulation sim(cfg);
  return sim.run();
}

}  // namespace vodswarm::sim
