#include "vodswarm/policies.hpp"

#include <algorithm>
#include <cmath>

#include "text.hpp"
#include "vodswarm/error.hpp"

namespace vodswarm::policies {

namespace {

constexpr PolicyKind kAllKinds[] = {
    PolicyKind::DispersionGreedy, PolicyKind::TitForTatOnly, PolicyKind::Random,
    PolicyKind::LLP,              PolicyKind::LRP,           PolicyKind::TrackerClosest,
    PolicyKind::YNP,              PolicyKind::CNP,           PolicyKind::GiveToGet,
    PolicyKind::PerPieceOptimistic,
};

// distinct / mass, compared exactly.
struct Ratio {
  std::uint64_t num = 1;
  std::uint64_t den = 1;

  static Ratio of(std::uint64_t distinct, std::uint64_t mass) {
    return mass == 0 ? Ratio{1, 1} : Ratio{distinct, mass};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator<(const Ratio& a, const Ratio& b) {
    return static_cast<unsigned __int128>(a.num) * b.den < static_cast<unsigned __int128>(b.num) * a.den;
  }
  friend bool operator==(const Ratio& a, const Ratio& b) {
    return static_cast<unsigned __int128>(a.num) * b.den == static_cast<unsigned __int128>(b.num) * a.den;
  }
};

void check_shapes(const metrics::PopularityRecord& own, std::span<const CandidateInfo> candidates) {
  for (const auto& c : candidates)
    if (!c.popularity_record.same_shape(own))
      throw InputError("candidate " + swarm::to_string(c.peer_id) +
                       ": popularity record shape differs from own record");
}

// Dense running merge of popularity records.
class MergedRecord {
 public:
  explicit MergedRecord(const metrics::PopularityRecord& own) : counts_(own.horizon(), 0) { add(own); }

  void add(const metrics::PopularityRecord& r) {
    for (const auto& [pos, q] : r.counts()) {
      if (counts_[pos] == 0) ++distinct_;
      counts_[pos] += q;
      mass_ += q;
    }
  }

  Ratio with(const metrics::PopularityRecord& r) const {
    std::uint64_t fresh = 0;
    for (const auto& [pos, q] : r.counts())
      if (counts_[pos] == 0) ++fresh;
    return Ratio::of(distinct_ + fresh, mass_ + r.total());
  }

  Ratio current() const { return Ratio::of(distinct_, mass_); }

 private:
  std::vector<metrics::Count> counts_;
  std::uint64_t distinct_ = 0;
  std::uint64_t mass_ = 0;
};

struct StepScore {
  Ratio dispersion;
  const CandidateInfo* candidate = nullptr;
};

// True when `a` should be selected ahead of `b`.
bool ranks_before(const StepScore& a, const StepScore& b, bool forward_aware, bool low_interactivity) {
  if (!(a.dispersion == b.dispersion)) return a.dispersion < b.dispersion;
  const auto& ca = *a.candidate;
  const auto& cb = *b.candidate;
  if (forward_aware && ca.recent_forward_rate != cb.recent_forward_rate)
    return ca.recent_forward_rate > cb.recent_forward_rate;
  if (ca.request_rate != cb.request_rate) return ca.request_rate > cb.request_rate;
  if (low_interactivity && ca.has_started != cb.has_started) return ca.has_started;
  return swarm::to_index(ca.peer_id) < swarm::to_index(cb.peer_id);
}

SelectionOutcome greedy_loop(const metrics::PopularityRecord& own, std::span<const CandidateInfo> candidates,
                             std::size_t max_size, workload::InteractivityProfile hint, bool forward_aware) {
  check_shapes(own, candidates);
  const bool low = hint == workload::InteractivityProfile::LI;
  MergedRecord merged(own);
  std::vector<const CandidateInfo*> remaining;
  for (const auto& c : candidates) remaining.push_back(&c);

  SelectionOutcome out;
  while (out.selected.size() < max_size && !remaining.empty()) {
    std::size_t best = 0;
    StepScore best_score{merged.with(remaining[0]->popularity_record), remaining[0]};
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      StepScore s{merged.with(remaining[i]->popularity_record), remaining[i]};
      if (ranks_before(s, best_score, forward_aware, low)) {
        best = i;
        best_score = s;
      }
    }
    merged.add(remaining[best]->popularity_record);
    out.selected.push_back(remaining[best]->peer_id);
    out.per_step_dispersion.push_back(merged.current().value());
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

}  // namespace

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::DispersionGreedy: return "dispersiongreedy";
    case PolicyKind::TitForTatOnly: return "titfortat-only";
    case PolicyKind::Random: return "random";
    case PolicyKind::LLP: return "llp";
    case PolicyKind::LRP: return "lrp";
    case PolicyKind::TrackerClosest: return "trackerclosest";
    case PolicyKind::YNP: return "ynp";
    case PolicyKind::CNP: return "cnp";
    case PolicyKind::GiveToGet: return "givetoget";
    case PolicyKind::PerPieceOptimistic: return "perpieceoptimistic";
  }
  return "random";
}

std::string policy_names() {
  std::string out;
  for (auto k : kAllKinds) {
    if (!out.empty()) out += ", ";
    out += to_string(k);
  }
  return out;
}

bool is_request_baseline(PolicyKind k) {
  return k == PolicyKind::LLP || k == PolicyKind::LRP || k == PolicyKind::TrackerClosest ||
         k == PolicyKind::YNP || k == PolicyKind::CNP;
}

Policy parse_policy(std::string_view name, std::optional<std::size_t> n) {
  std::string lower(text::trim(name));
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (auto open = lower.find('('); open != std::string::npos && lower.back() == ')') {
    auto inner = text::parse_int<std::size_t>(std::string_view(lower).substr(open + 1, lower.size() - open - 2));
    if (!inner) throw ConfigError("bad policy parameter in '" + std::string(name) + "'");
    n = *inner;
    lower.resize(open);
  }
  for (auto k : kAllKinds) {
    if (to_string(k) != lower) continue;
    Policy p{k, n.value_or(2)};
    if ((k == PolicyKind::YNP || k == PolicyKind::CNP) && p.n < 2)
      throw ConfigError("policy " + lower + " needs n >= 2");
    return p;
  }
  if (lower.empty()) throw ConfigError("missing policy name; valid names: " + policy_names());
  throw ConfigError("unknown policy '" + std::string(name) + "'; valid names: " + policy_names());
}

SelectionOutcome select_neighbors_greedy(const metrics::PopularityRecord& own,
                                         std::span<const CandidateInfo> candidates, std::size_t max_size,
                                         workload::InteractivityProfile profile_hint) {
  return greedy_loop(own, candidates, max_size, profile_hint, false);
}

SelectionOutcome select_neighbors_random(const metrics::PopularityRecord& own,
                                         std::span<const CandidateInfo> candidates, std::size_t max_size,
                                         Rng& rng) {
  check_shapes(own, candidates);
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  order.resize(std::min(order.size(), max_size));
  MergedRecord merged(own);
  SelectionOutcome out;
  for (auto i : order) {
    merged.add(candidates[i].popularity_record);
    out.selected.push_back(candidates[i].peer_id);
    out.per_step_dispersion.push_back(merged.current().value());
  }
  return out;
}

double evaluate_set_dispersion(const metrics::PopularityRecord& own, std::span<const CandidateInfo> set) {
  check_shapes(own, set);
  std::vector<metrics::PopularityRecord> records{own};
  for (const auto& c : set) records.push_back(c.popularity_record);
  return metrics::spatial_dispersion(metrics::merge_records(records));
}

double expected_contribution(const CandidateInfo& c) {
  return c.upload_slots == 0 ? 0.0 : c.upload_capacity / static_cast<double>(c.upload_slots);
}

SelectionOutcome capacity_check_and_reselect(const SelectionOutcome& outcome,
                                             const metrics::PopularityRecord& own,
                                             std::span<const CandidateInfo> candidates, std::size_t max_size,
                                             workload::InteractivityProfile profile_hint, double demand) {
  if (candidates.empty()) return outcome;
  double supply = 0.0;
  for (auto id : outcome.selected) {
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [id](const CandidateInfo& c) { return c.peer_id == id; });
    if (it != candidates.end()) supply += expected_contribution(*it);
  }
  if (supply >= demand) return outcome;
  return greedy_loop(own, candidates, max_size, profile_hint, true);
}

std::vector<PeerId> tit_for_tat_unchoke(std::span<const std::pair<PeerId, double>> rates, std::size_t k) {
  std::vector<std::pair<PeerId, double>> sorted(rates.begin(), rates.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return swarm::to_index(a.first) < swarm::to_index(b.first);
  });
  std::vector<PeerId> out;
  for (std::size_t i = 0; i < sorted.size() && i < k; ++i) out.push_back(sorted[i].first);
  return out;
}

std::optional<PeerId> optimistic_unchoke(std::span<const PeerId> choked_interested, Rng& rng) {
  if (choked_interested.empty()) return std::nullopt;
  return choked_interested[static_cast<std::size_t>(rng.below(choked_interested.size()))];
}

PeerId baseline_request_target(const Policy& policy, std::size_t piece, std::span<const CandidateInfo> neighbours,
                               double self_join_time, Rng& rng) {
  std::vector<const CandidateInfo*> holders;
  for (const auto& c : neighbours)
    if (piece < c.buffer_summary.size() && c.buffer_summary[piece]) holders.push_back(&c);
  if (holders.empty()) throw InputError("no neighbour holds piece " + std::to_string(piece));

  auto by_id = [](const CandidateInfo* a, const CandidateInfo* b) {
    return swarm::to_index(a->peer_id) < swarm::to_index(b->peer_id);
  };
  std::sort(holders.begin(), holders.end(), by_id);

  // Stable argmin keeps the lowest id among equal keys.
  auto argmin = [&](auto key) {
    return (*std::min_element(holders.begin(), holders.end(),
                              [&](const CandidateInfo* a, const CandidateInfo* b) { return key(a) < key(b); }))
        ->peer_id;
  };
  auto age_gap = [self_join_time](const CandidateInfo* c) { return std::abs(c->join_time - self_join_time); };

  switch (policy.kind) {
    case PolicyKind::LLP:
      return argmin([](const CandidateInfo* c) { return c->queue_length; });
    case PolicyKind::LRP:
      return argmin([](const CandidateInfo* c) { return c->requests_sent_to; });
    case PolicyKind::TrackerClosest:
      return argmin(age_gap);
    case PolicyKind::YNP:
    case PolicyKind::CNP: {
      if (policy.kind == PolicyKind::YNP) {
        // Youngest first: latest join time.
        std::stable_sort(holders.begin(), holders.end(), [](const CandidateInfo* a, const CandidateInfo* b) {
          return a->join_time > b->join_time;
        });
      } else {
        std::stable_sort(holders.begin(), holders.end(), [&](const CandidateInfo* a, const CandidateInfo* b) {
          return age_gap(a) < age_gap(b);
        });
      }
      const std::size_t window = std::min(holders.size(), policy.n);
      return holders[static_cast<std::size_t>(rng.below(window))]->peer_id;
    }
    default:
      throw ConfigError("policy " + std::string(to_string(policy.kind)) + " does not pick request targets");
  }
}

std::optional<double> per_piece_optimistic_hook(const Policy& policy, const PlaybackEvent& e) {
  if (policy.kind != PolicyKind::PerPieceOptimistic) return std::nullopt;
  return e.time;
}

}  // namespace vodswarm::policies
