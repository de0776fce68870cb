#pragma once

// Reference implementations used by the test suites. They work on dense
// count vectors and plain loops and share no code with the library beyond
// the public data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "vodswarm/policies.hpp"
#include "vodswarm/random.hpp"

namespace oracle {

using vodswarm::policies::CandidateInfo;
using vodswarm::swarm::PeerId;

inline std::vector<std::uint64_t> dense(const vodswarm::metrics::PopularityRecord& r) {
  std::vector<std::uint64_t> q(r.horizon(), 0);
  for (const auto& [pos, count] : r.counts()) q.at(pos) += count;
  return q;
}

struct Ratio {
  std::uint64_t num = 1;  // positions with Q_p >= 1
  std::uint64_t den = 1;  // total mass M
};

// D = 1 - P/M computed term by term; an all-zero vector scores as 1.
inline Ratio dispersion(const std::vector<std::uint64_t>& q) {
  std::uint64_t m = 0, p = 0;
  for (auto x : q) {
    m += x;
    if (x > 1) p += x - 1;
  }
  if (m == 0) return {1, 1};
  return {m - p, m};
}

inline int compare(Ratio a, Ratio b) {
  const unsigned __int128 l = static_cast<unsigned __int128>(a.num) * b.den;
  const unsigned __int128 r = static_cast<unsigned __int128>(b.num) * a.den;
  return l < r ? -1 : (l > r ? 1 : 0);
}

// Exhaustive per-step argmin with the tie chain D, then higher N, then (LI)
// started peers, then lower id; optionally forward rate right after D.
inline vodswarm::policies::SelectionOutcome greedy(const vodswarm::metrics::PopularityRecord& own,
                                                   const std::vector<CandidateInfo>& cands, std::size_t max_size,
                                                   vodswarm::workload::InteractivityProfile hint,
                                                   bool forward_aware = false) {
  vodswarm::policies::SelectionOutcome out;
  std::vector<std::uint64_t> acc = dense(own);
  std::vector<bool> used(cands.size(), false);
  while (out.selected.size() < max_size) {
    std::optional<std::size_t> best;
    Ratio best_d;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (used[i]) continue;
      auto trial = acc;
      auto q = dense(cands[i].popularity_record);
      for (std::size_t p = 0; p < trial.size(); ++p) trial[p] += q[p];
      Ratio d = dispersion(trial);
      bool better = false;
      if (!best) {
        better = true;
      } else {
        const auto& b = cands[*best];
        const auto& c = cands[i];
        int cmp = compare(d, best_d);
        if (cmp != 0) {
          better = cmp < 0;
        } else if (forward_aware && c.recent_forward_rate != b.recent_forward_rate) {
          better = c.recent_forward_rate > b.recent_forward_rate;
        } else if (c.request_rate != b.request_rate) {
          better = c.request_rate > b.request_rate;
        } else if (hint == vodswarm::workload::InteractivityProfile::LI && c.has_started != b.has_started) {
          better = c.has_started;
        } else {
          better = vodswarm::swarm::to_index(c.peer_id) < vodswarm::swarm::to_index(b.peer_id);
        }
      }
      if (better) {
        best = i;
        best_d = d;
      }
    }
    if (!best) break;
    used[*best] = true;
    auto q = dense(cands[*best].popularity_record);
    for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += q[p];
    out.selected.push_back(cands[*best].peer_id);
    out.per_step_dispersion.push_back(static_cast<double>(best_d.num) / static_cast<double>(best_d.den));
  }
  return out;
}

inline std::vector<const CandidateInfo*> holders_of(const std::vector<CandidateInfo>& cands, std::size_t piece) {
  std::vector<const CandidateInfo*> h;
  for (const auto& c : cands)
    if (piece < c.buffer_summary.size() && c.buffer_summary[piece]) h.push_back(&c);
  return h;
}

// Argmin of key over holders, lowest id among equal keys.
template <typename Key>
PeerId argmin(const std::vector<const CandidateInfo*>& h, Key key) {
  const CandidateInfo* best = nullptr;
  for (const auto* c : h) {
    if (!best || key(*c) < key(*best) ||
        (key(*c) == key(*best) && vodswarm::swarm::to_index(c->peer_id) < vodswarm::swarm::to_index(best->peer_id)))
      best = c;
  }
  return best->peer_id;
}

// The n holders first in (key, id) order; the target is drawn uniformly from them.
template <typename Key>
std::vector<PeerId> window(std::vector<const CandidateInfo*> h, std::size_t n, Key key) {
  std::sort(h.begin(), h.end(), [&](const CandidateInfo* a, const CandidateInfo* b) {
    if (key(*a) != key(*b)) return key(*a) < key(*b);
    return vodswarm::swarm::to_index(a->peer_id) < vodswarm::swarm::to_index(b->peer_id);
  });
  std::vector<PeerId> out;
  for (std::size_t i = 0; i < h.size() && i < n; ++i) out.push_back(h[i]->peer_id);
  return out;
}

inline PeerId baseline(const vodswarm::policies::Policy& policy, std::size_t piece,
                       const std::vector<CandidateInfo>& cands, double self_join, vodswarm::Rng& rng) {
  using vodswarm::policies::PolicyKind;
  auto h = holders_of(cands, piece);
  auto gap = [self_join](const CandidateInfo& c) { return std::abs(c.join_time - self_join); };
  switch (policy.kind) {
    case PolicyKind::LLP: return argmin(h, [](const CandidateInfo& c) { return c.queue_length; });
    case PolicyKind::LRP: return argmin(h, [](const CandidateInfo& c) { return c.requests_sent_to; });
    case PolicyKind::TrackerClosest: return argmin(h, gap);
    case PolicyKind::YNP: {
      auto w = window(h, policy.n, [](const CandidateInfo& c) { return -c.join_time; });
      return w[static_cast<std::size_t>(rng.below(w.size()))];
    }
    case PolicyKind::CNP: {
      auto w = window(h, policy.n, gap);
      return w[static_cast<std::size_t>(rng.below(w.size()))];
    }
    default: return PeerId{0};
  }
}

}  // namespace oracle
