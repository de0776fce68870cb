#pragma once

// Seeded random inputs for the property and oracle tests.

#include <algorithm>
#include <vector>

#include "vodswarm/metrics.hpp"
#include "vodswarm/policies.hpp"
#include "vodswarm/random.hpp"

namespace instances {

using vodswarm::policies::CandidateInfo;

// Up to `max_mass` unit requests over at most `positions` bins, clustered so
// that ties and overlaps are common.
inline vodswarm::metrics::PopularityRecord record(vodswarm::Rng& rng, std::size_t positions, std::size_t max_mass) {
  vodswarm::metrics::PopularityRecord r(1.0, positions);
  const std::size_t mass = static_cast<std::size_t>(rng.below(max_mass + 1));
  const std::size_t span = 1 + static_cast<std::size_t>(rng.below(positions));
  const std::size_t base = static_cast<std::size_t>(rng.below(positions - span + 1));
  for (std::size_t i = 0; i < mass; ++i) r.add(base + static_cast<std::size_t>(rng.below(span)));
  return r;
}

// Candidates with distinct ids; request rates and start flags drawn from small
// sets so the tiebreak chain is exercised.
inline std::vector<CandidateInfo> candidates(vodswarm::Rng& rng, std::size_t count, std::size_t positions,
                                             std::size_t pieces = 16) {
  std::vector<CandidateInfo> out;
  std::vector<std::uint32_t> ids;
  for (std::uint32_t i = 0; i < count * 3; ++i) ids.push_back(i);
  rng.shuffle(ids);
  for (std::size_t i = 0; i < count; ++i) {
    CandidateInfo c;
    c.peer_id = vodswarm::swarm::PeerId{ids[i]};
    c.popularity_record = record(rng, positions, 12);
    c.buffer_summary.assign(pieces, false);
    for (std::size_t p = 0; p < pieces; ++p) c.buffer_summary[p] = rng.below(2) == 1;
    c.has_started = std::find(c.buffer_summary.begin(), c.buffer_summary.end(), true) != c.buffer_summary.end();
    c.request_rate = static_cast<double>(rng.below(3));
    c.join_time = static_cast<double>(rng.below(6)) * 10.0;
    c.queue_length = static_cast<std::size_t>(rng.below(4));
    c.requests_sent_to = static_cast<std::size_t>(rng.below(4));
    c.recent_forward_rate = static_cast<double>(rng.below(3)) * 1000.0;
    c.upload_capacity = 65536.0 * static_cast<double>(1 + rng.below(2));
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace instances
