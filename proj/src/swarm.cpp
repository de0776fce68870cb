#include "vodswarm/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vodswarm/error.hpp"

namespace vodswarm::swarm {

void ContentSpec::validate() const {
  if (total_size == 0) throw ConfigError("content.total_size must be positive");
  if (piece_size == 0) throw ConfigError("content.piece_size must be positive");
  if (block_size == 0) throw ConfigError("content.block_size must be positive");
  if (piece_size % block_size != 0) throw ConfigError("content.block_size must divide content.piece_size");
  if (!(playback_rate > 0) || !std::isfinite(playback_rate))
    throw ConfigError("content.playback_rate must be positive");
}

std::size_t ContentSpec::piece_count() const {
  return static_cast<std::size_t>((total_size + piece_size - 1) / piece_size);
}

std::uint64_t ContentSpec::piece_bytes(std::size_t piece) const {
  const std::uint64_t begin = static_cast<std::uint64_t>(piece) * piece_size;
  return std::min(piece_size, total_size - begin);
}

std::size_t ContentSpec::blocks_in_piece(std::size_t piece) const {
  return static_cast<std::size_t>((piece_bytes(piece) + block_size - 1) / block_size);
}

std::uint64_t ContentSpec::block_bytes(std::size_t piece, std::size_t block) const {
  const std::uint64_t begin = static_cast<std::uint64_t>(block) * block_size;
  return std::min(block_size, piece_bytes(piece) - begin);
}

std::size_t ContentSpec::piece_at(double position) const {
  const auto count = piece_count();
  if (position <= 0) return 0;
  auto idx = static_cast<std::size_t>(std::floor(position / piece_duration()));
  return std::min(idx, count - 1);
}

bool PeerState::has_block(std::size_t piece, std::size_t block) const {
  if (have[piece]) return true;
  const auto& bits = received_blocks[piece];
  return !bits.empty() && bits[block];
}

bool PeerState::is_requested(std::size_t piece, std::size_t block) const {
  const auto& bits = requested_blocks[piece];
  return !bits.empty() && bits[block];
}

std::size_t PeerState::unrequested_blocks(std::size_t piece) const {
  if (have[piece]) return 0;
  const auto& got = received_blocks[piece];
  const auto& req = requested_blocks[piece];
  std::size_t n = 0;
  for (std::size_t b = 0; b < got.size(); ++b)
    if (!got[b] && !req[b]) ++n;
  return n;
}

void PeerState::release_request(const BlockRef& b) {
  if (!requested_blocks[b.piece].empty()) requested_blocks[b.piece][b.block] = false;
}

PeerState make_peer(PeerId id, PeerRole role, const ContentSpec& content, double upload_capacity,
                    double join_time, const metrics::PopularityRecord& empty_record) {
  PeerState p;
  p.id = id;
  p.role = role;
  const auto pieces = content.piece_count();
  p.have.assign(pieces, role == PeerRole::Seed);
  p.pieces_owned = role == PeerRole::Seed ? pieces : 0;
  p.received_blocks.resize(pieces);
  p.requested_blocks.resize(pieces);
  if (role == PeerRole::Leecher) {
    for (std::size_t i = 0; i < pieces; ++i) {
      p.received_blocks[i].assign(content.blocks_in_piece(i), false);
      p.requested_blocks[i].assign(content.blocks_in_piece(i), false);
    }
  }
  p.upload_capacity = upload_capacity;
  p.popularity = empty_record;
  p.join_time = join_time;
  return p;
}

void SwarmConfig::validate() const {
  if (!(unchoke_interval > 0)) throw ConfigError("swarm.unchoke_interval must be positive");
  if (!(optimistic_interval > 0)) throw ConfigError("swarm.optimistic_interval must be positive");
  double ratio = optimistic_interval / unchoke_interval;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1)
    throw ConfigError("swarm.optimistic_interval must be a multiple of swarm.unchoke_interval");
  if (neighbourhood_min > neighbourhood_max)
    throw ConfigError("swarm.neighbourhood_min must not exceed swarm.neighbourhood_max");
  if (neighbourhood_target < neighbourhood_min || neighbourhood_target > neighbourhood_max)
    throw ConfigError("swarm.neighbourhood_target must lie in [neighbourhood_min, neighbourhood_max]");
  if (neighbourhood_floor >= neighbourhood_min)
    throw ConfigError("swarm.neighbourhood_floor must be below swarm.neighbourhood_min");
  if (pipeline_depth == 0) throw ConfigError("swarm.pipeline_depth must be positive");
  if (total_slots() == 0) throw ConfigError("swarm needs at least one upload slot");
  if (tracker_list_size == 0) throw ConfigError("swarm.tracker_list_size must be positive");
  if (!(tracker_update_interval > 0)) throw ConfigError("swarm.tracker_update_interval must be positive");
}

std::vector<PeerId> TrackerState::sample(std::vector<PeerId> pool, Rng& rng) const {
  const std::size_t n = std::min(pool.size(), list_size_);
  // Partial Fisher-Yates: the first n slots become a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

std::vector<PeerId> TrackerState::join(PeerId peer, double now, Rng& rng) {
  if (contains(peer)) throw InputError("peer " + to_string(peer) + " already registered");
  std::vector<PeerId> pool = order_;
  registry_[peer] = Entry{now, now, "sim://" + to_string(peer)};
  order_.push_back(peer);
  return sample(std::move(pool), rng);
}

std::vector<PeerId> TrackerState::refill(PeerId peer, const std::set<PeerId>& exclude, Rng& rng) const {
  if (!contains(peer)) throw InputError("peer " + to_string(peer) + " not registered");
  std::vector<PeerId> pool;
  for (auto p : order_)
    if (p != peer && !exclude.count(p)) pool.push_back(p);
  return sample(std::move(pool), rng);
}

void TrackerState::update(PeerId peer, double now) {
  auto it = registry_.find(peer);
  if (it == registry_.end()) throw InputError("peer " + to_string(peer) + " not registered");
  it->second.last_update = now;
}

void TrackerState::leave(PeerId peer) {
  if (registry_.erase(peer)) order_.erase(std::find(order_.begin(), order_.end(), peer));
}

const TrackerState::Entry& TrackerState::entry(PeerId peer) const {
  auto it = registry_.find(peer);
  if (it == registry_.end()) throw InputError("peer " + to_string(peer) + " not registered");
  return it->second;
}

std::optional<std::size_t> rarest_first(const Bitfield& self,
                                        std::span<const Bitfield* const> neighbour_maps,
                                        Rng& rng, const Bitfield* eligible) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> ties;
  for (std::size_t piece = 0; piece < self.size(); ++piece) {
    if (self[piece]) continue;
    if (eligible && !(*eligible)[piece]) continue;
    std::size_t replicas = 0;
    for (const Bitfield* m : neighbour_maps)
      if ((*m)[piece]) ++replicas;
    if (replicas == 0) continue;
    if (replicas < best) {
      best = replicas;
      ties.clear();
    }
    if (replicas == best) ties.push_back(piece);
  }
  if (ties.empty()) return std::nullopt;
  if (ties.size() == 1) return ties.front();
  return ties[static_cast<std::size_t>(rng.below(ties.size()))];
}

bool record_block(PeerState& p, const ContentSpec& content, const BlockRef& b) {
  if (b.piece >= p.have.size() || b.block >= content.blocks_in_piece(b.piece))
    throw InvariantViolation("block out of range");
  if (p.has_block(b.piece, b.block))
    throw InvariantViolation("duplicate block " + std::to_string(b.piece) + ":" +
                             std::to_string(b.block) + " at peer " + to_string(p.id));
  auto& got = p.received_blocks[b.piece];
  got[b.block] = true;
  p.requested_blocks[b.piece][b.block] = false;
  if (std::find(got.begin(), got.end(), false) != got.end()) return false;
  p.have[b.piece] = true;
  ++p.pieces_owned;
  got.assign(got.size(), true);
  return true;
}

std::vector<BlockRef> pipeline_requests(PeerState& p, std::size_t piece, std::size_t outstanding,
                                        std::size_t depth) {
  std::vector<BlockRef> out;
  if (p.is_seed() || p.have[piece]) return out;
  const auto& got = p.received_blocks[piece];
  auto& req = p.requested_blocks[piece];
  for (std::size_t b = 0; b < got.size() && outstanding + out.size() < depth; ++b) {
    if (got[b] || req[b]) continue;
    req[b] = true;
    out.push_back({piece, b});
  }
  return out;
}

}  // namespace vodswarm::swarm
