#pragma once

// BitTorrent-style swarm mechanics: content layout, peer buffers, the
// tracker, and rarest-first piece scheduling.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vodswarm/metrics.hpp"
#include "vodswarm/random.hpp"

namespace vodswarm::swarm {

enum class PeerId : std::uint32_t {};

inline std::uint32_t to_index(PeerId id) { return static_cast<std::uint32_t>(id); }
inline std::string to_string(PeerId id) { return std::to_string(to_index(id)); }

using Bitfield = std::vector<bool>;

struct ContentSpec {
  std::uint64_t total_size = 0;       // bytes
  std::uint64_t piece_size = 262144;  // bytes
  std::uint64_t block_size = 16384;   // bytes
  double playback_rate = 65536.0;     // bytes per second

  // Throws ConfigError on a malformed layout.
  void validate() const;

  std::size_t piece_count() const;
  std::uint64_t piece_bytes(std::size_t piece) const;
  std::size_t blocks_in_piece(std::size_t piece) const;
  std::uint64_t block_bytes(std::size_t piece, std::size_t block) const;
  // Seconds of playback held by one full piece.
  double piece_duration() const { return static_cast<double>(piece_size) / playback_rate; }
  double object_length() const { return static_cast<double>(total_size) / playback_rate; }
  // Piece holding the media instant `position` (seconds), clamped to the last piece.
  std::size_t piece_at(double position) const;
};

enum class PeerRole { Leecher, Seed };

struct BlockRef {
  std::size_t piece = 0;
  std::size_t block = 0;
  friend auto operator<=>(const BlockRef&, const BlockRef&) = default;
};

struct PeerState {
  PeerId id{};
  PeerRole role = PeerRole::Leecher;
  Bitfield have;
  std::size_t pieces_owned = 0;
  // Per-piece block bitsets; cleared once the piece completes.
  std::vector<Bitfield> received_blocks;
  std::vector<Bitfield> requested_blocks;
  double upload_capacity = 0.0;  // bytes per second
  std::set<PeerId> neighbourhood;
  std::set<PeerId> regular_slots;
  std::optional<PeerId> optimistic_slot;
  std::map<PeerId, double> download_rate_history;  // bytes/s from each neighbour, last window
  std::map<PeerId, double> forward_rate_history;   // bytes/s each neighbour forwarded onwards
  metrics::PopularityRecord popularity;
  double join_time = 0.0;

  bool is_seed() const { return role == PeerRole::Seed; }
  bool has_piece(std::size_t piece) const { return have[piece]; }
  bool has_block(std::size_t piece, std::size_t block) const;
  bool is_requested(std::size_t piece, std::size_t block) const;
  // Blocks of `piece` neither received nor requested.
  std::size_t unrequested_blocks(std::size_t piece) const;
  void release_request(const BlockRef& b);
};

PeerState make_peer(PeerId id, PeerRole role, const ContentSpec& content, double upload_capacity,
                    double join_time, const metrics::PopularityRecord& empty_record);

struct SwarmConfig {
  double unchoke_interval = 10.0;
  double optimistic_interval = 30.0;
  std::size_t neighbourhood_min = 40;
  std::size_t neighbourhood_max = 80;
  std::size_t neighbourhood_target = 60;
  std::size_t neighbourhood_floor = 20;
  std::size_t pipeline_depth = 5;
  std::size_t regular_slots = 4;
  std::size_t optimistic_slots = 1;
  std::size_t tracker_list_size = 40;
  double tracker_update_interval = 1800.0;

  std::size_t total_slots() const { return regular_slots + optimistic_slots; }
  void validate() const;
};

// Registry of swarm members. Samples are drawn with the caller's generator.
class TrackerState {
 public:
  struct Entry {
    double join_time = 0.0;
    double last_update = 0.0;
    std::string address;
  };

  TrackerState(std::size_t list_size = 40, double update_interval = 1800.0)
      : list_size_(list_size), update_interval_(update_interval) {}

  // Registers `peer` and returns a uniform sample of the other members.
  // Throws InputError on duplicate join.
  std::vector<PeerId> join(PeerId peer, double now, Rng& rng);
  // Fresh sample excluding `exclude` and the peer itself. Throws on unknown peer.
  std::vector<PeerId> refill(PeerId peer, const std::set<PeerId>& exclude, Rng& rng) const;
  void update(PeerId peer, double now);
  void leave(PeerId peer);

  bool contains(PeerId peer) const { return registry_.count(peer) != 0; }
  const Entry& entry(PeerId peer) const;
  std::size_t size() const { return registry_.size(); }
  std::size_t list_size() const { return list_size_; }
  double update_interval() const { return update_interval_; }
  // Members in registration order.
  const std::vector<PeerId>& members() const { return order_; }

 private:
  std::vector<PeerId> sample(std::vector<PeerId> pool, Rng& rng) const;

  std::size_t list_size_;
  double update_interval_;
  std::map<PeerId, Entry> registry_;
  std::vector<PeerId> order_;
};

// Among pieces `self` lacks, that some neighbour holds, and that `eligible`
// admits (when given), returns one with the fewest neighbour replicas.
// Ties are broken uniformly with `rng`.
std::optional<std::size_t> rarest_first(const Bitfield& self,
                                        std::span<const Bitfield* const> neighbour_maps,
                                        Rng& rng, const Bitfield* eligible = nullptr);

// Marks a received block. Returns true when it completes its piece, which
// then enters the have map. Throws InvariantViolation on a duplicate block.
bool record_block(PeerState& p, const ContentSpec& content, const BlockRef& b);

// Issues requests for blocks of `piece` until `outstanding` reaches `depth`
// or no unrequested block is left; marks them requested.
std::vector<BlockRef> pipeline_requests(PeerState& p, std::size_t piece, std::size_t outstanding,
                                        std::size_t depth);

}  // namespace vodswarm::swarm
