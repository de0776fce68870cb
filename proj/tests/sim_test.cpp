#include <gtest/gtest.h>

#include <sstream>

#include "vodswarm/error.hpp"
#include "vodswarm/sim.hpp"

using namespace vodswarm;
using namespace vodswarm::sim;

namespace {

// One leecher watching the whole object from t = 0.
SimConfig single_viewer(double length = 60.0) {
  SimConfig cfg;
  cfg.object_length = length;
  workload::Workload w;
  w.object_length = length;
  w.observation_window = length;
  w.playback_rate = cfg.playback_rate;
  w.sessions.push_back({"viewer", {{0.0, 0.0, length, workload::Interaction::Play}}});
  cfg.workload = w;
  cfg.check_invariants = true;
  return cfg;
}

SimConfig small_swarm(std::uint64_t seed, const char* policy) {
  SimConfig cfg;
  cfg.object_length = 120.0;
  cfg.generator.profile = workload::InteractivityProfile::HI;
  cfg.generator.session_count = 20;
  cfg.generator.mean_session_gap = 6.0;
  cfg.swarm.neighbourhood_min = 4;
  cfg.swarm.neighbourhood_max = 12;
  cfg.swarm.neighbourhood_target = 8;
  cfg.swarm.neighbourhood_floor = 3;
  cfg.policy = policies::parse_policy(policy);
  cfg.seed = seed;
  cfg.check_invariants = true;
  return cfg;
}

std::size_t count_lines(const std::string& log, const std::string& token) {
  std::istringstream in(log);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (line.find(token) != std::string::npos) ++n;
  return n;
}

}  // namespace

TEST(Run, SingleSeedSingleLeecherStreamsCleanly) {
  auto r = run(single_viewer());
  ASSERT_EQ(r.report.peers.size(), 1u);
  const auto& p = r.report.peers[0];
  EXPECT_EQ(p.continuity_index, 1.0);
  EXPECT_EQ(p.interruption_count, 0u);
  // Seed capacity is ten times the playback rate: the first 256 KiB piece
  // needs at least 0.4 s.
  EXPECT_GE(p.bootstrap_time, 0.4 - 1e-9);
  EXPECT_GE(p.startup_delay, p.bootstrap_time);
  EXPECT_LT(p.startup_delay, 1.0);
  EXPECT_LE(p.total_download_time, 60.0);
  EXPECT_EQ(r.report.aggregate.bytes_uploaded, r.report.aggregate.bytes_downloaded);
  EXPECT_EQ(r.report.aggregate.seed_bytes_uploaded, r.report.aggregate.bytes_downloaded);
}

TEST(Run, NoLeechersMeansNoTransfers) {
  auto cfg = single_viewer();
  cfg.workload.reset();
  cfg.generator.session_count = 0;
  auto r = run(cfg);
  EXPECT_TRUE(r.report.peers.empty());
  EXPECT_EQ(r.report.aggregate.blocks_transferred, 0u);
  EXPECT_EQ(r.report.aggregate.bytes_uploaded, 0u);
}

TEST(Run, DeterministicPerSeed) {
  auto cfg = small_swarm(5, "dispersiongreedy");
  cfg.record_event_log = true;
  auto a = run(cfg);
  auto b = run(cfg);
  EXPECT_EQ(to_json(a.report), to_json(b.report));
  EXPECT_EQ(a.event_log, b.event_log);
  cfg.seed = 6;
  EXPECT_NE(to_json(run(cfg).report), to_json(a.report));
}

TEST(Run, InvariantsHoldForEveryPolicy) {
  for (const char* name : {"dispersiongreedy", "titfortat-only", "random", "llp", "lrp", "trackerclosest", "ynp",
                           "cnp", "givetoget", "perpieceoptimistic"}) {
    auto r = run(small_swarm(3, name));
    EXPECT_GT(r.invariants.checks, 0u) << name;
    EXPECT_EQ(r.invariants.duplicate_blocks, 0u) << name;
    EXPECT_EQ(r.invariants.incomplete_serves, 0u) << name;
    EXPECT_EQ(r.invariants.seed_requests, 0u) << name;
    EXPECT_LE(r.invariants.max_unchoked, 5u) << name;
    const auto& a = r.report.aggregate;
    EXPECT_EQ(a.bytes_uploaded, a.bytes_downloaded) << name;
    EXPECT_GE(a.continuity_index, 0.0);
    EXPECT_LE(a.continuity_index, 1.0);
    EXPECT_GT(a.fairness, 0.0);
    EXPECT_LE(a.fairness, 1.0 + 1e-12);
    for (const auto& p : r.report.peers) {
      EXPECT_GE(p.continuity_index, 0.0);
      EXPECT_LE(p.continuity_index, 1.0);
      EXPECT_GE(p.link_utilization, 0.0);
      EXPECT_LE(p.link_utilization, 1.0 + 1e-9);
      EXPECT_GE(p.startup_delay, 0.0);
    }
  }
}

TEST(Run, PerPieceOptimisticTriggersAtPlayback) {
  auto cfg = small_swarm(2, "perpieceoptimistic");
  cfg.record_event_log = true;
  auto r = run(cfg);
  std::size_t played = 0;
  for (const auto& p : r.report.peers) played += p.pieces_played;
  EXPECT_GT(played, 0u);
  EXPECT_EQ(count_lines(r.event_log, "optimistic_trigger "), played);
  // Each trigger carries the timestamp of the piece played just before it.
  std::istringstream in(r.event_log);
  std::string prev, line;
  while (std::getline(in, line)) {
    if (line.find(" optimistic_trigger ") != std::string::npos) {
      ASSERT_NE(prev.find(" played "), std::string::npos) << line;
      EXPECT_EQ(prev.substr(0, prev.find(' ')), line.substr(0, line.find(' ')));
    }
    prev = line;
  }

  cfg.policy = policies::parse_policy("titfortat-only");
  EXPECT_EQ(count_lines(run(cfg).event_log, "optimistic_trigger "), 0u);
}

TEST(Run, GreedyFormationReportsDispersion) {
  auto r = run(small_swarm(4, "dispersiongreedy"));
  EXPECT_GT(r.report.aggregate.formation_samples, 0u);
  EXPECT_GT(r.report.aggregate.formation_dispersion, 0.0);
  EXPECT_LE(r.report.aggregate.formation_dispersion, 1.0);
}

TEST(Config, Validation) {
  SimConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.capacity_classes = {{1000.0, 0.5}, {2000.0, 0.4}};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.initial_seeds = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.horizon = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.trace_path = "/nonexistent/trace.csv";
  EXPECT_THROW(run(cfg), Error);
}

TEST(Report, CsvHasOneRowPerPeer) {
  auto r = run(small_swarm(1, "random"));
  const auto csv = to_csv(r.report);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.report.peers.size() + 1);
}
