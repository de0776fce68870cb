#include <gtest/gtest.h>

#include <map>
#include <set>

#include "instances.hpp"
#include "oracles.hpp"
#include "vodswarm/error.hpp"
#include "vodswarm/policies.hpp"

using namespace vodswarm;
using namespace vodswarm::policies;
using workload::InteractivityProfile;

namespace {

metrics::PopularityRecord record_of(std::map<std::size_t, metrics::Count> counts, std::size_t horizon = 4) {
  metrics::PopularityRecord r(1.0, horizon);
  for (auto [p, q] : counts) r.add(p, q);
  return r;
}

CandidateInfo cand(std::uint32_t id, metrics::PopularityRecord r) {
  CandidateInfo c;
  c.peer_id = PeerId{id};
  c.popularity_record = std::move(r);
  return c;
}

const std::vector<InteractivityProfile> kProfiles{InteractivityProfile::HI, InteractivityProfile::MI,
                                                  InteractivityProfile::LI};

}  // namespace

TEST(Names, ParseAndList) {
  EXPECT_EQ(parse_policy("dispersiongreedy").kind, PolicyKind::DispersionGreedy);
  auto y = parse_policy("ynp(3)");
  EXPECT_EQ(y.kind, PolicyKind::YNP);
  EXPECT_EQ(y.n, 3u);
  EXPECT_EQ(parse_policy("cnp", 4).n, 4u);
  EXPECT_THROW(parse_policy("ynp", 1), ConfigError);
  try {
    parse_policy("bogus");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("llp"), std::string::npos);
  }
  for (auto k : {PolicyKind::DispersionGreedy, PolicyKind::TitForTatOnly, PolicyKind::Random, PolicyKind::LLP,
                 PolicyKind::LRP, PolicyKind::TrackerClosest, PolicyKind::YNP, PolicyKind::CNP,
                 PolicyKind::GiveToGet, PolicyKind::PerPieceOptimistic})
    EXPECT_EQ(parse_policy(to_string(k)).kind, k);
}

TEST(Greedy, EmptyCandidates) {
  auto out = select_neighbors_greedy(record_of({{0, 1}}), {}, 3, InteractivityProfile::HI);
  EXPECT_TRUE(out.selected.empty());
  EXPECT_TRUE(out.per_step_dispersion.empty());
}

TEST(Greedy, SingleCandidate) {
  std::vector<CandidateInfo> cs{cand(4, record_of({{1, 1}}))};
  auto out = select_neighbors_greedy(record_of({{0, 1}}), cs, 2, InteractivityProfile::HI);
  ASSERT_EQ(out.selected, std::vector<PeerId>{PeerId{4}});
  EXPECT_EQ(out.per_step_dispersion, std::vector<double>{1.0});
}

TEST(Greedy, OverlapChosenFirst) {
  std::vector<CandidateInfo> cs{cand(0, record_of({{0, 1}})), cand(1, record_of({{1, 1}})),
                                cand(2, record_of({{2, 1}}))};
  auto out = select_neighbors_greedy(record_of({{0, 1}}), cs, 2, InteractivityProfile::HI);
  ASSERT_EQ(out.selected.size(), 2u);
  EXPECT_EQ(out.selected[0], PeerId{0});
  EXPECT_EQ(out.selected[1], PeerId{1});
  EXPECT_EQ(out.per_step_dispersion[0], 0.5);
  EXPECT_DOUBLE_EQ(out.per_step_dispersion[1], 2.0 / 3.0);
}

TEST(Greedy, TieBreakChain) {
  // Equal dispersion everywhere: higher N wins, then started peers under LI, then lowest id.
  std::vector<CandidateInfo> cs{cand(0, record_of({{1, 1}})), cand(1, record_of({{2, 1}})),
                                cand(2, record_of({{3, 1}}))};
  cs[2].request_rate = 2.0;
  cs[1].has_started = true;
  auto hi = select_neighbors_greedy(record_of({{0, 1}}), cs, 3, InteractivityProfile::HI);
  EXPECT_EQ(hi.selected, (std::vector<PeerId>{PeerId{2}, PeerId{0}, PeerId{1}}));
  auto li = select_neighbors_greedy(record_of({{0, 1}}), cs, 3, InteractivityProfile::LI);
  EXPECT_EQ(li.selected, (std::vector<PeerId>{PeerId{2}, PeerId{1}, PeerId{0}}));
}

TEST(Greedy, ShapeMismatchFails) {
  std::vector<CandidateInfo> cs{cand(0, record_of({{0, 1}}, 5))};
  EXPECT_THROW(select_neighbors_greedy(record_of({{0, 1}}), cs, 1, InteractivityProfile::HI), InputError);
}

TEST(Greedy, MatchesExhaustiveOracle) {
  Rng rng(101);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t positions = 1 + rng.below(12);
    auto own = instances::record(rng, positions, 6);
    auto cs = instances::candidates(rng, rng.below(9), positions);
    const std::size_t max_size = rng.below(10);
    const auto hint = kProfiles[rng.below(3)];
    auto got = select_neighbors_greedy(own, cs, max_size, hint);
    auto want = oracle::greedy(own, cs, max_size, hint);
    ASSERT_EQ(got.selected, want.selected) << "trial " << trial;
    ASSERT_EQ(got.per_step_dispersion, want.per_step_dispersion) << "trial " << trial;
    EXPECT_EQ(got.selected.size(), std::min(cs.size(), max_size));
    EXPECT_EQ(std::set<PeerId>(got.selected.begin(), got.selected.end()).size(), got.selected.size());
  }
}

TEST(Greedy, StepIsNoWorseThanAnyAlternative) {
  Rng rng(202);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t positions = 2 + rng.below(10);
    auto own = instances::record(rng, positions, 6);
    auto cs = instances::candidates(rng, 1 + rng.below(8), positions);
    auto out = select_neighbors_greedy(own, cs, cs.size(), InteractivityProfile::MI);
    std::vector<CandidateInfo> chosen;
    std::set<PeerId> used;
    for (std::size_t step = 0; step < out.selected.size(); ++step) {
      for (const auto& c : cs) {
        if (used.count(c.peer_id)) continue;
        auto trial_set = chosen;
        trial_set.push_back(c);
        std::size_t mass = own.total();
        for (const auto& t : trial_set) mass += t.popularity_record.total();
        const double alt = mass == 0 ? 1.0 : evaluate_set_dispersion(own, trial_set);
        EXPECT_LE(out.per_step_dispersion[step], alt + 1e-12);
      }
      auto it = std::find_if(cs.begin(), cs.end(), [&](const auto& c) { return c.peer_id == out.selected[step]; });
      chosen.push_back(*it);
      used.insert(it->peer_id);
    }
  }
}

TEST(Greedy, Deterministic) {
  Rng rng(5);
  auto own = instances::record(rng, 10, 6);
  auto cs = instances::candidates(rng, 8, 10);
  EXPECT_EQ(select_neighbors_greedy(own, cs, 5, InteractivityProfile::LI),
            select_neighbors_greedy(own, cs, 5, InteractivityProfile::LI));
}

TEST(RandomSelection, SizeAndDistinct) {
  Rng gen(9);
  auto cs = instances::candidates(gen, 8, 10);
  Rng rng(1);
  auto out = select_neighbors_random(instances::record(gen, 10, 5), cs, 5, rng);
  EXPECT_EQ(out.selected.size(), 5u);
  EXPECT_EQ(out.per_step_dispersion.size(), 5u);
  EXPECT_EQ(std::set<PeerId>(out.selected.begin(), out.selected.end()).size(), 5u);
}

TEST(SetDispersion, Examples) {
  EXPECT_EQ(evaluate_set_dispersion(record_of({{0, 100}}), {}), 0.01);
  std::vector<CandidateInfo> distinct{cand(0, record_of({{0, 1}, {1, 1}, {2, 1}}))};
  EXPECT_EQ(evaluate_set_dispersion(record_of({}), distinct), 1.0);
  std::vector<CandidateInfo> one{cand(0, record_of({{0, 1}, {1, 1}}))};
  EXPECT_EQ(evaluate_set_dispersion(record_of({{0, 2}}), one), 0.5);
  EXPECT_THROW(evaluate_set_dispersion(record_of({}), {}), InputError);
}

TEST(CapacityReselect, IdentityWhenCapacityHolds) {
  std::vector<CandidateInfo> cs{cand(0, record_of({{1, 1}})), cand(1, record_of({{1, 1}}))};
  for (auto& c : cs) {
    c.upload_capacity = 4 * 65536.0;
    c.upload_slots = 4;
  }
  cs[1].recent_forward_rate = 99;
  auto own = record_of({{0, 1}});
  auto out = select_neighbors_greedy(own, cs, 2, InteractivityProfile::HI);
  // Each contributes 65536; together 2x the demand.
  EXPECT_EQ(capacity_check_and_reselect(out, own, cs, 2, InteractivityProfile::HI, 65536.0), out);
}

TEST(CapacityReselect, PrefersFasterForwarderAmongTies) {
  std::vector<CandidateInfo> cs{cand(0, record_of({{1, 1}})), cand(1, record_of({{1, 1}}))};
  cs[0].recent_forward_rate = 10;
  cs[1].recent_forward_rate = 20;
  for (auto& c : cs) c.upload_capacity = 1000.0;
  auto own = record_of({{0, 1}});
  auto out = select_neighbors_greedy(own, cs, 1, InteractivityProfile::HI);
  ASSERT_EQ(out.selected, std::vector<PeerId>{PeerId{0}});
  auto re = capacity_check_and_reselect(out, own, cs, 1, InteractivityProfile::HI, 65536.0);
  EXPECT_EQ(re.selected, std::vector<PeerId>{PeerId{1}});
}

TEST(CapacityReselect, ZeroCandidatesIdentity) {
  auto own = record_of({{0, 1}});
  auto out = select_neighbors_greedy(own, {}, 3, InteractivityProfile::HI);
  EXPECT_EQ(capacity_check_and_reselect(out, own, {}, 3, InteractivityProfile::HI, 65536.0), out);
}

TEST(CapacityReselect, MatchesForwardAwareOracle) {
  Rng rng(303);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t positions = 1 + rng.below(10);
    auto own = instances::record(rng, positions, 6);
    auto cs = instances::candidates(rng, rng.below(9), positions);
    const std::size_t max_size = rng.below(6);
    const auto hint = kProfiles[rng.below(3)];
    const double demand = 65536.0 * static_cast<double>(1 + rng.below(3));
    auto out = select_neighbors_greedy(own, cs, max_size, hint);
    double supply = 0.0;
    for (auto id : out.selected)
      for (const auto& c : cs)
        if (c.peer_id == id) supply += expected_contribution(c);
    auto got = capacity_check_and_reselect(out, own, cs, max_size, hint, demand);
    auto want = supply >= demand ? out : oracle::greedy(own, cs, max_size, hint, true);
    ASSERT_EQ(got, want) << "trial " << trial;
  }
}

TEST(TitForTat, Examples) {
  std::vector<std::pair<PeerId, double>> rates{{PeerId{0}, 5}, {PeerId{1}, 9}, {PeerId{2}, 1}};
  EXPECT_TRUE(tit_for_tat_unchoke(rates, 0).empty());
  EXPECT_EQ(tit_for_tat_unchoke(rates, 2), (std::vector<PeerId>{PeerId{1}, PeerId{0}}));
  EXPECT_EQ(tit_for_tat_unchoke(rates, 5).size(), 3u);
  std::vector<std::pair<PeerId, double>> tied{{PeerId{3}, 1}, {PeerId{1}, 1}};
  EXPECT_EQ(tit_for_tat_unchoke(tied, 1), std::vector<PeerId>{PeerId{1}});
}

TEST(TitForTat, TopKAndScaleInvariant) {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::pair<PeerId, double>> rates;
    const std::size_t n = rng.below(10);
    for (std::uint32_t i = 0; i < n; ++i) rates.push_back({PeerId{i}, static_cast<double>(rng.below(5))});
    const std::size_t k = rng.below(6);
    auto got = tit_for_tat_unchoke(rates, k);
    auto sorted = rates;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : to_index(a.first) < to_index(b.first);
    });
    std::vector<PeerId> want;
    for (std::size_t i = 0; i < std::min(k, n); ++i) want.push_back(sorted[i].first);
    EXPECT_EQ(got, want);
    auto scaled = rates;
    for (auto& [id, r] : scaled) r *= 3.5;
    EXPECT_EQ(tit_for_tat_unchoke(scaled, k), got);
  }
}

TEST(Optimistic, EmptyAndSingleton) {
  Rng rng(1);
  EXPECT_FALSE(optimistic_unchoke({}, rng));
  std::vector<PeerId> one{PeerId{7}};
  EXPECT_EQ(optimistic_unchoke(one, rng), PeerId{7});
}

TEST(Optimistic, UniformOverDraws) {
  std::vector<PeerId> ids;
  for (std::uint32_t i = 0; i < 10; ++i) ids.push_back(PeerId{i});
  Rng rng(2024);
  std::vector<int> hits(10, 0);
  for (int i = 0; i < 10000; ++i) ++hits[to_index(*optimistic_unchoke(ids, rng))];
  double chi2 = 0.0;
  for (int h : hits) {
    EXPECT_NEAR(h, 1000, 150);
    chi2 += (h - 1000.0) * (h - 1000.0) / 1000.0;
  }
  // 9 degrees of freedom, p = 0.001.
  EXPECT_LT(chi2, 27.88);
}

TEST(Baselines, Examples) {
  Rng rng(1);
  std::vector<CandidateInfo> cs;
  for (std::uint32_t i = 0; i < 3; ++i) {
    auto c = cand(i, record_of({}));
    c.buffer_summary = {true};
    cs.push_back(c);
  }
  cs[0].queue_length = 4;
  cs[1].queue_length = 1;
  cs[2].queue_length = 7;
  EXPECT_EQ(baseline_request_target({PolicyKind::LLP}, 0, cs, 0.0, rng), PeerId{1});
  cs[0].requests_sent_to = 0;
  cs[1].requests_sent_to = 0;
  cs[2].requests_sent_to = 3;
  EXPECT_EQ(baseline_request_target({PolicyKind::LRP}, 0, cs, 0.0, rng), PeerId{0});

  std::vector<CandidateInfo> single{cs[2]};
  single[0].join_time = 1000;
  EXPECT_EQ(baseline_request_target({PolicyKind::YNP, 2}, 0, single, 0.0, rng), PeerId{2});

  std::vector<CandidateInfo> none{cand(0, record_of({}))};
  none[0].buffer_summary = {false};
  EXPECT_THROW(baseline_request_target({PolicyKind::LLP}, 0, none, 0.0, rng), InputError);
}

TEST(Baselines, MatchOracle) {
  Rng gen(404);
  const std::vector<Policy> kinds{{PolicyKind::LLP}, {PolicyKind::LRP}, {PolicyKind::TrackerClosest},
                                  {PolicyKind::YNP, 2}, {PolicyKind::YNP, 3}, {PolicyKind::CNP, 2},
                                  {PolicyKind::CNP, 4}};
  for (int trial = 0; trial < 2000; ++trial) {
    auto cs = instances::candidates(gen, 1 + gen.below(8), 4);
    const std::size_t piece = gen.below(16);
    if (oracle::holders_of(cs, piece).empty()) continue;
    const auto& policy = kinds[gen.below(kinds.size())];
    const double self_join = static_cast<double>(gen.below(6)) * 10.0;
    Rng a(trial), b(trial);
    ASSERT_EQ(baseline_request_target(policy, piece, cs, self_join, a),
              oracle::baseline(policy, piece, cs, self_join, b))
        << "trial " << trial;
  }
}

TEST(PerPieceHook, TriggersOnlyForItsPolicy) {
  const Policy shah{PolicyKind::PerPieceOptimistic};
  std::size_t triggers = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    auto t = per_piece_optimistic_hook(shah, {1.5 * static_cast<double>(i), i});
    ASSERT_TRUE(t);
    EXPECT_EQ(*t, 1.5 * static_cast<double>(i));
    ++triggers;
  }
  EXPECT_EQ(triggers, 10u);
  EXPECT_FALSE(per_piece_optimistic_hook({PolicyKind::TitForTatOnly}, {1.0, 0}));
}
