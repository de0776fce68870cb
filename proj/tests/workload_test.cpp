#include <gtest/gtest.h>

#include "vodswarm/error.hpp"
#include "vodswarm/workload.hpp"

using namespace vodswarm;
using namespace vodswarm::workload;

namespace {

const char* kHeader = "client_id,arrival_time,start_pos,end_pos,interaction\n";

Session session_of(std::vector<std::pair<double, double>> spans, double gap = 5.0) {
  Session s{"c", {}};
  double t = 0.0;
  for (auto [a, b] : spans) {
    s.requests.push_back({t, a, b, s.requests.empty() ? Interaction::Play : Interaction::JumpForward});
    t += (b - a) + gap;
  }
  return s;
}

}  // namespace

TEST(ParseTrace, SingleRequest) {
  TraceDefaults d;
  d.object_length = 120;
  d.observation_window = 100;
  auto w = parse_trace(std::string(kHeader) + "c1,0.0,10.0,60.0,play\n", d);
  ASSERT_EQ(w.sessions.size(), 1u);
  ASSERT_EQ(w.sessions[0].requests.size(), 1u);
  EXPECT_DOUBLE_EQ(w.sessions[0].requests[0].duration(), 50.0);
  EXPECT_EQ(w.object_length, 120.0);
}

TEST(ParseTrace, HeaderOnlyIsNoSessions) {
  TraceDefaults d{120.0, 100.0};
  try {
    parse_trace(kHeader, d);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("no sessions"), std::string::npos);
  }
}

TEST(ParseTrace, RequestsSortedByArrival) {
  TraceDefaults d{120.0, 100.0};
  auto w = parse_trace(std::string(kHeader) + "c1,5.0,0,1,play\nc1,2.0,3,4,jumpf\n", d);
  ASSERT_EQ(w.sessions[0].requests.size(), 2u);
  EXPECT_EQ(w.sessions[0].requests[0].arrival_time, 2.0);
  EXPECT_EQ(w.sessions[0].requests[1].arrival_time, 5.0);
}

TEST(ParseTrace, MetadataLineAndFlagPrecedence) {
  const std::string text = "# object_length=300 window=50\n" + std::string(kHeader) + "a,1,0,10,play\n";
  auto w = parse_trace(text);
  EXPECT_EQ(w.object_length, 300.0);
  EXPECT_EQ(w.observation_window, 50.0);

  TraceDefaults flags;
  flags.observation_window = 80.0;
  EXPECT_EQ(parse_trace(text, flags).observation_window, 80.0);

  flags.override_file = false;
  EXPECT_EQ(parse_trace(text, flags).observation_window, 50.0);
}

TEST(ParseTrace, ErrorsCarryLineNumbers) {
  TraceDefaults d{100.0, 100.0};
  auto line_of = [&](const std::string& body) -> std::size_t {
    try {
      parse_trace(std::string(kHeader) + body, d);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("a,0,0,1,play\na,1,0,1\n"), 3u);
  EXPECT_EQ(line_of("a,0,5,1,play\n"), 2u);
  EXPECT_EQ(line_of("a,x,0,1,play\n"), 2u);
  EXPECT_EQ(line_of("a,0,0,1,rewind\n"), 2u);
  EXPECT_EQ(line_of("a,0,0,1,play\na,0,0,101,play\n"), 3u);
  EXPECT_EQ(line_of("a,0,0,1,play\na,100,0,1,play\n"), 3u);
  EXPECT_THROW(parse_trace("a,0,0,1,play\n", d), ParseError);
  EXPECT_THROW(parse_trace(kHeader + std::string("a,0,0,1,play\n")), ParseError);
}

TEST(ParseTrace, SerializeRoundTrip) {
  GeneratorConfig g;
  g.profile = InteractivityProfile::MI;
  g.session_count = 30;
  g.playback_rate = 50000;
  g.seed = 9;
  auto w = generate_workload(g);
  EXPECT_EQ(parse_trace(serialize_trace(w)), w);
}

TEST(SessionStats, SingleRequest) {
  auto st = session_stats(session_of({{0, 10}}));
  EXPECT_EQ(st.request_count, 1u);
  EXPECT_TRUE(st.inactivity_gaps.empty());
  EXPECT_TRUE(st.jump_distances.empty());
  EXPECT_EQ(st.mean_inactivity_gap, 0.0);
}

TEST(SessionStats, ForwardJumpAndGap) {
  Session s{"c", {{0, 0, 10, Interaction::Play}, {20, 30, 40, Interaction::JumpForward}}};
  auto st = session_stats(s);
  ASSERT_EQ(st.jump_distances.size(), 1u);
  EXPECT_EQ(st.jump_distances[0], 20.0);
  EXPECT_EQ(st.inactivity_gaps[0], 10.0);
  EXPECT_EQ(st.session_duration, 30.0);
}

TEST(SessionStats, BackwardJumpIsNegative) {
  Session s{"c", {{0, 0, 10, Interaction::Play}, {12, 2, 8, Interaction::JumpBackward}}};
  EXPECT_EQ(session_stats(s).jump_distances[0], -8.0);
}

TEST(ClassifySession, ProfileRules) {
  const double L = 200;
  EXPECT_EQ(classify_session(session_of({{0, 10}, {20, 30}, {40, 50}, {60, 70}}), L), InteractivityProfile::HI);
  EXPECT_EQ(classify_session(session_of({{0, 200}}), L), InteractivityProfile::LI);
  EXPECT_EQ(classify_session(session_of({{0, 20}, {50, 70}}), L), InteractivityProfile::MI);
  // Long requests but more than one of them.
  EXPECT_EQ(classify_session(session_of({{0, 100}, {100, 200}}), L), InteractivityProfile::MI);
  // Exactly 20% is not short.
  EXPECT_EQ(classify_session(session_of({{0, 40}}), L), InteractivityProfile::LI);
}

TEST(Validate, RejectsBrokenWorkloads) {
  Workload w;
  w.object_length = 10;
  w.observation_window = 10;
  w.sessions.push_back({"a", {{0, 0, 5, Interaction::Play}}});
  EXPECT_NO_THROW(validate(w));
  auto bad = w;
  bad.sessions[0].requests[0].end_pos = 11;
  EXPECT_THROW(validate(bad), InputError);
  bad = w;
  bad.sessions[0].requests.push_back({-1, 0, 1, Interaction::Play});
  EXPECT_THROW(validate(bad), InputError);
  bad = w;
  bad.sessions[0].requests.clear();
  EXPECT_THROW(validate(bad), InputError);
}

class GeneratorProfiles : public ::testing::TestWithParam<InteractivityProfile> {};

TEST_P(GeneratorProfiles, SessionsClassifyToTarget) {
  GeneratorConfig g;
  g.profile = GetParam();
  g.session_count = 100;
  g.seed = 7;
  auto w = generate_workload(g);
  ASSERT_EQ(w.sessions.size(), 100u);
  std::size_t hits = 0;
  for (const auto& s : w.sessions) hits += classify_session(s, w.object_length) == GetParam();
  EXPECT_GE(hits, 95u);
  EXPECT_NO_THROW(validate(w));
}

INSTANTIATE_TEST_SUITE_P(All, GeneratorProfiles,
                         ::testing::Values(InteractivityProfile::HI, InteractivityProfile::MI,
                                           InteractivityProfile::LI));

TEST(Generator, SingleLiSession) {
  GeneratorConfig g;
  g.profile = InteractivityProfile::LI;
  g.session_count = 1;
  auto w = generate_workload(g);
  ASSERT_EQ(w.sessions.size(), 1u);
  EXPECT_EQ(w.sessions[0].requests.size(), 1u);
}

TEST(Generator, DeterministicPerSeed) {
  GeneratorConfig g;
  g.seed = 42;
  EXPECT_EQ(serialize_trace(generate_workload(g)), serialize_trace(generate_workload(g)));
  auto other = g;
  other.seed = 43;
  EXPECT_NE(serialize_trace(generate_workload(g)), serialize_trace(generate_workload(other)));
}

TEST(Generator, RejectsBadConfig) {
  GeneratorConfig g;
  g.session_count = 0;
  EXPECT_THROW(generate_workload(g), ConfigError);
  g = {};
  g.start_skew = 0;
  EXPECT_THROW(generate_workload(g), ConfigError);
  g = {};
  g.mean_session_gap = -1;
  EXPECT_THROW(generate_workload(g), ConfigError);
}

TEST(Names, RoundTrip) {
  for (auto i : {Interaction::Play, Interaction::Pause, Interaction::JumpForward, Interaction::JumpBackward,
                 Interaction::Stop})
    EXPECT_EQ(parse_interaction(to_string(i)), i);
  for (auto p : {InteractivityProfile::HI, InteractivityProfile::MI, InteractivityProfile::LI})
    EXPECT_EQ(parse_profile(to_string(p)), p);
  EXPECT_FALSE(parse_profile("xx"));
}

TEST(ParseTrace, WindowFromExtentWhenAsked) {
  TraceDefaults d;
  d.object_length = 100;
  const std::string text = std::string(kHeader) + "a,3,0,10.5,play\nb,1,0,2,play\n";
  EXPECT_THROW(parse_trace(text, d), ParseError);
  d.window_from_extent = true;
  EXPECT_EQ(parse_trace(text, d).observation_window, 15.0);
  d.observation_window = 50;
  EXPECT_EQ(parse_trace(text, d).observation_window, 50.0);
}
