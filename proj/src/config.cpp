#include "vodswarm/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "text.hpp"
#include "vodswarm/error.hpp"

namespace vodswarm::config {

namespace {

using sim::SimConfig;

struct Entry {
  OptionInfo info;
  std::function<void(SimConfig&, std::string_view)> set;
  std::function<std::string(const SimConfig&)> get;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError(std::string(key) + ": expected " + std::string(expected) + ", got '" + std::string(value) + "'");
}

double to_double(std::string_view key, std::string_view v) {
  auto d = text::parse_double(v);
  if (!d) bad_value(key, v, "a number");
  return *d;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  auto i = text::parse_int<Int>(v);
  if (!i) bad_value(key, v, "a non-negative integer");
  return *i;
}

bool to_bool(std::string_view key, std::string_view v) {
  auto t = text::trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  bad_value(key, v, "true or false");
}

Entry real(std::string key, std::string flag, std::string help, double SimConfig::*field) {
  return {{key, std::move(flag), std::move(help)},
          [key, field](SimConfig& c, std::string_view v) { c.*field = to_double(key, v); },
          [field](const SimConfig& c) { return text::format_double(c.*field); }};
}

template <typename Get>
Entry real_at(std::string key, std::string flag, std::string help, Get member) {
  return {{key, std::move(flag), std::move(help)},
          [key, member](SimConfig& c, std::string_view v) { member(c) = to_double(key, v); },
          [member](const SimConfig& c) { return text::format_double(member(c)); }};
}

template <typename Int, typename Get>
Entry count_at(std::string key, std::string flag, std::string help, Get member) {
  return {{key, std::move(flag), std::move(help)},
          [key, member](SimConfig& c, std::string_view v) { member(c) = to_int<Int>(key, v); },
          [member](const SimConfig& c) { return std::to_string(member(c)); }};
}

std::vector<Entry> build_entries() {
  std::vector<Entry> e;
  e.push_back(real("content.object_length", "object-len", "object length in seconds", &SimConfig::object_length));
  e.push_back(count_at<std::uint64_t>("content.piece_size", "piece-size", "piece size in bytes",
                                      [](auto& c) -> auto& { return c.piece_size; }));
  e.push_back(count_at<std::uint64_t>("content.block_size", "block-size", "block size in bytes",
                                      [](auto& c) -> auto& { return c.block_size; }));
  e.push_back(real("content.playback_rate", "playback-rate", "playback rate in bytes/s", &SimConfig::playback_rate));

  e.push_back(real_at("swarm.unchoke_interval", "unchoke-interval", "seconds between unchoke rounds",
                      [](auto& c) -> auto& { return c.swarm.unchoke_interval; }));
  e.push_back(real_at("swarm.optimistic_interval", "optimistic-interval", "seconds between optimistic unchokes",
                      [](auto& c) -> auto& { return c.swarm.optimistic_interval; }));
  e.push_back(count_at<std::size_t>("swarm.neighbourhood_min", "neighbourhood-min", "minimum neighbourhood size",
                                    [](auto& c) -> auto& { return c.swarm.neighbourhood_min; }));
  e.push_back(count_at<std::size_t>("swarm.neighbourhood_max", "neighbourhood-max", "maximum neighbourhood size",
                                    [](auto& c) -> auto& { return c.swarm.neighbourhood_max; }));
  e.push_back(count_at<std::size_t>("swarm.neighbourhood_target", "neighbourhood-target",
                                    "neighbours chosen at formation",
                                    [](auto& c) -> auto& { return c.swarm.neighbourhood_target; }));
  e.push_back(count_at<std::size_t>("swarm.neighbourhood_floor", "neighbourhood-floor",
                                    "size below which the tracker is asked for more",
                                    [](auto& c) -> auto& { return c.swarm.neighbourhood_floor; }));
  e.push_back(count_at<std::size_t>("swarm.pipeline_depth", "pipeline-depth", "outstanding block requests per link",
                                    [](auto& c) -> auto& { return c.swarm.pipeline_depth; }));
  e.push_back(count_at<std::size_t>("swarm.regular_slots", "regular-slots", "regular upload slots",
                                    [](auto& c) -> auto& { return c.swarm.regular_slots; }));
  e.push_back(count_at<std::size_t>("swarm.optimistic_slots", "optimistic-slots", "optimistic upload slots",
                                    [](auto& c) -> auto& { return c.swarm.optimistic_slots; }));
  e.push_back(count_at<std::size_t>("swarm.tracker_list_size", "tracker-list-size", "peers returned by the tracker",
                                    [](auto& c) -> auto& { return c.swarm.tracker_list_size; }));
  e.push_back(real_at("swarm.tracker_update_interval", "tracker-update-interval", "seconds between tracker updates",
                      [](auto& c) -> auto& { return c.swarm.tracker_update_interval; }));

  e.push_back({{"policy.kind", "policy", "neighbour/request policy: " + policies::policy_names()},
               [](SimConfig& c, std::string_view v) {
                 auto explicit_n = c.policy.n;
                 c.policy = policies::parse_policy(v, v.find('(') == std::string_view::npos
                                                          ? std::optional<std::size_t>(explicit_n)
                                                          : std::nullopt);
               },
               [](const SimConfig& c) { return std::string(policies::to_string(c.policy.kind)); }});
  e.push_back({{"policy.n", "policy-n", "holders considered by ynp/cnp"},
               [](SimConfig& c, std::string_view v) {
                 c.policy.n = to_int<std::size_t>("policy.n", v);
                 if (c.policy.n < 2) throw ConfigError("policy.n must be at least 2");
               },
               [](const SimConfig& c) { return std::to_string(c.policy.n); }});

  e.push_back({{"workload.trace", "trace", "trace file (overrides the generator)"},
               [](SimConfig& c, std::string_view v) { c.trace_path = std::string(text::trim(v)); },
               [](const SimConfig& c) { return c.trace_path; }});
  e.push_back({{"workload.profile", "profile", "generated interactivity profile: hi, mi or li"},
               [](SimConfig& c, std::string_view v) {
                 auto p = workload::parse_profile(v);
                 if (!p) bad_value("workload.profile", v, "hi, mi or li");
                 c.generator.profile = *p;
               },
               [](const SimConfig& c) { return std::string(workload::to_string(c.generator.profile)); }});
  e.push_back(count_at<std::size_t>("workload.sessions", "sessions", "generated sessions (one leecher each)",
                                    [](auto& c) -> auto& { return c.generator.session_count; }));
  e.push_back(real_at("workload.mean_session_gap", "mean-session-gap", "mean seconds between session starts",
                      [](auto& c) -> auto& { return c.generator.mean_session_gap; }));
  e.push_back(real_at("workload.mean_think_time", "mean-think-time", "mean seconds between a session's requests",
                      [](auto& c) -> auto& { return c.generator.mean_think_time; }));
  e.push_back(real_at("workload.start_skew", "start-skew", "start position decay per twentieth of the object",
                      [](auto& c) -> auto& { return c.generator.start_skew; }));

  e.push_back({{"peers.capacity_classes", "capacity-classes", "upload:fraction list, e.g. 131072:0.5,65536:0.5"},
               [](SimConfig& c, std::string_view v) { c.capacity_classes = parse_capacity_classes(v); },
               [](const SimConfig& c) {
                 std::string out;
                 for (const auto& k : c.capacity_classes) {
                   if (!out.empty()) out += ',';
                   out += text::format_double(k.upload) + ":" + text::format_double(k.fraction);
                 }
                 return out;
               }});
  e.push_back(count_at<std::size_t>("peers.initial_seeds", "initial-seeds", "peers holding the whole object at t=0",
                                    [](auto& c) -> auto& { return c.initial_seeds; }));
  e.push_back(real("peers.seed_capacity", "seed-capacity", "initial seed upload rate in bytes/s",
                   &SimConfig::seed_capacity));
  e.push_back(real("peers.linger_fraction", "linger-fraction", "share of finished leechers that stay as seeds",
                   &SimConfig::linger_fraction));
  e.push_back(count_at<std::size_t>("peers.startup_pieces", "startup-pieces", "pieces buffered before playback starts",
                                    [](auto& c) -> auto& { return c.startup_pieces; }));
  e.push_back(count_at<std::size_t>("peers.streaming_window", "streaming-window",
                                    "missing pieces ahead of playback eligible for download",
                                    [](auto& c) -> auto& { return c.streaming_window; }));

  e.push_back(count_at<std::uint64_t>("run.seed", "seed", "base random seed",
                                      [](auto& c) -> auto& { return c.seed; }));
  e.push_back(real("run.horizon", "horizon", "simulated seconds; 0 picks window + 3 object lengths",
                   &SimConfig::horizon));
  e.push_back({{"run.check_invariants", "check-invariants", "verify protocol invariants after every event"},
               [](SimConfig& c, std::string_view v) { c.check_invariants = to_bool("run.check_invariants", v); },
               [](const SimConfig& c) { return std::string(c.check_invariants ? "true" : "false"); }});
  e.push_back({{"run.event_log", "record-events", "record the event log"},
               [](SimConfig& c, std::string_view v) { c.record_event_log = to_bool("run.event_log", v); },
               [](const SimConfig& c) { return std::string(c.record_event_log ? "true" : "false"); }});
  return e;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> all = build_entries();
  return all;
}

}  // namespace

const std::vector<OptionInfo>& options() {
  static const std::vector<OptionInfo> infos = [] {
    std::vector<OptionInfo> out;
    for (const auto& e : entries()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

void set_option(sim::SimConfig& cfg, std::string_view key, std::string_view value) {
  const auto k = text::trim(key);
  for (const auto& e : entries())
    if (e.info.key == k) return e.set(cfg, value);
  throw ConfigError("unknown config key '" + std::string(k) + "'");
}

std::vector<sim::CapacityClass> parse_capacity_classes(std::string_view text) {
  std::vector<sim::CapacityClass> out;
  for (auto item : text::split(text, ',')) {
    auto parts = text::split(item, ':');
    if (parts.size() != 2) bad_value("peers.capacity_classes", item, "upload:fraction");
    out.push_back({to_double("peers.capacity_classes", parts[0]), to_double("peers.capacity_classes", parts[1])});
  }
  return out;
}

void apply_ini(sim::SimConfig& cfg, std::string_view text, const std::string& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must sit inside a section");
    for (const auto& [name, node] : body) {
      const std::string key = section + "." + name;
      std::string value = node.get_value<std::string>();
      if (key == "workload.trace" && !value.empty() && !base_dir.empty() &&
          std::filesystem::path(value).is_relative())
        value = (std::filesystem::path(base_dir) / value).string();
      set_option(cfg, key, value);
    }
  }
}

sim::SimConfig parse_config(std::string_view text, const std::string& base_dir) {
  sim::SimConfig cfg;
  apply_ini(cfg, text, base_dir);
  return cfg;
}

std::string to_ini(const sim::SimConfig& cfg) {
  std::string out;
  std::string current;
  for (const auto& e : entries()) {
    auto dot = e.info.key.find('.');
    std::string section = e.info.key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out += '\n';
      out += "[" + section + "]\n";
      current = section;
    }
    out += e.info.key.substr(dot + 1) + " = " + e.get(cfg) + "\n";
  }
  return out;
}

}  // namespace vodswarm::config
