#pragma once

// Simulation config files: INI sections whose keys mirror the CLI flags.

#include <string>
#include <string_view>
#include <vector>

#include "vodswarm/sim.hpp"

namespace vodswarm::config {

struct OptionInfo {
  std::string key;   // "section.name"
  std::string flag;  // long CLI flag without dashes
  std::string help;
};

// Every settable key, in file order.
const std::vector<OptionInfo>& options();

// Assigns one key. Throws ConfigError naming the key on unknown keys or bad values.
void set_option(sim::SimConfig& cfg, std::string_view key, std::string_view value);

// Parses INI text onto `cfg`. Relative trace paths resolve against base_dir.
void apply_ini(sim::SimConfig& cfg, std::string_view text, const std::string& base_dir = {});
sim::SimConfig parse_config(std::string_view text, const std::string& base_dir = {});

// Canonical INI for `cfg`; parse_config(to_ini(c)) reproduces c (except a preloaded workload).
std::string to_ini(const sim::SimConfig& cfg);

// "131072:0.5,65536:0.5"
std::vector<sim::CapacityClass> parse_capacity_classes(std::string_view text);

}  // namespace vodswarm::config
