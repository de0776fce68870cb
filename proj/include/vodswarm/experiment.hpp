#pragma once

// Multi-run experiments: labelled configs, repetitions and aggregate tables.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vodswarm/sim.hpp"

namespace vodswarm::experiment {

struct LabelledConfig {
  std::string label;
  sim::SimConfig config;
};

struct ExperimentSpec {
  std::vector<LabelledConfig> runs;  // labels unique
  std::size_t repetitions = 1;
  std::uint64_t base_seed = 1;
  std::string output_dir;

  // Throws ConfigError on an empty run list, duplicate labels or zero repetitions.
  void validate() const;
};

// INI layout:
//   [experiment]  repetitions, base_seed, output_dir, config (base config file)
//   [defaults]    section.key overrides applied to every run
//   [run:<label>] section.key overrides for one label
// Relative paths resolve against base_dir.
ExperimentSpec parse_experiment(std::string_view text, const std::string& base_dir = {});

// Seed of repetition `rep`; shared by every label so runs are paired.
std::uint64_t repetition_seed(std::uint64_t base_seed, std::size_t rep);

struct RunOutcome {
  std::string label;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  sim::QoSReport report;
};

struct FieldStats {
  std::string field;
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation, 0 for one repetition
};

struct LabelSummary {
  std::string label;
  std::string policy;
  std::size_t repetitions = 0;
  std::vector<FieldStats> fields;  // every aggregate QoS field, fixed order
};

struct Comparison {
  std::vector<RunOutcome> runs;       // ordered by label (spec order), then repetition
  std::vector<LabelSummary> summary;  // one per label, file order
};

// Runs every (label, repetition) on `workers` threads (0: hardware concurrency).
// Output does not depend on the worker count. A failing run aborts the whole
// comparison with an error naming its label and seed.
Comparison compare(const ExperimentSpec& spec, std::size_t workers = 0);

std::string to_json(const Comparison& c);
std::string to_csv(const Comparison& c);

}  // namespace vodswarm::experiment
