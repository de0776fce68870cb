#include "vodswarm/experiment.hpp"

#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "text.hpp"
#include "vodswarm/config.hpp"
#include "vodswarm/error.hpp"
#include "vodswarm/random.hpp"

namespace vodswarm::experiment {

namespace {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

void apply_overrides(sim::SimConfig& cfg, const pt::ptree& section, const std::string& base_dir) {
  for (const auto& [key, node] : section) {
    std::string value = node.get_value<std::string>();
    if (key == "workload.trace") value = resolve(value, base_dir);
    config::set_option(cfg, key, value);
  }
}

using Field = std::pair<const char*, double (*)(const sim::AggregateQoS&)>;

// Aggregate QoS fields summarized per label, in output order.
const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      {"peers", [](const sim::AggregateQoS& a) { return static_cast<double>(a.peers); }},
      {"continuity_index", [](const sim::AggregateQoS& a) { return a.continuity_index; }},
      {"startup_delay", [](const sim::AggregateQoS& a) { return a.startup_delay; }},
      {"bootstrap_time", [](const sim::AggregateQoS& a) { return a.bootstrap_time; }},
      {"mean_time_to_return", [](const sim::AggregateQoS& a) { return a.mean_time_to_return; }},
      {"interruption_count", [](const sim::AggregateQoS& a) { return a.interruption_count; }},
      {"total_download_time", [](const sim::AggregateQoS& a) { return a.total_download_time; }},
      {"link_utilization", [](const sim::AggregateQoS& a) { return a.link_utilization; }},
      {"fairness", [](const sim::AggregateQoS& a) { return a.fairness; }},
      {"formation_dispersion", [](const sim::AggregateQoS& a) { return a.formation_dispersion; }},
      {"formation_samples", [](const sim::AggregateQoS& a) { return static_cast<double>(a.formation_samples); }},
      {"bytes_uploaded", [](const sim::AggregateQoS& a) { return static_cast<double>(a.bytes_uploaded); }},
      {"bytes_downloaded", [](const sim::AggregateQoS& a) { return static_cast<double>(a.bytes_downloaded); }},
      {"seed_bytes_uploaded", [](const sim::AggregateQoS& a) { return static_cast<double>(a.seed_bytes_uploaded); }},
      {"blocks_transferred", [](const sim::AggregateQoS& a) { return static_cast<double>(a.blocks_transferred); }},
      {"events", [](const sim::AggregateQoS& a) { return static_cast<double>(a.events); }},
      {"end_time", [](const sim::AggregateQoS& a) { return a.end_time; }},
  };
  return all;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (runs.empty()) throw ConfigError("experiment has no [run:<label>] sections");
  if (repetitions < 1) throw ConfigError("experiment.repetitions must be at least 1");
  std::set<std::string> seen;
  for (const auto& r : runs) {
    if (r.label.empty()) throw ConfigError("run labels must not be empty");
    if (!seen.insert(r.label).second) throw ConfigError("duplicate run label '" + r.label + "'");
    r.config.validate();
  }
}

ExperimentSpec parse_experiment(std::string_view text, const std::string& base_dir) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("experiment line " + std::to_string(e.line()) + ": " + e.message());
  }

  ExperimentSpec spec;
  sim::SimConfig base;
  if (auto head = tree.get_child_optional(pt::ptree::path_type("experiment", '/'))) {
    for (const auto& [key, node] : *head) {
      const std::string value = node.get_value<std::string>();
      if (key == "repetitions") {
        auto n = text::parse_int<std::size_t>(value);
        if (!n) throw ConfigError("experiment.repetitions: expected a positive integer, got '" + value + "'");
        spec.repetitions = *n;
      } else if (key == "base_seed") {
        auto n = text::parse_int<std::uint64_t>(value);
        if (!n) throw ConfigError("experiment.base_seed: expected a non-negative integer, got '" + value + "'");
        spec.base_seed = *n;
      } else if (key == "output_dir") {
        spec.output_dir = resolve(value, base_dir);
      } else if (key == "config") {
        const auto path = resolve(value, base_dir);
        std::ifstream file(path);
        if (!file) throw ConfigError("experiment.config: cannot read '" + path + "'");
        std::stringstream buf;
        buf << file.rdbuf();
        config::apply_ini(base, buf.str(), fs::path(path).parent_path().string());
      } else {
        throw ConfigError("unknown experiment key '" + key + "'");
      }
    }
  }
  if (auto defaults = tree.get_child_optional(pt::ptree::path_type("defaults", '/')))
    apply_overrides(base, *defaults, base_dir);

  for (const auto& [name, section] : tree) {
    if (name == "experiment" || name == "defaults") continue;
    if (name.rfind("run:", 0) != 0) throw ConfigError("unknown experiment section '[" + name + "]'");
    LabelledConfig run{std::string(text::trim(std::string_view(name).substr(4))), base};
    apply_overrides(run.config, section, base_dir);
    spec.runs.push_back(std::move(run));
  }
  spec.validate();
  return spec;
}

std::uint64_t repetition_seed(std::uint64_t base_seed, std::size_t rep) { return derive_run_seed(base_seed, rep); }

Comparison compare(const ExperimentSpec& spec, std::size_t workers) {
  spec.validate();
  const std::size_t total = spec.runs.size() * spec.repetitions;
  std::vector<RunOutcome> outcomes(total);
  std::vector<std::exception_ptr> failures(total);
  for (std::size_t i = 0; i < total; ++i) {
    outcomes[i].label = spec.runs[i / spec.repetitions].label;
    outcomes[i].repetition = i % spec.repetitions;
    outcomes[i].seed = repetition_seed(spec.base_seed, outcomes[i].repetition);
  }

  // Each job writes only its own slot; results are read after the joins.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        sim::SimConfig cfg = spec.runs[i / spec.repetitions].config;
        cfg.seed = outcomes[i].seed;
        cfg.record_event_log = false;
        outcomes[i].report = sim::run(cfg).report;
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(total, 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < total; ++i) {
    if (!failures[i]) continue;
    const std::string where = "run '" + outcomes[i].label + "' seed " + std::to_string(outcomes[i].seed) + ": ";
    try {
      std::rethrow_exception(failures[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Internal, where + e.what());
    }
  }

  Comparison c;
  c.runs = std::move(outcomes);
  for (std::size_t l = 0; l < spec.runs.size(); ++l) {
    LabelSummary s;
    s.label = spec.runs[l].label;
    s.repetitions = spec.repetitions;
    s.policy = c.runs[l * spec.repetitions].report.policy;
    for (const auto& [name, get] : fields()) {
      double sum = 0.0;
      for (std::size_t r = 0; r < spec.repetitions; ++r) sum += get(c.runs[l * spec.repetitions + r].report.aggregate);
      const double n = static_cast<double>(spec.repetitions);
      const double mean = sum / n;
      double sq = 0.0;
      for (std::size_t r = 0; r < spec.repetitions; ++r) {
        const double dev = get(c.runs[l * spec.repetitions + r].report.aggregate) - mean;
        sq += dev * dev;
      }
      s.fields.push_back({name, mean, spec.repetitions > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0});
    }
    c.summary.push_back(std::move(s));
  }
  return c;
}

std::string to_json(const Comparison& c) {
  nlohmann::ordered_json j;
  auto labels = nlohmann::ordered_json::array();
  for (const auto& s : c.summary) {
    nlohmann::ordered_json row;
    row["label"] = s.label;
    row["policy"] = s.policy;
    row["repetitions"] = s.repetitions;
    for (const auto& f : s.fields) row[f.field] = {{"mean", f.mean}, {"stdev", f.stdev}};
    labels.push_back(std::move(row));
  }
  j["summary"] = std::move(labels);
  auto runs = nlohmann::ordered_json::array();
  for (const auto& r : c.runs) {
    nlohmann::ordered_json row;
    row["label"] = r.label;
    row["repetition"] = r.repetition;
    row["seed"] = r.seed;
    for (const auto& [name, get] : fields()) row[name] = get(r.report.aggregate);
    runs.push_back(std::move(row));
  }
  j["runs"] = std::move(runs);
  return j.dump(2);
}

std::string to_csv(const Comparison& c) {
  std::string out = "label,policy,repetitions";
  for (const auto& [name, get] : fields()) out += std::string(",") + name + "_mean," + name + "_stdev";
  out += '\n';
  for (const auto& s : c.summary) {
    out += s.label + "," + s.policy + "," + std::to_string(s.repetitions);
    for (const auto& f : s.fields) out += "," + text::format_double(f.mean) + "," + text::format_double(f.stdev);
    out += '\n';
  }
  return out;
}

}  // namespace vodswarm::experiment
