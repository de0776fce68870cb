// vodswarm command-line front end. Talks to the library only through vodswarm.h.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vodswarm.h"

namespace {

namespace fs = std::filesystem;

// Carries a vs_status out of a command.
struct Failure {
  int code;
  std::string message;
};

void check(vs_status s) {
  if (s != VS_OK) throw Failure{static_cast<int>(s), vs_last_error()};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { vs_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

using WorkloadPtr = std::unique_ptr<vs_workload, decltype(&vs_workload_free)>;
using ConfigPtr = std::unique_ptr<vs_sim_config, decltype(&vs_sim_config_free)>;
using ResultPtr = std::unique_ptr<vs_sim_result, decltype(&vs_sim_result_free)>;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{VS_ERR_INPUT, "cannot read '" + path + "'"};
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (out) out << content;
  if (!out) throw Failure{VS_ERR_USAGE, "cannot write '" + path + "'"};
}

// Reports end with a newline so they concatenate cleanly in a shell.
std::string terminated(std::string s) {
  if (!s.empty() && s.back() != '\n') s += '\n';
  return s;
}

// Writes to `path`, or stdout when it is empty.
void emit(const std::string& path, const std::string& content) {
  if (path.empty())
    std::cout << terminated(content);
  else
    write_file(path, terminated(content));
}

std::string parent_dir(const std::string& path) { return fs::path(path).parent_path().string(); }

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "base random seed");
  cmd->add_option("--out", c.out, "output path (default: stdout)");
  cmd->add_option("--format", c.format, "report format")->check(CLI::IsMember({"json", "csv"}));
}

struct GenerateArgs {
  Common common;
  std::string profile = "hi";
  std::size_t sessions = 0;
  std::optional<double> object_length, playback_rate, session_gap, think_time, start_skew;
};

int cmd_generate(const GenerateArgs& a) {
  vs_generator_config cfg;
  vs_generator_config_default(&cfg);
  check(vs_profile_parse(a.profile.c_str(), &cfg.profile));
  cfg.sessions = a.sessions;
  if (a.common.seed) cfg.seed = *a.common.seed;
  if (a.object_length) cfg.object_length = *a.object_length;
  if (a.playback_rate) cfg.playback_rate = *a.playback_rate;
  if (a.session_gap) cfg.mean_session_gap = *a.session_gap;
  if (a.think_time) cfg.mean_think_time = *a.think_time;
  if (a.start_skew) cfg.start_skew = *a.start_skew;

  vs_workload* raw = nullptr;
  check(vs_workload_generate(&cfg, &raw));
  WorkloadPtr w(raw, vs_workload_free);
  OwnedString trace, summary;
  check(vs_workload_serialize(w.get(), &trace.p));
  check(vs_workload_analyze(w.get(), 1.0, 10, a.common.format == "csv", &summary.p));
  if (a.common.out.empty()) {
    std::cout << trace.str();
    std::cerr << terminated(summary.str());
  } else {
    write_file(a.common.out, trace.str());
    std::cout << terminated(summary.str());
  }
  return 0;
}

struct AnalyzeArgs {
  Common common;
  std::string trace;
  double object_length = 0.0;
  double window = 0.0;
  double granularity = 1.0;
  std::size_t top_k = 10;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const std::string text = read_file(a.trace);
  vs_workload* raw = nullptr;
  check(vs_workload_parse(text.c_str(), a.object_length, a.window, &raw));
  WorkloadPtr w(raw, vs_workload_free);
  OwnedString report;
  check(vs_workload_analyze(w.get(), a.granularity, a.top_k, a.common.format == "csv", &report.p));
  emit(a.common.out, report.str());
  return 0;
}

struct SimulateArgs {
  Common common;
  std::string config;
  std::string event_log;
  std::vector<std::string> sets;
  bool print_config = false;
  // One slot per config key, in key order.
  std::vector<std::pair<std::string, std::optional<std::string>>> flags;
};

std::vector<std::vector<std::string>> config_options() {
  OwnedString text;
  check(vs_sim_config_options(&text.p));
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text.str());
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cols;
    std::istringstream fields(line);
    for (std::string col; std::getline(fields, col, '\t');) cols.push_back(col);
    if (cols.size() == 3) out.push_back(cols);
  }
  return out;
}

ConfigPtr build_config(const SimulateArgs& a) {
  vs_sim_config* raw = nullptr;
  check(vs_sim_config_new(&raw));
  ConfigPtr cfg(raw, vs_sim_config_free);
  if (!a.config.empty()) {
    const std::string text = read_file(a.config);
    check(vs_sim_config_apply_ini(cfg.get(), text.c_str(), parent_dir(a.config).c_str()));
  }
  // Flags override the file; --set overrides both.
  for (const auto& [key, value] : a.flags)
    if (value) check(vs_sim_config_set(cfg.get(), key.c_str(), value->c_str()));
  if (a.common.seed) check(vs_sim_config_set(cfg.get(), "run.seed", std::to_string(*a.common.seed).c_str()));
  if (!a.event_log.empty()) check(vs_sim_config_set(cfg.get(), "run.event_log", "true"));
  for (const auto& s : a.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw Failure{VS_ERR_USAGE, "--set expects key=value, got '" + s + "'"};
    check(vs_sim_config_set(cfg.get(), s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()));
  }
  return cfg;
}

int cmd_simulate(const SimulateArgs& a) {
  auto cfg = build_config(a);
  if (a.print_config) {
    OwnedString ini;
    check(vs_sim_config_to_ini(cfg.get(), &ini.p));
    emit(a.common.out, ini.str());
    return 0;
  }
  check(vs_sim_config_validate(cfg.get()));
  vs_sim_result* raw = nullptr;
  check(vs_sim_run(cfg.get(), &raw));
  ResultPtr result(raw, vs_sim_result_free);
  OwnedString report;
  check(vs_sim_result_report(result.get(), a.common.format == "csv", &report.p));
  emit(a.common.out, report.str());
  if (!a.event_log.empty()) {
    OwnedString log;
    check(vs_sim_result_event_log(result.get(), &log.p));
    write_file(a.event_log, log.str());
  }
  return 0;
}

struct CompareArgs {
  Common common;
  std::string spec;
  std::size_t workers = 0;
};

int cmd_compare(const CompareArgs& a) {
  const std::string text = read_file(a.spec);
  OwnedString json, csv, dir;
  const std::uint64_t* seed = a.common.seed ? &*a.common.seed : nullptr;
  check(vs_compare(text.c_str(), parent_dir(a.spec).c_str(), seed, a.workers, &json.p, &csv.p, &dir.p));
  // --out names a file for the chosen format; otherwise the experiment's output
  // directory receives both tables, falling back to stdout.
  const std::string chosen = terminated(a.common.format == "csv" ? csv.str() : json.str());
  if (!a.common.out.empty()) {
    write_file(a.common.out, chosen);
  } else if (!dir.str().empty()) {
    std::error_code ec;
    fs::create_directories(dir.str(), ec);
    if (ec) throw Failure{VS_ERR_USAGE, "cannot create '" + dir.str() + "': " + ec.message()};
    write_file((fs::path(dir.str()) / "comparison.json").string(), terminated(json.str()));
    write_file((fs::path(dir.str()) / "comparison.csv").string(), csv.str());
    std::cout << chosen;
  } else {
    std::cout << chosen;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive streaming swarm workloads, dispersion metrics and simulations"};
  app.set_version_flag("--version", vs_version());
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "generate a synthetic workload trace");
  add_common(g, gen.common);
  g->add_option("--profile", gen.profile, "interactivity profile: hi, mi or li");
  g->add_option("--sessions", gen.sessions, "number of sessions")->required();
  g->add_option("--object-len", gen.object_length, "object length in seconds");
  g->add_option("--playback-rate", gen.playback_rate, "playback rate in bytes/s");
  g->add_option("--mean-session-gap", gen.session_gap, "mean seconds between session starts");
  g->add_option("--mean-think-time", gen.think_time, "mean seconds between a session's requests");
  g->add_option("--start-skew", gen.start_skew, "start position decay per twentieth of the object");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "report dispersion and profiles of a trace");
  add_common(a, an.common);
  a->add_option("trace", an.trace, "trace file")->required();
  a->add_option("--object-len", an.object_length, "object length in seconds (overrides the trace)");
  a->add_option("--window", an.window, "observation window in seconds (overrides the trace)");
  a->add_option("--granularity", an.granularity, "position bin width in seconds");
  a->add_option("--top-k", an.top_k, "most requested positions to list");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "run one swarm simulation");
  add_common(s, sim.common);
  s->add_option("--config", sim.config, "INI config file");
  s->add_option("--event-log", sim.event_log, "write the event log here");
  s->add_option("--set", sim.sets, "override a config key: section.name=value");
  s->add_flag("--print-config", sim.print_config, "print the resolved config and exit");
  std::vector<std::vector<std::string>> options;
  try {
    options = config_options();
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  }
  sim.flags.reserve(options.size());
  for (const auto& o : options) {
    if (o[1] == "seed") continue;  // shared --seed
    sim.flags.emplace_back(o[0], std::nullopt);
    s->add_option("--" + o[1], sim.flags.back().second, o[2] + " [" + o[0] + "]");
  }

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "run an experiment spec and tabulate the results");
  add_common(c, cmp.common);
  c->add_option("spec", cmp.spec, "experiment spec file")->required();
  c->add_option("--workers", cmp.workers, "worker threads (0: all processors)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : VS_ERR_USAGE;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*a) return cmd_analyze(an);
    if (*s) return cmd_simulate(sim);
    if (*c) return cmd_compare(cmp);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return VS_ERR_INTERNAL;
  }
  return VS_ERR_USAGE;
}
