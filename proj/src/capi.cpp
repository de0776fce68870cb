#include "vodswarm.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "vodswarm/config.hpp"
#include "vodswarm/error.hpp"
#include "vodswarm/experiment.hpp"
#include "vodswarm/metrics.hpp"
#include "vodswarm/policies.hpp"
#include "vodswarm/sim.hpp"
#include "vodswarm/workload.hpp"

struct vs_workload {
  vodswarm::workload::Workload value;
};

struct vs_sim_config {
  vodswarm::sim::SimConfig value;
};

struct vs_sim_result {
  vodswarm::sim::RunResult value;
};

namespace {

thread_local std::string last_error;

vs_status fail(vs_status s, const std::string& message) {
  last_error = message;
  return s;
}

// Maps every exception to a status; nothing escapes the C boundary.
template <typename F>
vs_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return VS_OK;
  } catch (const vodswarm::Error& e) {
    return fail(static_cast<vs_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(VS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VS_ERR_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw vodswarm::ConfigError(std::string(what) + " must not be NULL");
}

vodswarm::workload::InteractivityProfile to_profile(vs_profile p) {
  switch (p) {
    case VS_PROFILE_HI: return vodswarm::workload::InteractivityProfile::HI;
    case VS_PROFILE_MI: return vodswarm::workload::InteractivityProfile::MI;
    case VS_PROFILE_LI: return vodswarm::workload::InteractivityProfile::LI;
  }
  throw vodswarm::ConfigError("unknown profile value");
}

}  // namespace

extern "C" {

const char* vs_last_error(void) { return last_error.c_str(); }

void vs_string_free(char* s) { std::free(s); }

const char* vs_version(void) { return "1.0.0"; }

const char* vs_policy_names(void) {
  static const std::string names = vodswarm::policies::policy_names();
  return names.c_str();
}

void vs_generator_config_default(vs_generator_config* cfg) {
  if (!cfg) return;
  const vodswarm::workload::GeneratorConfig d;
  cfg->profile = VS_PROFILE_HI;
  cfg->sessions = d.session_count;
  cfg->object_length = d.object_length;
  cfg->playback_rate = d.playback_rate;
  cfg->mean_session_gap = d.mean_session_gap;
  cfg->mean_think_time = d.mean_think_time;
  cfg->start_skew = d.start_skew;
  cfg->seed = d.seed;
}

vs_status vs_profile_parse(const char* name, vs_profile* out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    auto p = vodswarm::workload::parse_profile(name);
    if (!p) throw vodswarm::ConfigError("unknown profile '" + std::string(name) + "'; valid profiles: hi, mi, li");
    *out = *p == vodswarm::workload::InteractivityProfile::HI   ? VS_PROFILE_HI
           : *p == vodswarm::workload::InteractivityProfile::MI ? VS_PROFILE_MI
                                                                : VS_PROFILE_LI;
  });
}

vs_status vs_workload_generate(const vs_generator_config* cfg, vs_workload** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    vodswarm::workload::GeneratorConfig g;
    g.profile = to_profile(cfg->profile);
    g.session_count = cfg->sessions;
    g.object_length = cfg->object_length;
    g.playback_rate = cfg->playback_rate;
    g.mean_session_gap = cfg->mean_session_gap;
    g.mean_think_time = cfg->mean_think_time;
    g.start_skew = cfg->start_skew;
    g.seed = cfg->seed;
    *out = new vs_workload{vodswarm::workload::generate_workload(g)};
  });
}

vs_status vs_workload_parse(const char* text, double object_length, double window, vs_workload** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    vodswarm::workload::TraceDefaults d;
    if (object_length > 0) d.object_length = object_length;
    if (window > 0) d.observation_window = window;
    *out = new vs_workload{vodswarm::workload::parse_trace(text, d)};
  });
}

vs_status vs_workload_serialize(const vs_workload* w, char** out) {
  return guarded([&] {
    require(w, "workload");
    require(out, "out");
    *out = dup(vodswarm::workload::serialize_trace(w->value));
  });
}

size_t vs_workload_session_count(const vs_workload* w) { return w ? w->value.sessions.size() : 0; }

vs_status vs_workload_analyze(const vs_workload* w, double granularity, size_t top_k, int csv, char** out) {
  return guarded([&] {
    require(w, "workload");
    require(out, "out");
    auto a = vodswarm::metrics::analyze_workload(w->value, granularity, top_k);
    *out = dup(csv ? vodswarm::metrics::to_csv(a) : vodswarm::metrics::to_json(a));
  });
}

void vs_workload_free(vs_workload* w) { delete w; }

vs_status vs_sim_config_new(vs_sim_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new vs_sim_config{};
  });
}

vs_status vs_sim_config_apply_ini(vs_sim_config* cfg, const char* ini, const char* base_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(ini, "ini");
    vodswarm::config::apply_ini(cfg->value, ini, base_dir ? base_dir : "");
  });
}

vs_status vs_sim_config_set(vs_sim_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    vodswarm::config::set_option(cfg->value, key, value);
  });
}

vs_status vs_sim_config_validate(const vs_sim_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->value.validate();
  });
}

vs_status vs_sim_config_to_ini(const vs_sim_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup(vodswarm::config::to_ini(cfg->value));
  });
}

vs_status vs_sim_config_options(char** out) {
  return guarded([&] {
    require(out, "out");
    std::string text;
    for (const auto& o : vodswarm::config::options()) text += o.key + "\t" + o.flag + "\t" + o.help + "\n";
    *out = dup(text);
  });
}

void vs_sim_config_free(vs_sim_config* cfg) { delete cfg; }

vs_status vs_sim_run(const vs_sim_config* cfg, vs_sim_result** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = new vs_sim_result{vodswarm::sim::run(cfg->value)};
  });
}

vs_status vs_sim_result_report(const vs_sim_result* r, int csv, char** out) {
  return guarded([&] {
    require(r, "result");
    require(out, "out");
    *out = dup(csv ? vodswarm::sim::to_csv(r->value.report) : vodswarm::sim::to_json(r->value.report));
  });
}

vs_status vs_sim_result_event_log(const vs_sim_result* r, char** out) {
  return guarded([&] {
    require(r, "result");
    require(out, "out");
    *out = dup(r->value.event_log);
  });
}

void vs_sim_result_free(vs_sim_result* r) { delete r; }

vs_status vs_compare(const char* spec, const char* base_dir, const uint64_t* base_seed, size_t workers, char** json,
                     char** csv, char** output_dir) {
  char* json_out = nullptr;
  char* csv_out = nullptr;
  auto status = guarded([&] {
    require(spec, "spec");
    auto s = vodswarm::experiment::parse_experiment(spec, base_dir ? base_dir : "");
    if (base_seed) s.base_seed = *base_seed;
    auto c = vodswarm::experiment::compare(s, workers);
    if (json) json_out = dup(vodswarm::experiment::to_json(c));
    if (csv) csv_out = dup(vodswarm::experiment::to_csv(c));
    if (output_dir) *output_dir = dup(s.output_dir);
  });
  if (status != VS_OK) {
    std::free(json_out);
    std::free(csv_out);
    return status;
  }
  if (json) *json = json_out;
  if (csv) *csv = csv_out;
  return VS_OK;
}

}  // extern "C"
