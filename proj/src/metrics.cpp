#include "vodswarm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "text.hpp"
#include "vodswarm/error.hpp"

namespace vodswarm::metrics {

PopularityRecord::PopularityRecord(double granularity, std::size_t horizon)
    : granularity_(granularity), horizon_(horizon) {
  if (!(granularity > 0) || !std::isfinite(granularity))
    throw ConfigError("granularity must be positive");
}

Count PopularityRecord::at(std::size_t position) const {
  auto it = counts_.find(position);
  return it == counts_.end() ? 0 : it->second;
}

void PopularityRecord::add(std::size_t position, Count n) {
  if (position >= horizon_) throw InputError("position outside record horizon");
  if (n == 0) return;
  counts_[position] += n;
  total_ += n;
}

void PopularityRecord::add_interval(double start, double end) {
  auto bins = covered_bins(start, end, granularity_, horizon_);
  for (std::size_t p = bins.first; !bins.empty() && p <= bins.last; ++p) add(p);
}

BinRange covered_bins(double start, double end, double granularity, std::size_t horizon) {
  BinRange r;
  if (horizon == 0 || !(end > start)) return r;
  // first: smallest p with p*g >= start; last: largest p with p*g < end.
  double lo = std::ceil(start / granularity);
  if (lo < 0) lo = 0;
  auto first = static_cast<std::size_t>(lo);
  while (first > 0 && static_cast<double>(first - 1) * granularity >= start) --first;
  while (static_cast<double>(first) * granularity < start) ++first;
  auto last_plus = static_cast<std::size_t>(std::max(0.0, std::ceil(end / granularity)));
  while (last_plus > 0 && static_cast<double>(last_plus - 1) * granularity >= end) --last_plus;
  while (static_cast<double>(last_plus) * granularity < end) ++last_plus;
  if (last_plus == 0) return r;
  std::size_t last = std::min(last_plus - 1, horizon - 1);
  if (first > last) return r;
  r.first = first;
  r.last = last;
  return r;
}

PopularityRecord popularity(const workload::Workload& w, double granularity) {
  if (!(granularity > 0) || !std::isfinite(granularity))
    throw ConfigError("granularity must be positive");
  if (granularity > w.object_length) throw ConfigError("granularity exceeds object length");
  auto horizon = static_cast<std::size_t>(std::ceil(w.object_length / granularity));
  PopularityRecord rec(granularity, horizon);
  for (const auto& s : w.sessions)
    for (const auto& r : s.requests) rec.add_interval(r.start_pos, r.end_pos);
  return rec;
}

Count sharing_potential(const PopularityRecord& r) {
  // Never-requested positions are absent, so every stored term is Q_p - 1 >= 0.
  Count p = 0;
  for (const auto& [pos, q] : r.counts()) p += q - 1;
  return p;
}

double spatial_dispersion(const PopularityRecord& r) {
  const Count m = r.total();
  if (m == 0) throw InputError("spatial dispersion undefined for an empty record");
  const Count p = sharing_potential(r);
  // 1 - P/M evaluated as (M - P)/M so integer inputs give correctly rounded results.
  return static_cast<double>(m - p) / static_cast<double>(m);
}

TemporalDispersion temporal_dispersion(const workload::Workload& w) {
  if (!(w.object_length > 0)) throw InputError("object_length must be positive");
  if (!(w.observation_window > 0)) throw InputError("observation window must be positive");
  const auto requests = w.request_count();
  if (requests == 0) throw InputError("temporal dispersion undefined for an empty workload");
  TemporalDispersion t;
  t.request_rate = static_cast<double>(requests) / (w.observation_window / w.object_length);
  t.dispersion = 1.0 / t.request_rate;
  return t;
}

std::string_view to_string(DispersionCategory c) {
  switch (c) {
    case DispersionCategory::Low: return "low";
    case DispersionCategory::Intermediate: return "intermediate";
    case DispersionCategory::High: return "high";
  }
  return "high";
}

DispersionCategory categorize_dispersion(double d) {
  if (!(d > 0.0 && d <= 1.0)) throw InputError("dispersion outside (0, 1]");
  if (d < 0.1) return DispersionCategory::Low;
  if (d <= 0.5) return DispersionCategory::Intermediate;
  return DispersionCategory::High;
}

PopularityRecord merge_records(std::span<const PopularityRecord> records) {
  if (records.empty()) return {};
  PopularityRecord out(records.front().granularity(), records.front().horizon());
  for (const auto& r : records) {
    if (!r.same_shape(out)) throw InputError("cannot merge records of different granularity or horizon");
    for (const auto& [pos, q] : r.counts()) out.add(pos, q);
  }
  return out;
}

DispersionReport dispersion_report(const PopularityRecord& r, double request_rate) {
  DispersionReport rep;
  rep.request_rate = request_rate;
  rep.temporal_dispersion = request_rate > 0 ? 1.0 / request_rate : 0.0;
  rep.sharing_potential = sharing_potential(r);
  rep.retrieved = r.total();
  rep.spatial_dispersion = spatial_dispersion(r);
  rep.category = categorize_dispersion(rep.spatial_dispersion);
  return rep;
}

DispersionReport dispersion_report(const workload::Workload& w, double granularity) {
  return dispersion_report(popularity(w, granularity), temporal_dispersion(w).request_rate);
}

std::string to_json(const DispersionReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.request_rate;
  j["temporal_dispersion"] = r.temporal_dispersion;
  j["p"] = r.sharing_potential;
  j["m"] = r.retrieved;
  j["d"] = r.spatial_dispersion;
  j["category"] = std::string(to_string(r.category));
  return j.dump();
}

std::string to_json(const PopularityRecord& r) {
  nlohmann::ordered_json j;
  j["granularity"] = r.granularity();
  j["t"] = r.horizon();
  auto counts = nlohmann::ordered_json::array();
  for (const auto& [pos, q] : r.counts()) counts.push_back({pos, q});
  j["counts"] = std::move(counts);
  return j.dump();
}

PopularityRecord record_from_json(std::string_view json) {
  try {
    auto j = nlohmann::json::parse(json);
    PopularityRecord r(j.at("granularity").get<double>(), j.at("t").get<std::size_t>());
    for (const auto& pair : j.at("counts")) r.add(pair.at(0).get<std::size_t>(), pair.at(1).get<Count>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad popularity record: ") + e.what());
  }
}

WorkloadAnalysis analyze_workload(const workload::Workload& w, double granularity, std::size_t top_k) {
  WorkloadAnalysis a;
  const auto record = popularity(w, granularity);
  a.dispersion = dispersion_report(record, temporal_dispersion(w).request_rate);
  a.sessions = w.sessions.size();
  a.requests = w.request_count();
  for (const auto& s : w.sessions) {
    switch (workload::classify_session(s, w.object_length)) {
      case workload::InteractivityProfile::HI: ++a.hi_sessions; break;
      case workload::InteractivityProfile::MI: ++a.mi_sessions; break;
      case workload::InteractivityProfile::LI: ++a.li_sessions; break;
    }
  }
  for (const auto& [pos, q] : record.counts())
    a.top_positions.push_back({pos, static_cast<double>(pos) * granularity, q});
  std::stable_sort(a.top_positions.begin(), a.top_positions.end(),
                   [](const PositionCount& x, const PositionCount& y) { return x.count > y.count; });
  if (a.top_positions.size() > top_k) a.top_positions.resize(top_k);
  return a;
}

std::string to_json(const WorkloadAnalysis& a) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(to_json(a.dispersion));
  j["sessions"] = a.sessions;
  j["requests"] = a.requests;
  j["profiles"] = {{"hi", a.hi_sessions}, {"mi", a.mi_sessions}, {"li", a.li_sessions}};
  auto top = nlohmann::ordered_json::array();
  for (const auto& p : a.top_positions) top.push_back({{"position", p.position}, {"start", p.start}, {"count", p.count}});
  j["top_positions"] = std::move(top);
  return j.dump(2);
}

std::string to_csv(const WorkloadAnalysis& a) {
  const auto& d = a.dispersion;
  std::string out = "n,temporal_dispersion,p,m,d,category,sessions,requests,hi,mi,li,top_positions\n";
  out += text::format_double(d.request_rate) + "," + text::format_double(d.temporal_dispersion) + "," +
         std::to_string(d.sharing_potential) + "," + std::to_string(d.retrieved) + "," +
         text::format_double(d.spatial_dispersion) + "," + std::string(to_string(d.category)) + "," +
         std::to_string(a.sessions) + "," + std::to_string(a.requests) + "," + std::to_string(a.hi_sessions) + "," +
         std::to_string(a.mi_sessions) + "," + std::to_string(a.li_sessions) + ",";
  for (std::size_t i = 0; i < a.top_positions.size(); ++i)
    out += (i ? ";" : "") + std::to_string(a.top_positions[i].position) + ":" +
           std::to_string(a.top_positions[i].count);
  out += "\n";
  return out;
}

}  // namespace vodswarm::metrics
