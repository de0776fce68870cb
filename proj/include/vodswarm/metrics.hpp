#pragma once

// Position popularity and dispersion measures over interactive workloads.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vodswarm/workload.hpp"

namespace vodswarm::metrics {

using Count = std::uint64_t;

// Sparse per-position request counts Q_p over `horizon` bins of
// `granularity` seconds. Absent positions have count 0.
class PopularityRecord {
 public:
  PopularityRecord() = default;
  PopularityRecord(double granularity, std::size_t horizon);

  double granularity() const { return granularity_; }
  std::size_t horizon() const { return horizon_; }
  const std::map<std::size_t, Count>& counts() const { return counts_; }

  Count at(std::size_t position) const;
  void add(std::size_t position, Count n = 1);
  void add_interval(double start, double end);

  // M: total retrieved mass.
  Count total() const { return total_; }
  // Number of positions with Q_p >= 1.
  std::size_t distinct() const { return counts_.size(); }
  bool empty() const { return total_ == 0; }

  bool same_shape(const PopularityRecord& other) const {
    return granularity_ == other.granularity_ && horizon_ == other.horizon_;
  }

  friend bool operator==(const PopularityRecord&, const PopularityRecord&) = default;

 private:
  double granularity_ = 1.0;
  std::size_t horizon_ = 0;
  std::map<std::size_t, Count> counts_;
  Count total_ = 0;
};

// Bins covered by [start, end): those whose start instant lies inside.
// Returns an empty range (first > last) when nothing is covered.
struct BinRange {
  std::size_t first = 1;
  std::size_t last = 0;
  bool empty() const { return first > last; }
};
BinRange covered_bins(double start, double end, double granularity, std::size_t horizon);

PopularityRecord popularity(const workload::Workload& w, double granularity);

// P = sum over p of max(Q_p - 1, 0).
Count sharing_potential(const PopularityRecord& r);

// D = 1 - P/M. Throws InputError when M = 0.
double spatial_dispersion(const PopularityRecord& r);

struct TemporalDispersion {
  double request_rate = 0.0;  // N, requests per object duration
  double dispersion = 0.0;    // 1/N
};
TemporalDispersion temporal_dispersion(const workload::Workload& w);

enum class DispersionCategory { Low, Intermediate, High };
std::string_view to_string(DispersionCategory c);

// Low below 0.1, Intermediate on [0.1, 0.5], High above. D must be in (0, 1].
DispersionCategory categorize_dispersion(double d);

// Pointwise sum. All records must share granularity and horizon; an empty
// input yields an empty default record.
PopularityRecord merge_records(std::span<const PopularityRecord> records);

struct DispersionReport {
  double request_rate = 0.0;
  double temporal_dispersion = 0.0;
  Count sharing_potential = 0;
  Count retrieved = 0;
  double spatial_dispersion = 0.0;
  DispersionCategory category = DispersionCategory::High;
};

DispersionReport dispersion_report(const PopularityRecord& r, double request_rate);
DispersionReport dispersion_report(const workload::Workload& w, double granularity);

// Flat JSON object: n, temporal_dispersion, p, m, d, category.
std::string to_json(const DispersionReport& r);
// {"granularity":..,"t":..,"counts":[[index,count],...]}
std::string to_json(const PopularityRecord& r);
PopularityRecord record_from_json(std::string_view json);

struct PositionCount {
  std::size_t position = 0;
  double start = 0.0;  // seconds
  Count count = 0;
};

// Whole-trace summary.
struct WorkloadAnalysis {
  DispersionReport dispersion;
  std::size_t sessions = 0;
  std::size_t requests = 0;
  std::size_t hi_sessions = 0;
  std::size_t mi_sessions = 0;
  std::size_t li_sessions = 0;
  std::vector<PositionCount> top_positions;  // by count, then position
};

WorkloadAnalysis analyze_workload(const workload::Workload& w, double granularity, std::size_t top_k);
std::string to_json(const WorkloadAnalysis& a);
// Header plus one row; top positions as "position:count" joined by ';'.
std::string to_csv(const WorkloadAnalysis& a);

}  // namespace vodswarm::metrics
