#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace vodswarm {

// Seeded generator with distribution transforms written out by hand so that
// a given seed yields the same stream with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Exponential with the given mean.
  double exponential(double mean);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

// Seed for repetition `run_index` of an experiment rooted at `base_seed`.
std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t run_index);

// Seed for a named sub-stream of one run (workload, tracker, policy, ...).
std::uint64_t derive_stream_seed(std::uint64_t run_seed, std::uint64_t stream);

}  // namespace vodswarm
