#include "vodswarm/random.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vodswarm {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::exponential(double mean) {
  return -mean * std::log1p(-uniform());
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t run_index) {
  return mix_seed(base_seed ^ mix_seed(run_index));
}

std::uint64_t derive_stream_seed(std::uint64_t run_seed, std::uint64_t stream) {
  return mix_seed(run_seed + 0x632be59bd9b4e019ULL * (stream + 1));
}

}  // namespace vodswarm
