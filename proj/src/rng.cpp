#include "rhdi/rng.hpp"

#include <boost/math/distributions/normal.hpp>

namespace rhdi {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_key(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> path) {
  std::uint64_t key = mix64(seed + kGolden);
  for (std::uint64_t id : path) {
    key = mix64(key ^ mix64(id + kGolden));
  }
  return key;
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> path)
    : key_(derive_key(seed, path)) {}

std::uint64_t CounterRng::next_u64() {
  return mix64(key_ + (++counter_) * kGolden);
}

double CounterRng::uniform01() {
  // 53-bit mantissa, shifted onto cell centers so 0 and 1 never occur.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  static const boost::math::normal_distribution<double> dist(0.0, 1.0);
  return boost::math::quantile(dist, uniform01());
}

std::uint64_t CounterRng::derive(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
  return derive_key(seed, path);
}

}  // namespace rhdi
