#pragma once

#include <cstdint>
#include <initializer_list>

namespace rhdi {

// Substream purposes. Streams are keyed by (seed, path...) so that
// replications and bootstrap draws can run in any order, on any number of
// threads, without changing a single drawn value.
namespace stream {
inline constexpr std::uint64_t kDesign = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kBootstrap = 3;
inline constexpr std::uint64_t kSplit = 4;
inline constexpr std::uint64_t kReplication = 5;
inline constexpr std::uint64_t kOracle = 6;
inline constexpr std::uint64_t kPsi = 7;
}  // namespace stream

// Counter-based generator: a SplitMix64 finalizer applied to
// key + counter * golden-ratio increment. The key is itself derived by
// mixing the (seed, path) tuple, so distinct paths give independent streams.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed,
                      std::initializer_list<std::uint64_t> path = {});

  std::uint64_t next_u64();

  // Uniform on the open interval (0,1).
  double uniform01();

  // Standard normal via the inverse CDF (no rejection, stream-stable).
  double normal();

  // Derives a child seed; used to give each replication its own seed.
  static std::uint64_t derive(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> path);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rhdi
