#pragma once

// Deterministic random streams.
//
// Every random quantity in a simulation is drawn from a stream whose seed is a
// pure function of (master seed, scenario key, replication, arm, purpose,
// index). Nothing depends on which worker thread runs a replication, so
// results are reproducible for any thread count.

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace acrt {

enum class Arm : std::uint8_t { Control = 0, Treatment = 1, Both = 2 };

enum class StreamPurpose : std::uint8_t {
  Latent = 1,       // cluster-level effects, drawn in cluster order
  Observation = 2,  // per-cluster subject outcomes
  PosteriorMC = 3,  // Monte-Carlo posterior probability draws
  Sampler = 4,      // Metropolis cross-check chains
  Scratch = 5,      // tests and ad-hoc tools
};

struct StreamId {
  std::uint64_t scenario_key = 0;
  std::uint64_t replication = 0;
  Arm arm = Arm::Both;
  StreamPurpose purpose = StreamPurpose::Scratch;
  std::uint64_t index = 0;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                           const StreamId& id) noexcept {
  std::uint64_t h = splitmix64(master_seed ^ 0x6A09E667F3BCC908ULL);
  h = splitmix64(h ^ id.scenario_key);
  h = splitmix64(h ^ id.replication);
  h = splitmix64(h ^ ((static_cast<std::uint64_t>(id.arm) << 8) |
                      static_cast<std::uint64_t>(id.purpose)));
  h = splitmix64(h ^ id.index);
  return h;
}

/// 64-bit FNV-1a. Used for fingerprints that must be stable across builds.
inline constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seedable generator satisfying UniformRandomBitGenerator, tagged with the
/// stream id it was derived from.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, const StreamId& id)
      : engine_(derive_seed(master_seed, id)), id_(id) {}

  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }

  double standard_normal() {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(engine_);
  }

  [[nodiscard]] const StreamId& id() const noexcept { return id_; }

 private:
  std::mt19937_64 engine_;
  StreamId id_{};
};

}  // namespace acrt
