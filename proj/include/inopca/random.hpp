#pragma once

#include <cstdint>
#include <random>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace inopca {

/// Per-trial random stream.
///
/// Every trial owns one `Rng` derived from (master seed, trial index), so results do
/// not depend on how trials are scheduled across threads. Distributions come from
/// Boost.Random, whose algorithms (ziggurat normals) are fixed across platforms,
/// unlike the implementation-defined `std::normal_distribution`.
class Rng {
public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(make_engine(seed, 0, 0)) {}

  Rng(std::uint64_t master_seed, std::uint64_t stream) : engine_(make_engine(master_seed, stream, 1)) {}

  /// Independent stream for trial `trial_index` of a run seeded with `master_seed`.
  static Rng for_trial(std::uint64_t master_seed, std::uint64_t trial_index) {
    return Rng(master_seed, trial_index);
  }

  double normal() { return normal_(engine_); }
  double uniform01() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  double exponential() { return exponential_(engine_); }
  bool bernoulli(double prob) { return uniform_(engine_) < prob; }

  engine_type& engine() noexcept { return engine_; }

private:
  static engine_type make_engine(std::uint64_t seed, std::uint64_t stream, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), tag};
    return engine_type(seq);
  }

  engine_type engine_;
  boost::random::normal_distribution<double> normal_;
  boost::random::uniform_01<double> uniform_;
  boost::random::exponential_distribution<double> exponential_;
};

} // namespace inopca
