#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qsd/chain.hpp"
#include "qsd/distribution.hpp"

namespace qsd {

/// Counter-based generator: draw k of stream s under seed is a pure function of
/// (seed, s, k), so paths can be simulated in any order or on any thread.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);
  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Exponential with the given rate (> 0).
  double exponential(double rate);
  /// Uniform on {0, ..., n-1}, n >= 1.
  std::uint64_t below(std::uint64_t n);
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class PathOutcome : std::uint8_t {
  survived,  ///< still alive at the horizon (censored)
  absorbed,  ///< reached 0
  hit_set,   ///< entered the stop set
  killed,    ///< escaped past the top in kill mode
};

struct TrajectoryBatch {
  std::uint64_t seed = 0;
  std::size_t n_paths = 0;
  double horizon = 0;
  std::vector<State> end_states;  ///< 0 when absorbed
  std::vector<PathOutcome> outcomes;
  /// Stop time for absorbed, hit_set and killed paths; empty for survivors.
  std::vector<std::optional<double>> stop_times;
};

struct McOptions {
  unsigned threads = 1;
  /// Index of the first path, so that chunks of one logical batch can be
  /// simulated separately.
  std::uint64_t first_path = 0;
};

/// Exact-jump simulation of n_paths paths from mu up to `horizon` (may be
/// infinite). Path i uses stream first_path + i.
TrajectoryBatch simulate_batch(const AbsorbedChain& chain, const Distribution& mu, double horizon,
                               std::size_t n_paths, std::uint64_t seed,
                               const std::optional<StateSet>& stop_on_set = std::nullopt,
                               McOptions options = {});

struct ConditionalEstimate {
  Distribution law;
  double survival_fraction;
  std::size_t survivors;
};

/// Empirical law of the end states of surviving paths. Throws NumericalError
/// when no path survived.
ConditionalEstimate conditional_estimate(const TrajectoryBatch& batch, std::size_t n_states);

/// Survivor counts by end state, without storing paths.
struct SurvivorTally {
  std::vector<std::uint64_t> counts;  ///< indexed by state
  std::uint64_t n_paths = 0;
  std::uint64_t survivors = 0;
};

SurvivorTally tally_survivors(const AbsorbedChain& chain, const Distribution& mu, double horizon,
                              std::size_t n_paths, std::uint64_t seed, McOptions options = {});

ConditionalEstimate conditional_estimate(const SurvivorTally& tally);

/// Simulates chunks of `chunk` paths until at least `target_survivors` paths
/// survive to `horizon`; gives up after `max_paths`.
ConditionalEstimate sample_conditional(const AbsorbedChain& chain, const Distribution& mu,
                                       double horizon, std::size_t target_survivors,
                                       std::uint64_t seed, std::size_t chunk = 1'000'000,
                                       std::uint64_t max_paths = 4'000'000'000ULL,
                                       unsigned threads = 1);

struct ParticleEnsemble {
  double time = 0;
  std::vector<State> positions;
  std::uint64_t redraw_count = 0;
  std::size_t n_particles() const { return positions.size(); }
  /// Empirical law on the window {0..n_states-1}.
  Distribution empirical_law(std::size_t n_states) const;
};

/// Fleming-Viot system: n_particles copies of the chain started from mu; an
/// absorbed (or killed) particle jumps to the position of a uniformly chosen
/// other particle. Events are processed in time order, ties by particle index.
/// Returns one snapshot per sample time (sorted, <= horizon).
std::vector<ParticleEnsemble> fleming_viot(const AbsorbedChain& chain, const Distribution& mu,
                                           std::size_t n_particles, double horizon,
                                           std::uint64_t seed,
                                           std::span<const double> sample_times);

}  // namespace qsd
