#include "qsd/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <thread>

#include "qsd/error.hpp"

namespace qsd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr State killed_state = std::numeric_limits<State>::max();

/// Inverse-CDF sampling of the initial state.
class InitialLaw {
 public:
  explicit InitialLaw(const Distribution& mu) {
    double acc = 0;
    for (State x = 1; x < mu.n_states(); ++x) {
      if (mu[x] > 0) {
        acc += mu[x];
        cumulative_.push_back(acc);
        states_.push_back(x);
      }
    }
    for (auto& c : cumulative_) c /= acc;
  }
  State draw(CounterRng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto i = std::min<std::size_t>(it - cumulative_.begin(), states_.size() - 1);
    return states_[i];
  }

 private:
  std::vector<double> cumulative_;
  std::vector<State> states_;
};

/// Destination of a jump out of x, or killed_state for an escape past the top.
State choose_destination(const AbsorbedChain& chain, State x, CounterRng& rng) {
  const auto row = chain.transitions(x);
  double u = rng.uniform() * chain.exit_rate(x);
  for (const auto& t : row) {
    if (u < t.rate) return t.to;
    u -= t.rate;
  }
  if (chain.kill_rate(x) > 0 || row.empty()) return killed_state;
  return row.back().to;
}

struct PathResult {
  State end_state;
  PathOutcome outcome;
  double stop_time;
};

PathResult simulate_path(const AbsorbedChain& chain, const InitialLaw& init, double horizon,
                         const std::optional<StateSet>& stop, CounterRng& rng) {
  State x = init.draw(rng);
  double t = 0;
  if (stop && stop->contains(x)) return {x, PathOutcome::hit_set, 0.0};
  for (;;) {
    const double q = chain.exit_rate(x);
    if (q <= 0) return {x, PathOutcome::survived, 0.0};
    const double dt = rng.exponential(q);
    if (t + dt > horizon) return {x, PathOutcome::survived, 0.0};
    t += dt;
    const State next = choose_destination(chain, x, rng);
    if (next == killed_state) return {x, PathOutcome::killed, t};
    x = next;
    if (x == 0) return {0, PathOutcome::absorbed, t};
    if (stop && stop->contains(x)) return {x, PathOutcome::hit_set, t};
  }
}

void check_inputs(const AbsorbedChain& chain, const Distribution& mu, double horizon) {
  if (!(horizon >= 0)) throw DomainError("horizon must be >= 0");
  if (mu.n_states() != chain.n_states())
    throw DomainError("initial law and chain live on different windows");
}

/// Runs body(begin, end, worker) over contiguous blocks of [0, n).
void parallel_blocks(std::size_t n, unsigned threads,
                     const std::function<void(std::size_t, std::size_t, unsigned)>& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    body(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t block = (n + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t begin = std::min(n, w * block), end = std::min(n, begin + block);
    pool.emplace_back(body, begin, end, w);
  }
  for (auto& th : pool) th.join();
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

std::uint64_t CounterRng::next_u64() {
  return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * (counter_++) + 0x632BE59BD9B4E019ULL);
}

double CounterRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double CounterRng::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

std::uint64_t CounterRng::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection.
  for (;;) {
    const std::uint64_t x = next_u64();
    const unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    const auto low = static_cast<std::uint64_t>(m);
    if (low >= n || low >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
  }
}

TrajectoryBatch simulate_batch(const AbsorbedChain& chain, const Distribution& mu, double horizon,
                               std::size_t n_paths, std::uint64_t seed,
                               const std::optional<StateSet>& stop_on_set, McOptions options) {
  if (n_paths < 1) throw DomainError("n_paths must be >= 1");
  check_inputs(chain, mu, horizon);
  const InitialLaw init(mu);
  TrajectoryBatch batch;
  batch.seed = seed;
  batch.n_paths = n_paths;
  batch.horizon = horizon;
  batch.end_states.resize(n_paths);
  batch.outcomes.resize(n_paths);
  batch.stop_times.resize(n_paths);
  parallel_blocks(n_paths, options.threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(seed, options.first_path + i);
      const auto r = simulate_path(chain, init, horizon, stop_on_set, rng);
      batch.end_states[i] = r.end_state;
      batch.outcomes[i] = r.outcome;
      if (r.outcome != PathOutcome::survived) batch.stop_times[i] = r.stop_time;
    }
  });
  return batch;
}

ConditionalEstimate conditional_estimate(const TrajectoryBatch& batch, std::size_t n_states) {
  SurvivorTally tally;
  tally.counts.assign(n_states, 0);
  tally.n_paths = batch.n_paths;
  for (std::size_t i = 0; i < batch.n_paths; ++i) {
    if (batch.outcomes[i] != PathOutcome::survived) continue;
    if (batch.end_states[i] >= n_states) throw DomainError("end state outside the window");
    ++tally.counts[batch.end_states[i]];
    ++tally.survivors;
  }
  return conditional_estimate(tally);
}

ConditionalEstimate conditional_estimate(const SurvivorTally& tally) {
  if (tally.survivors == 0)
    throw NumericalError("conditioning event unobserved -- increase n_paths or lower horizon");
  std::vector<double> w(tally.counts.begin(), tally.counts.end());
  return {Distribution(std::move(w)),
          static_cast<double>(tally.survivors) / static_cast<double>(tally.n_paths),
          static_cast<std::size_t>(tally.survivors)};
}

SurvivorTally tally_survivors(const AbsorbedChain& chain, const Distribution& mu, double horizon,
                              std::size_t n_paths, std::uint64_t seed, McOptions options) {
  if (n_paths < 1) throw DomainError("n_paths must be >= 1");
  check_inputs(chain, mu, horizon);
  const InitialLaw init(mu);
  const unsigned workers = std::max(1u, options.threads);
  std::vector<SurvivorTally> partial(workers);
  for (auto& p : partial) p.counts.assign(chain.n_states(), 0);
  parallel_blocks(n_paths, workers, [&](std::size_t begin, std::size_t end, unsigned w) {
    auto& local = partial[w];
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(seed, options.first_path + i);
      const auto r = simulate_path(chain, init, horizon, std::nullopt, rng);
      if (r.outcome == PathOutcome::survived) {
        ++local.counts[r.end_state];
        ++local.survivors;
      }
    }
  });
  SurvivorTally total;
  total.counts.assign(chain.n_states(), 0);
  total.n_paths = n_paths;
  for (const auto& p : partial) {
    for (std::size_t x = 0; x < total.counts.size(); ++x) total.counts[x] += p.counts[x];
    total.survivors += p.survivors;
  }
  return total;
}

ConditionalEstimate sample_conditional(const AbsorbedChain& chain, const Distribution& mu,
                                       double horizon, std::size_t target_survivors,
                                       std::uint64_t seed, std::size_t chunk,
                                       std::uint64_t max_paths, unsigned threads) {
  if (target_survivors < 1 || chunk < 1) throw DomainError("target and chunk must be >= 1");
  SurvivorTally total;
  total.counts.assign(chain.n_states(), 0);
  while (total.survivors < target_survivors) {
    if (total.n_paths >= max_paths)
      throw NumericalError("survivor target not reached after " + std::to_string(total.n_paths) +
                           " paths");
    McOptions options{threads, total.n_paths};
    const auto part = tally_survivors(chain, mu, horizon, chunk, seed, options);
    for (std::size_t x = 0; x < total.counts.size(); ++x) total.counts[x] += part.counts[x];
    total.survivors += part.survivors;
    total.n_paths += part.n_paths;
  }
  return conditional_estimate(total);
}

Distribution ParticleEnsemble::empirical_law(std::size_t n_states) const {
  std::vector<double> w(n_states, 0.0);
  for (State x : positions) {
    if (x == 0 || x >= n_states) throw DomainError("particle outside the window");
    w[x] += 1.0;
  }
  return Distribution(std::move(w));
}

std::vector<ParticleEnsemble> fleming_viot(const AbsorbedChain& chain, const Distribution& mu,
                                           std::size_t n_particles, double horizon,
                                           std::uint64_t seed,
                                           std::span<const double> sample_times) {
  if (n_particles < 2) throw DomainError("Fleming-Viot needs at least two particles");
  check_inputs(chain, mu, horizon);
  std::vector<double> samples(sample_times.begin(), sample_times.end());
  std::sort(samples.begin(), samples.end());
  for (double s : samples)
    if (!(s >= 0) || s > horizon) throw DomainError("sample times must lie in [0, horizon]");

  const InitialLaw init(mu);
  std::vector<CounterRng> rngs;
  rngs.reserve(n_particles);
  ParticleEnsemble state;
  state.positions.resize(n_particles);
  for (std::size_t i = 0; i < n_particles; ++i) {
    rngs.emplace_back(seed, i);
    state.positions[i] = init.draw(rngs[i]);
  }

  using Event = std::pair<double, std::size_t>;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  const auto schedule = [&](std::size_t i, double now) {
    const double q = chain.exit_rate(state.positions[i]);
    if (q > 0) queue.emplace(now + rngs[i].exponential(q), i);
  };
  for (std::size_t i = 0; i < n_particles; ++i) schedule(i, 0.0);

  std::vector<ParticleEnsemble> snapshots;
  std::size_t next_sample = 0;
  const auto record_until = [&](double t) {
    while (next_sample < samples.size() && samples[next_sample] < t) {
      state.time = samples[next_sample++];
      snapshots.push_back(state);
    }
  };
  while (!queue.empty()) {
    const auto [t, i] = queue.top();
    if (t > horizon) break;
    queue.pop();
    record_until(t);
    State next = choose_destination(chain, state.positions[i], rngs[i]);
    if (next == 0 || next == killed_state) {
      std::size_t j = rngs[i].below(n_particles - 1);
      if (j >= i) ++j;
      next = state.positions[j];
      ++state.redraw_count;
    }
    state.positions[i] = next;
    schedule(i, t);
  }
  record_until(std::numeric_limits<double>::infinity());
  return snapshots;
}

}  // namespace qsd
