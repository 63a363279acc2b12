#include "qsd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qsd {

namespace {

// Poisson mean per uniformization chunk; e^{-50} stays far from underflow.
constexpr double kMaxChunkMean = 50.0;

std::vector<double> poisson_weights(double mean, double tail_tol) {
  std::vector<double> w{std::exp(-mean)};
  double cum = w[0];
  const double cap = mean + 40.0 * std::sqrt(mean) + 60.0;
  for (double k = 1; cum < 1.0 - tail_tol && k <= cap; ++k) {
    w.push_back(w.back() * mean / k);
    cum += w.back();
  }
  return w;
}

double log_floor(const EngineOptions& o) { return std::log(o.underflow_floor); }

void require_window(const AbsorbedChain& chain, const Distribution& mu) {
  if (mu.n_states() != chain.n_states())
    throw DomainError("distribution window (" + std::to_string(mu.n_states()) +
                      " states) does not match the chain (" + std::to_string(chain.n_states()) +
                      " states)");
}

std::vector<double> as_vector(const Distribution& mu) {
  return {mu.weights().begin(), mu.weights().end()};
}

}  // namespace

Uniformizer::Uniformizer(const AbsorbedChain& chain, EngineOptions options)
    : options_(options), rate_(chain.max_exit_rate()) {
  const std::size_t n = chain.n_states();
  self_.assign(n, 1.0);
  row_start_.assign(n + 1, 0);
  for (State x = 1; x < n; ++x) {
    if (rate_ > 0) self_[x] = 1.0 + chain.diagonal(x) / rate_;
    for (const auto& t : chain.transitions(x)) {
      if (t.to == 0) continue;
      to_.push_back(t.to);
      scaled_.push_back(t.rate / rate_);
    }
    row_start_[x + 1] = to_.size();
  }
  self_[0] = 0.0;
}

template <bool Forward>
void Uniformizer::step(const std::vector<double>& in, std::vector<double>& out) const {
  const std::size_t n = self_.size();
  if constexpr (Forward) {
    for (std::size_t y = 0; y < n; ++y) out[y] = in[y] * self_[y];
    for (std::size_t x = 1; x < n; ++x) {
      const double vx = in[x];
      if (vx == 0.0) continue;
      for (std::size_t k = row_start_[x]; k < row_start_[x + 1]; ++k) out[to_[k]] += vx * scaled_[k];
    }
  } else {
    out[0] = 0.0;
    for (std::size_t x = 1; x < n; ++x) {
      double acc = in[x] * self_[x];
      for (std::size_t k = row_start_[x]; k < row_start_[x + 1]; ++k) acc += scaled_[k] * in[to_[k]];
      out[x] = acc;
    }
  }
}

template <bool Forward>
double Uniformizer::evolve(std::vector<double>& v, double t) const {
  if (!(t >= 0) || !std::isfinite(t)) throw DomainError("time must be finite and >= 0");
  if (v.size() != self_.size()) throw DomainError("vector does not match the chain window");
  v[0] = 0.0;

  auto renormalize = [&v]() {
    double norm = 0;
    if constexpr (Forward) {
      for (double a : v) norm += a;
    } else {
      for (double a : v) norm = std::max(norm, a);
    }
    if (!(norm > 0)) {
      std::fill(v.begin(), v.end(), 0.0);
      return -std::numeric_limits<double>::infinity();
    }
    for (auto& a : v) a /= norm;
    return std::log(norm);
  };

  double log_scale = renormalize();
  if (t == 0.0 || rate_ == 0.0 || !std::isfinite(log_scale)) return log_scale;

  const double total_mean = rate_ * t;
  const auto chunks = static_cast<std::size_t>(std::ceil(total_mean / kMaxChunkMean));
  const auto weights = poisson_weights(total_mean / static_cast<double>(chunks), options_.series_tol);

  std::vector<double> acc(v.size()), cur(v.size()), next(v.size());
  for (std::size_t c = 0; c < chunks; ++c) {
    cur = v;
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] = weights[0] * v[i];
    for (std::size_t k = 1; k < weights.size(); ++k) {
      step<Forward>(cur, next);
      std::swap(cur, next);
      const double w = weights[k];
      for (std::size_t i = 0; i < v.size(); ++i) acc[i] += w * cur[i];
    }
    std::swap(v, acc);
    log_scale += renormalize();
    if (!std::isfinite(log_scale)) return log_scale;
  }
  return log_scale;
}

double Uniformizer::forward(std::vector<double>& v, double t) const { return evolve<true>(v, t); }
double Uniformizer::backward(std::vector<double>& u, double t) const { return evolve<false>(u, t); }

std::vector<double> transition_operator(const AbsorbedChain& chain, double t,
                                        const Distribution& mu, EngineOptions options) {
  require_window(chain, mu);
  auto v = as_vector(mu);
  const double log_mass = Uniformizer(chain, options).forward(v, t);
  const double mass = std::exp(log_mass);
  for (auto& a : v) a *= mass;
  return v;
}

Survival survival_probability(const AbsorbedChain& chain, State x, double t,
                              EngineOptions options) {
  if (x == 0) throw DomainError("survival from the absorbing state 0 is undefined");
  if (x >= chain.n_states()) throw DomainError("state outside the chain window");
  auto v = as_vector(Distribution::dirac(x, chain.n_states()));
  const double log_mass = Uniformizer(chain, options).forward(v, t);
  return {std::exp(log_mass), chain.boundary() == Boundary::kill_at_top};
}

std::vector<double> survival_all(const AbsorbedChain& chain, double t, EngineOptions options) {
  std::vector<double> u(chain.n_states(), 1.0);
  u[0] = 0.0;
  const double scale = std::exp(Uniformizer(chain, options).backward(u, t));
  for (auto& a : u) a *= scale;
  return u;
}

Distribution conditional_distribution(const AbsorbedChain& chain, const Distribution& mu, double t,
                                      EngineOptions options) {
  require_window(chain, mu);
  auto v = as_vector(mu);
  const double log_mass = Uniformizer(chain, options).forward(v, t);
  if (!(log_mass >= log_floor(options)))
    throw NumericalError("conditioning event numerically null (survival mass below " +
                         std::to_string(options.underflow_floor) + ")");
  return Distribution(std::move(v));
}

Distribution conditional_propagator(const AbsorbedChain& chain, const Distribution& mu, double s,
                                    double t, double horizon, EngineOptions options) {
  require_window(chain, mu);
  if (!(0 <= s && s <= t && t <= horizon) || !std::isfinite(horizon))
    throw DomainError("conditional propagator needs 0 <= s <= t <= T");
  const Uniformizer uni(chain, options);
  const std::size_t n = chain.n_states();

  // Survival profiles up to a common constant; the constants cancel on normalization.
  std::vector<double> start_weight(n, 1.0), end_weight(n, 1.0);
  start_weight[0] = end_weight[0] = 0.0;
  uni.backward(start_weight, horizon - s);
  uni.backward(end_weight, horizon - t);

  std::vector<double> numerator(n, 0.0);
  for (State x = 1; x < n; ++x) {
    if (mu[x] == 0.0) continue;
    if (!(start_weight[x] >= options.underflow_floor))
      throw NumericalError("conditioning event numerically null from state " + std::to_string(x));
    numerator[x] = mu[x] / start_weight[x];
  }
  const double log_mass = uni.forward(numerator, t - s);
  if (!std::isfinite(log_mass)) throw NumericalError("conditioning event numerically null");
  double total = 0;
  for (State y = 1; y < n; ++y) total += (numerator[y] *= end_weight[y]);
  if (!(total >= options.underflow_floor)) throw NumericalError("conditioning event numerically null");
  return Distribution(std::move(numerator));
}

namespace {

void require_irreducible(const AbsorbedChain& chain) {
  const std::size_t n = chain.n_states();
  std::vector<std::vector<State>> reverse(n);
  bool absorbs = false;
  for (State x = 1; x < n; ++x) {
    if (chain.kill_rate(x) > 0) absorbs = true;
    for (const auto& t : chain.transitions(x)) {
      if (t.to == 0)
        absorbs = true;
      else
        reverse[t.to].push_back(x);
    }
  }
  if (!absorbs) throw NumericalError("never absorbed: no state has a positive rate into 0");

  auto reach_all = [&](auto&& neighbours) {
    std::vector<char> seen(n, 0);
    std::vector<State> stack{1};
    seen[1] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const State x = stack.back();
      stack.pop_back();
      neighbours(x, [&](State y) {
        if (y != 0 && !seen[y]) {
          seen[y] = 1;
          ++count;
          stack.push_back(y);
        }
      });
    }
    return count == n - 1;
  };
  const bool forward = reach_all([&](State x, auto&& visit) {
    for (const auto& t : chain.transitions(x)) visit(t.to);
  });
  const bool backward = reach_all([&](State x, auto&& visit) {
    for (State y : reverse[x]) visit(y);
  });
  if (!forward || !backward)
    throw NumericalError("irreducibility violated on the window {1.." + std::to_string(n - 1) + "}");
}

double absorption_rate_of(const AbsorbedChain& chain, const Distribution& rho) {
  double theta = 0;
  for (State x = 1; x < chain.n_states(); ++x)
    theta += rho[x] * (chain.absorption_rate(x) + chain.kill_rate(x));
  return theta;
}

double eigen_residual_of(const AbsorbedChain& chain, const Distribution& rho, double theta) {
  const std::size_t n = chain.n_states();
  std::vector<double> r(n, 0.0);
  for (State x = 1; x < n; ++x) {
    r[x] += rho[x] * (chain.diagonal(x) + theta);
    for (const auto& t : chain.transitions(x))
      if (t.to != 0) r[t.to] += rho[x] * t.rate;
  }
  double m = 0;
  for (State y = 1; y < n; ++y) m = std::max(m, std::abs(r[y]));
  return m;
}

}  // namespace

QsdResult compute_qsd(const AbsorbedChain& chain, QsdOptions options) {
  if (!(options.tol > 0)) throw DomainError("tolerance must be > 0");
  require_irreducible(chain);
  const Uniformizer uni(chain, options.engine);

  auto rho = as_vector(Distribution::uniform(chain.n_states()));
  std::vector<double> increments;
  double log_mass = 0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    auto next = rho;
    log_mass = uni.forward(next, 1.0);
    if (!(log_mass >= log_floor(options.engine)))
      throw NumericalError("conditioning event numerically null during QSD iteration");
    const double inc = tv_distance(next, rho);
    rho = std::move(next);
    increments.push_back(inc);

    // Keep iterating past tol until the geometric tail of the remaining
    // increments is an order of magnitude below it.
    const double ratio = std::isfinite(previous) && previous > 0 ? inc / previous : 1.0;
    const bool tail_small = ratio < 1.0 && inc * ratio / (1.0 - ratio) < 0.1 * options.tol;
    const bool at_floor = inc < 1e-15 || (ratio >= 1.0 && inc < 1e-3 * options.tol);
    previous = inc;
    if (inc < options.tol && (tail_small || at_floor)) {
      Distribution qsd(std::move(rho));
      const double theta = absorption_rate_of(chain, qsd);
      const double residual = eigen_residual_of(chain, qsd, theta);
      return QsdResult{qsd, theta, -log_mass, residual, inc, it, chain.n_states() - 1};
    }
  }
  std::ostringstream os;
  os << "QSD iteration did not converge in " << options.max_iters
     << " unit steps (last TV increment " << increments.back() << ")";
  throw ConvergenceError(os.str(), std::move(increments));
}

AutoWindowResult auto_window(const ChainBuilder& builder, double tol, std::size_t initial_states,
                             std::size_t max_states, QsdOptions options) {
  std::size_t n = std::max<std::size_t>(initial_states, 2);
  AbsorbedChain small = builder(n);
  QsdResult small_result = compute_qsd(small, options);
  std::vector<double> trace;
  while (2 * n <= max_states) {
    AbsorbedChain large = builder(2 * n);
    QsdResult large_result = compute_qsd(large, options);
    const double change = tv_distance(small_result.qsd.padded(2 * n), large_result.qsd);
    trace.push_back(change);
    if (change < tol) return {std::move(large), std::move(large_result)};
    n *= 2;
    small = std::move(large);
    small_result = std::move(large_result);
  }
  throw ConvergenceError("QSD did not stabilize under window doubling up to " +
                             std::to_string(max_states) + " states",
                         std::move(trace));
}

QsdCheck check_qsd(const AbsorbedChain& chain, const Distribution& rho,
                   std::span<const double> t_grid, double tol, EngineOptions options) {
  double worst = 0;
  for (double t : t_grid)
    worst = std::max(worst, tv_distance(conditional_distribution(chain, rho, t, options), rho));
  return {worst < tol, worst};
}

YaglomResult yaglom_limit(const AbsorbedChain& chain, const Distribution& mu,
                          YaglomOptions options) {
  require_window(chain, mu);
  if (!(options.ratio > 1.0) || !(options.first_time > 0))
    throw DomainError("yaglom grid needs first_time > 0 and ratio > 1");
  const Uniformizer uni(chain, options.engine);
  std::vector<double> times{0.0};
  std::vector<Distribution> laws{mu};
  std::vector<double> increments;
  double log_survival = 0;
  double t = 0;
  double next_t = options.first_time;
  while (true) {
    auto v = as_vector(laws.back());
    log_survival += uni.forward(v, next_t - t);
    if (!(log_survival >= log_floor(options.engine)))
      throw ConvergenceError("conditioning event numerically null before the Yaglom limit settled",
                             increments);
    Distribution law(std::move(v));
    const double inc = tv_distance(law, laws.back());
    increments.push_back(inc);
    times.push_back(next_t);
    laws.push_back(std::move(law));
    if (inc < options.tol) break;
    t = next_t;
    next_t *= options.ratio;
    if (next_t > options.max_time)
      throw ConvergenceError("Yaglom limit not reached by t = " + std::to_string(options.max_time) +
                                 " (window too small?)",
                             increments);
  }
  ConvergenceTrace trace;
  trace.times = times;
  for (const auto& law : laws) trace.tv_to_limit.push_back(tv_distance(law, laws.back()));
  return {laws.back(), std::move(trace)};
}

std::vector<DecayRow> decay_table(const AbsorbedChain& chain, const Distribution& mu,
                                  const Distribution& nu, const Distribution& rho,
                                  std::span<const double> times, EngineOptions options) {
  require_window(chain, mu);
  require_window(chain, nu);
  require_window(chain, rho);
  const Uniformizer uni(chain, options);
  auto a = as_vector(mu);
  auto b = as_vector(nu);
  double log_a = 0, log_b = 0, t = 0;
  std::vector<DecayRow> rows;
  for (double next : times) {
    if (next < t) throw DomainError("decay times must be non-decreasing");
    log_a += uni.forward(a, next - t);
    log_b += uni.forward(b, next - t);
    if (!(log_a >= log_floor(options)) || !(log_b >= log_floor(options)))
      throw NumericalError("conditioning event numerically null at t = " + std::to_string(next));
    t = next;
    rows.push_back({t, tv_distance(a, rho.weights()), tv_distance(b, rho.weights()),
                    tv_distance(a, b)});
  }
  return rows;
}

std::vector<double> geometric_grid(double t_max, double ratio, std::size_t count) {
  if (!(t_max > 0) || !(ratio > 1.0) || count == 0)
    throw DomainError("geometric grid needs t_max > 0, ratio > 1, count >= 1");
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i)
    grid[i] = t_max * std::pow(ratio, -static_cast<double>(count - 1 - i));
  return grid;
}

}  // namespace qsd
