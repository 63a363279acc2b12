#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsd/chain.hpp"
#include "qsd/distribution.hpp"
#include "qsd/error.hpp"

namespace qsd {

/// Iteration that ran out of budget; carries the TV increments it saw.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

struct EngineOptions {
  /// Poisson tail mass left out of each uniformization series.
  double series_tol = 1e-13;
  /// Survival mass below which conditioning is refused.
  double underflow_floor = 1e-300;
};

/// Action of e^{Qt} on the non-absorbed states by uniformization.
///
/// With L = max_x |Q(x,x)| and M = I + Q/L, e^{Qt} = sum_k Pois(Lt; k) M^k.
/// Long horizons are split into chunks with L*h <= 50 and the iterate is
/// rescaled after each chunk, so magnitudes are carried as (vector, log scale).
/// Vectors are indexed by state; slot 0 is ignored and left at zero.
class Uniformizer {
 public:
  explicit Uniformizer(const AbsorbedChain& chain, EngineOptions options = {});

  /// v <- v e^{Qt} (row vector). v is left with mass 1; returns the log of the
  /// mass it had before rescaling, or -inf if everything was absorbed.
  double forward(std::vector<double>& v, double t) const;

  /// u <- e^{Qt} u (column vector, u(0) = 0). u is left with max 1; returns the
  /// log of the factor removed, or -inf if u vanished.
  double backward(std::vector<double>& u, double t) const;

  double uniformization_rate() const { return rate_; }
  std::size_t n_states() const { return self_.size(); }

 private:
  template <bool Forward>
  double evolve(std::vector<double>& v, double t) const;
  template <bool Forward>
  void step(const std::vector<double>& in, std::vector<double>& out) const;

  EngineOptions options_;
  double rate_ = 0;
  std::vector<double> self_;  // 1 + Q(x,x)/L
  std::vector<std::size_t> row_start_;
  std::vector<State> to_;
  std::vector<double> scaled_;  // Q(x,y)/L for y >= 1
};

/// Restriction of mu e^{Qt} to {1..N}: a sub-probability vector indexed by state.
std::vector<double> transition_operator(const AbsorbedChain& chain, double t,
                                        const Distribution& mu, EngineOptions options = {});

struct Survival {
  double value;
  /// Kill mode also loses mass through the top, so the value is a lower bound.
  bool lower_bound;
};

/// P_x(t < T_0).
Survival survival_probability(const AbsorbedChain& chain, State x, double t,
                              EngineOptions options = {});

/// x -> P_x(t < T_0) for every state at once (slot 0 is 0).
std::vector<double> survival_all(const AbsorbedChain& chain, double t,
                                 EngineOptions options = {});

/// P_mu(X_t in . | t < T_0).
Distribution conditional_distribution(const AbsorbedChain& chain, const Distribution& mu,
                                      double t, EngineOptions options = {});

/// mu R^T_{s,t}, where R^T_{s,t} f(x) = E_x(f(X_{t-s}) | T - s < T_0).
///
/// Computed from the numerator measure x -> mu(x) / P_x(T-s < T_0), pushed
/// forward over t-s and weighted by P_y(T-t < T_0). For mu = delta_x and
/// s = 0, t = T this is P_x(X_T in . | T < T_0).
Distribution conditional_propagator(const AbsorbedChain& chain, const Distribution& mu, double s,
                                    double t, double horizon, EngineOptions options = {});

struct QsdOptions {
  double tol = 1e-10;
  std::size_t max_iters = 100000;
  EngineOptions engine{};
};

struct QsdResult {
  Distribution qsd;
  /// theta = sum_x rho(x) (Q(x,0) + kill(x)).
  double absorption_rate;
  /// -log P_rho(1 < T_0); equals absorption_rate at the fixed point.
  double decay_rate;
  /// max_y |(rho Q~)(y) + theta rho(y)| over the non-absorbed states.
  double eigen_residual;
  /// Last TV increment of the unit-time iteration.
  double tv_increment;
  std::size_t iterations;
  std::size_t truncation_n;
};

/// Fixed point of mu -> P_mu(X_1 in . | 1 < T_0), iterated from the uniform law.
/// Throws NumericalError on a reducible window or on non-convergence.
QsdResult compute_qsd(const AbsorbedChain& chain, QsdOptions options = {});

struct AutoWindowResult {
  AbsorbedChain chain;
  QsdResult result;
};

/// Doubles the window from `initial_states` until the QSD moves by less than
/// `tol` in total variation. The returned chain is the larger of the final pair.
AutoWindowResult auto_window(const ChainBuilder& builder, double tol,
                             std::size_t initial_states = 16, std::size_t max_states = 4096,
                             QsdOptions options = {});

struct QsdCheck {
  bool ok;
  double max_deviation;
};

QsdCheck check_qsd(const AbsorbedChain& chain, const Distribution& rho,
                   std::span<const double> t_grid, double tol, EngineOptions options = {});

struct ConvergenceTrace {
  std::vector<double> times;
  std::vector<double> tv_to_limit;
  std::vector<double> tv_between_pair;  ///< empty unless a pair was traced
};

struct YaglomOptions {
  double tol = 1e-10;
  double first_time = 0.25;
  double ratio = 1.5;
  double max_time = 1e4;
  EngineOptions engine{};
};

struct YaglomResult {
  Distribution limit;
  ConvergenceTrace trace;
};

/// lim_t P_mu(X_t in . | t < T_0) over a geometric time grid; stops once two
/// consecutive grid points are closer than tol in TV.
YaglomResult yaglom_limit(const AbsorbedChain& chain, const Distribution& mu,
                          YaglomOptions options = {});

struct DecayRow {
  double t;
  double tv_mu;    ///< |P_mu(X_t | .) - rho|
  double tv_nu;    ///< |P_nu(X_t | .) - rho|
  double tv_pair;  ///< |P_mu(X_t | .) - P_nu(X_t | .)|
};

/// Conditional laws from mu and nu on an increasing time grid.
std::vector<DecayRow> decay_table(const AbsorbedChain& chain, const Distribution& mu,
                                  const Distribution& nu, const Distribution& rho,
                                  std::span<const double> times, EngineOptions options = {});

/// t_max * ratio^-(count-1-i), i = 0..count-1: `count` points ending at t_max.
std::vector<double> geometric_grid(double t_max, double ratio, std::size_t count);

}  // namespace qsd
