#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "qsd/certifier.hpp"
#include "qsd/chain.hpp"

namespace qsd {

/// Stands for x = infinity in tail_expected_hitting.
inline constexpr State infinity_state = std::numeric_limits<State>::max();

/// log alpha_j = sum_{i<j} log b_i - sum_{i<=j} log delta_i, indexed by j (slot 0 unused).
std::vector<double> log_alpha_coeffs(const BirthDeathSpec& spec, std::size_t j_max);

/// alpha_j = prod_{i<j} b_i / prod_{i<=j} delta_i for j = 1..j_max (slot 0 is 0).
std::vector<double> alpha_coeffs(const BirthDeathSpec& spec, std::size_t j_max);

/// E_x(T_z) = sum_{k=z+1}^{x} (1 / (delta_k alpha_k)) sum_{l>=k} alpha_l for x > z >= 1.
/// With x = infinity_state the supremum over x is returned. Throws
/// NumericalError when an inner tail does not converge.
double tail_expected_hitting(const BirthDeathSpec& spec, State z, State x);

/// S = sup_x E_x(T_1).
double tail_series_S(const BirthDeathSpec& spec);

struct ExpMoment {
  /// h(x) = E_x(exp(lambda T_z)) for x = 0..x_max; 1 for x <= z.
  std::vector<double> h;
  double sup;
  /// sup at x_max, 2 x_max, 4 x_max settled (geometrically or within 1e-8).
  bool stabilized;
  /// Geometric extrapolation of the sup in x_max.
  double extrapolated_sup;
};

/// Solves lambda h(x) + b_x (h(x+1) - h(x)) + delta_x (h(x-1) - h(x)) = 0 on
/// z < x <= x_max with h(z) = 1 and no birth out of x_max. Throws
/// NumericalError "moment diverges" when the solution loses positivity.
ExpMoment exp_moment_hitting(const BirthDeathSpec& spec, State z, double lambda,
                             std::size_t x_max = std::size_t{1} << 14);

/// Smallest z <= z_max whose moment at lambda0 is finite and stabilized.
std::optional<State> find_z0(const BirthDeathSpec& spec, double lambda0, State z_max = 50,
                             std::size_t x_max = std::size_t{1} << 14);

struct BdHittingReport {
  std::vector<double> alpha;  ///< indexed by j, slot 0 unused
  double tail_series_S;
  std::optional<State> z0;
  double lambda0;
  /// Empty when no z0 was found.
  std::optional<double> exp_moment_sup;
  /// (x, E_x(T_z0), h(x)) for x = z0+1 .. table_max
  struct Row {
    State x;
    double expected_hitting;
    double exp_moment;
  };
  std::vector<Row> table;
};

BdHittingReport bd_report(const BirthDeathSpec& spec, double lambda0, std::size_t j_max = 30,
                          State z_max = 50, State table_max = 30);

struct LogisticCertificateOptions {
  double window_tol = 1e-10;
  /// Lower limit on the window, so that high starting states are represented.
  std::size_t min_states = 64;
  State z_max = 50;
  std::size_t x_max = std::size_t{1} << 14;
  EngineOptions engine{};
};

struct LogisticCertificate {
  HypothesisCertificate certificate;
  /// Window on which c1 and c2 were evaluated.
  AbsorbedChain chain;
  State z0;
  QsdResult qsd;
};

/// x0 = 1, lambda0 = b + d, c3 = 1, K = {1..z0}. c1 is extrapolated from three
/// window sizes and c4 takes the larger of the window solve and the extrapolated
/// birth-death supremum; both are empirical.
LogisticCertificate logistic_certificate(double b, double d, double c,
                                         LogisticCertificateOptions options = {});

}  // namespace qsd
