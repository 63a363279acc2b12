#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsd/chain.hpp"
#include "qsd/engine.hpp"
#include "qsd/error.hpp"

namespace qsd {

/// Whether a constant is a proven bound (on the window) or a numerical scan.
enum class Provenance { certified_bound, empirical_estimate };

std::string to_string(Provenance p);

/// One of the four hypothesis parts could not be established.
class CertificationError : public NumericalError {
 public:
  CertificationError(int part, const std::string& what)
      : NumericalError("hypothesis part " + std::to_string(part) + ": " + what), part_(part) {}
  int part() const { return part_; }

 private:
  int part_;
};

struct Constant {
  double value;
  Provenance provenance;
};

/// Constants (K, x0, c1..c4, lambda0) of the return-from-infinity hypothesis
/// and the mixing rate gamma = c1 c2 c3 / (2 c4) they imply.
struct HypothesisCertificate {
  StateSet K;
  State x0 = 1;
  Constant c1{};
  Constant c2{};
  Constant c3{};
  Constant c4{};
  Constant lambda0{};
  double gamma = 0;
  /// Some supremum or infimum over states was only scanned on a finite window.
  bool window_limited = false;
  std::vector<std::string> notes;

  /// Validates the invariants (c1, c2, c3 in (0, 1], c4 >= 1, lambda0 > 0,
  /// x0 in K) and computes gamma. Throws ValidationError otherwise.
  static HypothesisCertificate assemble(StateSet K, State x0, Constant c1, Constant c2,
                                        Constant c3, Constant c4, Constant lambda0);

  /// certified_bound only if every constant is.
  Provenance provenance() const;
  /// 2 (1 - gamma)^floor(t)
  double bound(double t) const;
};

struct C1Result {
  double c1;
  Provenance provenance;
  /// Some state cannot reach x0 in unit time: the part fails on this window.
  bool failed;
  /// min_x P_x(X_1 = x0), a lower bound for c1.
  double unconditional_floor;
  State argmin;
  /// Minimum attained at the top of the window.
  bool edge_attained;
};

/// c1 = min_x P_x(X_1 = x0 | 1 < T_0) over the window. When `doubled` (the same
/// model on a larger window) is given and the minimum is interior and unchanged
/// there, the value is tagged certified for the window.
C1Result compute_c1(const AbsorbedChain& chain, State x0, const AbsorbedChain* doubled = nullptr,
                    EngineOptions options = {});

struct C2Options {
  double t_max = 20.0;
  double grid_ratio = 1.5;
  std::size_t grid_count = 40;
  EngineOptions engine{};
};

struct C2Result {
  double certified;
  double empirical;
  /// min_{x', x'' in K} P_{x'}(X_1 = x''), the bound for t >= 1.
  double one_step_bound;
  /// exp(-max_{x in K} |Q(x,x)|), the sojourn bound for t <= 1.
  double sojourn_bound;
};

/// Ratio min_K / max_K of survival probabilities: scanned on a geometric grid
/// (empirical) and bounded analytically (certified).
C2Result compute_c2(const AbsorbedChain& chain, const StateSet& K, C2Options options = {});

enum class C3Strategy { sojourn, absorption_rate, best };

std::string to_string(C3Strategy s);

struct C4Result {
  double c4;
  Provenance provenance;
  /// h(x) = E_x(exp(lambda0 T_K ^ T_0)), indexed by state; 1 on K and at 0.
  std::vector<double> h;
  State argmax;
  /// Supremum attained at the top of the window (reflect boundary row).
  bool edge_attained;
};

struct C3Result {
  double c3;
  double lambda0;
  Provenance provenance;
  C3Strategy used;
  bool failed;
  /// Filled by the `best` strategy, which has to evaluate c4 anyway.
  std::optional<C4Result> c4;
  std::string note;
};

/// c3 and lambda0 with P_x0(X_t in K) >= c3 exp(-lambda0 t).
///
/// sojourn: lambda0 = |Q(x0,x0)|, c3 = 1.
/// absorption_rate: lambda0 = C = sup_x Q(x,0) and
///   c3 = min(p e^C, min(1, e^{-(|Q(x0,x0)| - C)})), p = inf_y P_y(X_1 = x0);
///   the first term covers t >= 1, the second the holding time on t < 1.
/// best: the candidate with the larger c3 / c4(lambda0); ties go to sojourn.
C3Result compute_c3_lambda0(const AbsorbedChain& chain, State x0, const StateSet& K,
                            C3Strategy strategy, const AbsorbedChain* doubled = nullptr,
                            EngineOptions options = {});

/// c4 = max(1, sup_x E_x(exp(lambda0 T_K ^ T_0))) from the first-passage system
/// lambda0 h + Q h = 0 off K u {0}, h = 1 on K u {0}, solved by sparse LU on
/// the conservative (reflecting) rates. Throws NumericalError when the moment
/// diverges at lambda0.
C4Result compute_c4(const AbsorbedChain& chain, const StateSet& K, double lambda0,
                    const AbsorbedChain* doubled = nullptr);

struct CertifyOptions {
  C3Strategy strategy = C3Strategy::best;
  C2Options c2{};
  /// Same model on a doubled window, used for stability checks.
  const AbsorbedChain* doubled = nullptr;
  EngineOptions engine{};
};

/// Throws CertificationError naming the part that failed.
HypothesisCertificate certify(const AbsorbedChain& chain, const StateSet& K, State x0,
                              CertifyOptions options = {});

struct RatioCheck {
  bool ok;
  double worst_margin;
  double worst_t;
};

/// P_x0(t < T_0) >= (c2 c3 / (2 c4)) max_x P_x(t < T_0) - 1e-9 on every grid time.
RatioCheck check_ratio_inequality(const AbsorbedChain& chain, const HypothesisCertificate& cert,
                                  std::span<const double> t_grid, EngineOptions options = {});

}  // namespace qsd
