#pragma once

#include <optional>

#include "qsd/certifier.hpp"
#include "qsd/chain.hpp"

namespace qsd {

struct AbsorptionSup {
  double C;
  /// No state has a rate into 0; QSD theory is vacuous.
  bool never_absorbed;
};

/// C = max over the window of Q(x,0).
AbsorptionSup compute_absorption_sup(const AbsorbedChain& chain);

struct AlphaK {
  double alpha_K;
  State argmin;
  /// Infimum attained at the top of the window.
  bool edge_attained;
};

/// inf over y outside K u {0} of Q(y,0) + sum_{x in K} Q(y,x).
/// Throws DomainError when K covers the whole window.
AlphaK compute_alpha_K(const AbsorbedChain& chain, const StateSet& K);

/// Criterion report; the fields that a check does not touch keep their defaults.
struct CriterionReport {
  double C = 0;
  bool never_absorbed = false;
  double q_bar = 0;
  /// q_bar reached at the top of the window: the true supremum may be larger.
  bool q_bar_edge = false;
  double alpha_fm = 0;
  std::optional<StateSet> K;
  double alpha_K = 0;
  bool alpha_K_edge = false;
  bool theorem31_holds = false;
  bool fm_holds = false;
  std::optional<double> c4_bound;
  std::optional<double> lambda0;
};

/// alpha_K > C, with c4 <= alpha_K / (alpha_K - C) at lambda0 = C when it holds.
CriterionReport check_theorem31(const AbsorbedChain& chain, const StateSet& K);

/// alpha = sum_x inf_{y != x} Q(y,x) over the window (0 excluded on both
/// sides), q_bar = max_x sum_{y != x} Q(x,y); holds iff alpha > C.
CriterionReport check_ferrari_maric(const AbsorbedChain& chain);

/// Smallest prefix {1..k}, k <= k_max, with alpha_K > C.
std::optional<StateSet> find_minimal_K(const AbsorbedChain& chain, std::size_t k_max);

/// Certificate built from the criterion: lambda0 = C, c4 = alpha_K / (alpha_K - C),
/// c1 from the unconditional one-step infimum, c3 from the absorption bound and
/// c2 from the finite-K bounds. Throws DomainError "criterion not satisfied".
HypothesisCertificate derive_certificate_via_criterion(const AbsorbedChain& chain,
                                                      const StateSet& K, State x0,
                                                      EngineOptions options = {});

}  // namespace qsd
