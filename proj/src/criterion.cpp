#include "qsd/criterion.hpp"

#include <algorithm>
#include <limits>

namespace qsd {

AbsorptionSup compute_absorption_sup(const AbsorbedChain& chain) {
  double C = 0;
  for (State x = 1; x < chain.n_states(); ++x) C = std::max(C, chain.absorption_rate(x));
  return {C, C == 0};
}

AlphaK compute_alpha_K(const AbsorbedChain& chain, const StateSet& K) {
  if (K.empty()) throw DomainError("K must be non-empty");
  if (K.max() >= chain.n_states()) throw DomainError("K reaches outside the window");
  AlphaK out{std::numeric_limits<double>::infinity(), 0, false};
  for (State y = 1; y < chain.n_states(); ++y) {
    if (K.contains(y)) continue;
    double into = 0;
    for (const auto& t : chain.transitions(y))
      if (t.to == 0 || K.contains(t.to)) into += t.rate;
    if (into < out.alpha_K) {
      out.alpha_K = into;
      out.argmin = y;
    }
  }
  if (out.argmin == 0) throw DomainError("K covers the whole window: empty infimum");
  out.edge_attained = out.argmin == chain.top();
  return out;
}

CriterionReport check_theorem31(const AbsorbedChain& chain, const StateSet& K) {
  CriterionReport r;
  const auto sup = compute_absorption_sup(chain);
  r.C = sup.C;
  r.never_absorbed = sup.never_absorbed;
  const auto a = compute_alpha_K(chain, K);
  r.K = K;
  r.alpha_K = a.alpha_K;
  r.alpha_K_edge = a.edge_attained;
  r.theorem31_holds = a.alpha_K > sup.C;
  if (r.theorem31_holds) {
    r.c4_bound = a.alpha_K / (a.alpha_K - sup.C);
    r.lambda0 = sup.C;
  }
  return r;
}

CriterionReport check_ferrari_maric(const AbsorbedChain& chain) {
  CriterionReport r;
  const auto sup = compute_absorption_sup(chain);
  r.C = sup.C;
  r.never_absorbed = sup.never_absorbed;

  const std::size_t n = chain.n_states();
  // Column infima over y != x, both in {1..top}: zero unless every such y feeds x.
  std::vector<std::size_t> feeders(n, 0);
  std::vector<double> column_min(n, std::numeric_limits<double>::infinity());
  State q_arg = 1;
  for (State y = 1; y < n; ++y) {
    double out = 0;
    for (const auto& t : chain.transitions(y)) {
      out += t.rate;
      if (t.to == 0) continue;
      ++feeders[t.to];
      column_min[t.to] = std::min(column_min[t.to], t.rate);
    }
    out += chain.kill_rate(y);
    if (out > r.q_bar) {
      r.q_bar = out;
      q_arg = y;
    }
  }
  r.q_bar_edge = q_arg == chain.top() && n > 2;
  for (State x = 1; x < n; ++x)
    if (feeders[x] == n - 2) r.alpha_fm += column_min[x];
  r.fm_holds = r.alpha_fm > r.C;
  return r;
}

std::optional<StateSet> find_minimal_K(const AbsorbedChain& chain, std::size_t k_max) {
  if (k_max + 1 > chain.top()) throw DomainError("k_max must be at most N - 1");
  const double C = compute_absorption_sup(chain).C;
  for (State k = 1; k <= k_max; ++k) {
    const auto K = StateSet::prefix(k);
    if (compute_alpha_K(chain, K).alpha_K > C) return K;
  }
  return std::nullopt;
}

HypothesisCertificate derive_certificate_via_criterion(const AbsorbedChain& chain,
                                                      const StateSet& K, State x0,
                                                      EngineOptions options) {
  if (!K.contains(x0)) throw DomainError("x0 must belong to K");
  const auto report = check_theorem31(chain, K);
  if (!report.theorem31_holds)
    throw DomainError("criterion not satisfied: alpha_K = " + std::to_string(report.alpha_K) +
                      " <= C = " + std::to_string(report.C));

  const auto c1 = compute_c1(chain, x0, nullptr, options);
  if (c1.failed) throw CertificationError(1, "some state cannot reach x0 in unit time");
  C2Options c2_options;
  c2_options.engine = options;
  const auto c2 = compute_c2(chain, K, c2_options);
  const auto c3 = compute_c3_lambda0(chain, x0, K, C3Strategy::absorption_rate, nullptr, options);
  if (c3.failed) throw CertificationError(3, c3.note);

  const auto c4_provenance =
      report.alpha_K_edge ? Provenance::empirical_estimate : Provenance::certified_bound;
  auto cert = HypothesisCertificate::assemble(
      K, x0, {c1.unconditional_floor, Provenance::empirical_estimate},
      {c2.certified, Provenance::certified_bound}, {c3.c3, c3.provenance},
      {*report.c4_bound, c4_provenance}, {report.C, Provenance::certified_bound});
  cert.window_limited = true;
  cert.notes.push_back("c4 = alpha_K / (alpha_K - C) with alpha_K = " +
                       std::to_string(report.alpha_K));
  cert.notes.push_back("c1 is the unconditional one-step infimum");
  return cert;
}

}  // namespace qsd
