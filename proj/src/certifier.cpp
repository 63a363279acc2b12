#include "qsd/certifier.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

namespace qsd {

std::string to_string(Provenance p) {
  return p == Provenance::certified_bound ? "certified" : "empirical";
}

std::string to_string(C3Strategy s) {
  switch (s) {
    case C3Strategy::sojourn: return "sojourn";
    case C3Strategy::absorption_rate: return "absorption_rate";
    case C3Strategy::best: return "best";
  }
  return "?";
}

HypothesisCertificate HypothesisCertificate::assemble(StateSet K, State x0, Constant c1,
                                                      Constant c2, Constant c3, Constant c4,
                                                      Constant lambda0) {
  auto in_unit = [](double v) { return v > 0 && v <= 1; };
  if (!K.contains(x0)) throw ValidationError("x0 must belong to K");
  if (!in_unit(c1.value)) throw ValidationError("c1 must lie in (0, 1]");
  if (!in_unit(c2.value)) throw ValidationError("c2 must lie in (0, 1]");
  if (!in_unit(c3.value)) throw ValidationError("c3 must lie in (0, 1]");
  if (!(c4.value >= 1) || !std::isfinite(c4.value)) throw ValidationError("c4 must be finite and >= 1");
  if (!(lambda0.value > 0) || !std::isfinite(lambda0.value))
    throw ValidationError("lambda0 must be finite and > 0");
  HypothesisCertificate cert;
  cert.K = std::move(K);
  cert.x0 = x0;
  cert.c1 = c1;
  cert.c2 = c2;
  cert.c3 = c3;
  cert.c4 = c4;
  cert.lambda0 = lambda0;
  cert.gamma = c1.value * c2.value * c3.value / (2.0 * c4.value);
  return cert;
}

Provenance HypothesisCertificate::provenance() const {
  for (const auto* c : {&c1, &c2, &c3, &c4, &lambda0})
    if (c->provenance != Provenance::certified_bound) return Provenance::empirical_estimate;
  return Provenance::certified_bound;
}

double HypothesisCertificate::bound(double t) const {
  return 2.0 * std::pow(1.0 - gamma, std::floor(t));
}

namespace {

bool same_value(double a, double b) { return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)); }

void require_in_window(const AbsorbedChain& chain, State x, const char* what) {
  if (x == 0 || x >= chain.n_states())
    throw DomainError(std::string(what) + " must be a non-absorbed state of the window");
}

void require_in_window(const AbsorbedChain& chain, const StateSet& K) {
  if (K.empty()) throw DomainError("K must be non-empty");
  if (K.max() >= chain.n_states()) throw DomainError("K reaches outside the window");
}

/// x -> P_x(X_t = target), absolute.
std::vector<double> hit_probabilities(const Uniformizer& uni, State target, double t) {
  std::vector<double> u(uni.n_states(), 0.0);
  u[target] = 1.0;
  const double scale = std::exp(uni.backward(u, t));
  for (auto& a : u) a *= scale;
  return u;
}

struct Extremum {
  double value;
  State at;
};

/// Smallest state whose value is within relative 1e-12 of the minimum.
Extremum min_over_states(const std::vector<double>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t x = 1; x < v.size(); ++x) m = std::min(m, v[x]);
  for (std::size_t x = 1; x < v.size(); ++x)
    if (v[x] <= m + 1e-12 * std::abs(m)) return {m, x};
  return {m, 1};
}

Extremum max_over_states(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 1; x < v.size(); ++x) m = std::max(m, v[x]);
  for (std::size_t x = 1; x < v.size(); ++x)
    if (v[x] >= m - 1e-12 * std::abs(m)) return {m, x};
  return {m, 1};
}

double absorption_sup(const AbsorbedChain& chain) {
  double c = 0;
  for (State x = 1; x < chain.n_states(); ++x)
    c = std::max(c, chain.absorption_rate(x) + chain.kill_rate(x));
  return c;
}

}  // namespace

C1Result compute_c1(const AbsorbedChain& chain, State x0, const AbsorbedChain* doubled,
                    EngineOptions options) {
  require_in_window(chain, x0, "x0");
  const Uniformizer uni(chain, options);
  const auto to_x0 = hit_probabilities(uni, x0, 1.0);
  auto survive = std::vector<double>(chain.n_states(), 1.0);
  survive[0] = 0.0;
  const double scale = std::exp(uni.backward(survive, 1.0));
  for (auto& a : survive) a *= scale;

  std::vector<double> ratio(chain.n_states(), 0.0);
  for (State x = 1; x < chain.n_states(); ++x) ratio[x] = survive[x] > 0 ? to_x0[x] / survive[x] : 0;
  const auto floor = min_over_states(to_x0);
  const auto best = min_over_states(ratio);

  C1Result r{best.value, Provenance::empirical_estimate, false, floor.value, best.at,
             best.at == chain.top()};
  if (!(floor.value > 0)) {
    r.c1 = 0;
    r.failed = true;
    return r;
  }
  if (doubled && !r.edge_attained) {
    const auto wide = compute_c1(*doubled, x0, nullptr, options);
    if (!wide.failed && same_value(wide.c1, r.c1)) r.provenance = Provenance::certified_bound;
  }
  return r;
}

C2Result compute_c2(const AbsorbedChain& chain, const StateSet& K, C2Options options) {
  require_in_window(chain, K);
  const Uniformizer uni(chain, options.engine);

  double empirical = 1.0;
  if (K.size() > 1) {
    std::vector<double> u(chain.n_states(), 1.0);
    u[0] = 0.0;
    double t = 0;
    for (double next : geometric_grid(options.t_max, options.grid_ratio, options.grid_count)) {
      uni.backward(u, next - t);
      t = next;
      double lo = std::numeric_limits<double>::infinity(), hi = 0;
      for (State x : K) {
        lo = std::min(lo, u[x]);
        hi = std::max(hi, u[x]);
      }
      empirical = std::min(empirical, hi > 0 ? lo / hi : 0.0);
    }
  }

  double one_step = 1.0;
  double max_exit = 0;
  for (State target : K) {
    const auto p = hit_probabilities(uni, target, 1.0);
    for (State from : K) one_step = std::min(one_step, p[from]);
  }
  for (State x : K) max_exit = std::max(max_exit, chain.exit_rate(x));
  const double sojourn = std::exp(-max_exit);

  const double certified = K.size() == 1 ? 1.0 : std::min(one_step, sojourn);
  return {certified, empirical, one_step, sojourn};
}

C4Result compute_c4(const AbsorbedChain& chain, const StateSet& K, double lambda0,
                    const AbsorbedChain* doubled) {
  require_in_window(chain, K);
  if (!(lambda0 > 0) || !std::isfinite(lambda0)) throw DomainError("lambda0 must be > 0");
  const std::size_t n = chain.n_states();

  std::vector<std::ptrdiff_t> index(n, -1);
  std::vector<State> free_states;
  for (State x = 1; x < n; ++x)
    if (!K.contains(x)) {
      index[x] = static_cast<std::ptrdiff_t>(free_states.size());
      free_states.push_back(x);
    }

  C4Result r{1.0, Provenance::certified_bound, std::vector<double>(n, 1.0), K.states().front(), false};
  if (free_states.empty()) return r;

  const auto m = static_cast<Eigen::Index>(free_states.size());
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const State x = free_states[static_cast<std::size_t>(i)];
    double out = 0;
    for (const auto& t : chain.transitions(x)) {
      out += t.rate;
      if (index[t.to] >= 0)
        triplets.emplace_back(i, index[t.to], t.rate);
      else
        rhs[i] -= t.rate;
    }
    triplets.emplace_back(i, i, lambda0 - out);
  }
  Eigen::SparseMatrix<double> A(m, m);
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  const auto diverges = [&] {
    return NumericalError("exponential moment diverges at lambda0 = " + std::to_string(lambda0) +
                          "; lower lambda0");
  };
  if (lu.info() != Eigen::Success) throw diverges();
  const Eigen::VectorXd h = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw diverges();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!std::isfinite(h[i]) || h[i] < 1.0 - 1e-9) throw diverges();
    r.h[free_states[static_cast<std::size_t>(i)]] = std::max(1.0, h[i]);
  }
  const auto top = max_over_states(r.h);
  r.c4 = std::max(1.0, top.value);
  r.argmax = top.at;
  r.edge_attained = top.at == chain.top() && chain.top() > K.max();
  r.provenance = Provenance::empirical_estimate;
  if (doubled && !r.edge_attained) {
    try {
      const auto wide = compute_c4(*doubled, K, lambda0);
      if (same_value(wide.c4, r.c4)) r.provenance = Provenance::certified_bound;
    } catch (const NumericalError&) {
    }
  }
  return r;
}

C3Result compute_c3_lambda0(const AbsorbedChain& chain, State x0, const StateSet& K,
                            C3Strategy strategy, const AbsorbedChain* doubled,
                            EngineOptions options) {
  require_in_window(chain, K);
  if (!K.contains(x0)) throw DomainError("x0 must belong to K");

  const auto sojourn = [&] {
    return C3Result{1.0,   chain.exit_rate(x0), Provenance::certified_bound, C3Strategy::sojourn,
                    false, std::nullopt,        "holding time at x0"};
  };

  const auto absorption = [&] {
    const double C = absorption_sup(chain);
    C3Result r{0.0, C, Provenance::empirical_estimate, C3Strategy::absorption_rate, false,
               std::nullopt, ""};
    if (!(C > 0)) {
      r.failed = true;
      r.note = "never absorbed: sup_x Q(x,0) = 0";
      return r;
    }
    const Uniformizer uni(chain, options);
    const auto p = min_over_states(hit_probabilities(uni, x0, 1.0));
    if (!(p.value > 0)) {
      r.failed = true;
      r.note = "inf_y P_y(X_1 = x0) = 0 on this window";
      return r;
    }
    const double holding = std::min(1.0, std::exp(-(chain.exit_rate(x0) - C)));
    r.c3 = std::min(p.value * std::exp(C), holding);
    r.note = "one-step infimum with absorption rate bound";
    if (doubled && p.at != chain.top()) {
      const Uniformizer wide(*doubled, options);
      const auto q = min_over_states(hit_probabilities(wide, x0, 1.0));
      if (same_value(q.value, p.value) && same_value(absorption_sup(*doubled), C))
        r.provenance = Provenance::certified_bound;
    }
    return r;
  };

  switch (strategy) {
    case C3Strategy::sojourn: return sojourn();
    case C3Strategy::absorption_rate: return absorption();
    case C3Strategy::best: break;
  }

  auto a = sojourn();
  auto b = absorption();
  auto score = [&](C3Result& r) {
    if (r.failed) return -1.0;
    try {
      r.c4 = compute_c4(chain, K, r.lambda0, doubled);
      return r.c3 / (2.0 * r.c4->c4);
    } catch (const NumericalError&) {
      return -1.0;
    }
  };
  const double sa = score(a);
  const double sb = score(b);
  if (sa < 0 && sb < 0) {
    a.failed = true;
    a.note = "exponential moment diverges for both lambda0 candidates";
    return a;
  }
  return sb > sa + 1e-12 ? b : a;
}

HypothesisCertificate certify(const AbsorbedChain& chain, const StateSet& K, State x0,
                              CertifyOptions options) {
  require_in_window(chain, K);
  if (!K.contains(x0)) throw DomainError("x0 must belong to K");

  const auto c1 = compute_c1(chain, x0, options.doubled, options.engine);
  if (c1.failed)
    throw CertificationError(1, "some state cannot reach x0 = " + std::to_string(x0) +
                                    " in unit time on this window");

  auto c2_options = options.c2;
  c2_options.engine = options.engine;
  const auto c2 = compute_c2(chain, K, c2_options);
  if (!(c2.certified > 0)) throw CertificationError(2, "certified survival ratio bound is 0");

  auto c3 = compute_c3_lambda0(chain, x0, K, options.strategy, options.doubled, options.engine);
  if (c3.failed) throw CertificationError(3, c3.note);

  C4Result c4 = [&] {
    if (c3.c4) return *c3.c4;
    try {
      return compute_c4(chain, K, c3.lambda0, options.doubled);
    } catch (const NumericalError& e) {
      throw CertificationError(4, e.what());
    }
  }();

  auto cert = HypothesisCertificate::assemble(
      K, x0, {c1.c1, c1.provenance}, {c2.certified, Provenance::certified_bound},
      {c3.c3, c3.provenance}, {c4.c4, c4.provenance},
      {c3.lambda0, c3.used == C3Strategy::sojourn ? Provenance::certified_bound : c3.provenance});
  cert.window_limited = true;
  cert.notes.push_back("c1 minimum at state " + std::to_string(c1.argmin) +
                       (c1.edge_attained ? " (window edge)" : ""));
  cert.notes.push_back("c3/lambda0 strategy: " + to_string(c3.used));
  cert.notes.push_back("c4 supremum at state " + std::to_string(c4.argmax) +
                       (c4.edge_attained ? " (window edge, reflecting boundary row)" : ""));
  return cert;
}

RatioCheck check_ratio_inequality(const AbsorbedChain& chain, const HypothesisCertificate& cert,
                                  std::span<const double> t_grid, EngineOptions options) {
  require_in_window(chain, cert.x0, "x0");
  const double factor = cert.c2.value * cert.c3.value / (2.0 * cert.c4.value);
  const Uniformizer uni(chain, options);
  std::vector<double> u(chain.n_states(), 1.0);
  u[0] = 0.0;
  double log_scale = 0;
  double t = 0;
  RatioCheck out{true, std::numeric_limits<double>::infinity(), 0.0};
  std::vector<double> times(t_grid.begin(), t_grid.end());
  std::sort(times.begin(), times.end());
  for (double next : times) {
    log_scale += uni.backward(u, next - t);
    t = next;
    const double scale = std::exp(log_scale);
    const double sup = max_over_states(u).value * scale;
    const double margin = u[cert.x0] * scale - factor * sup;
    if (margin < out.worst_margin) {
      out.worst_margin = margin;
      out.worst_t = t;
    }
  }
  out.ok = out.worst_margin >= -1e-9;
  return out;
}

}  // namespace qsd
