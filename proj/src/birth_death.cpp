#include "qsd/birth_death.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qsd {

namespace {

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0;
  double comp_ = 0;
};

constexpr std::size_t series_cap = 1'000'000;
constexpr double series_rel_tol = 1e-15;

double death_rate(const BirthDeathSpec& spec, State x) {
  const double d = spec.death(x);
  if (!(d > 0) || !std::isfinite(d))
    throw DomainError("death rate must be positive at state " + std::to_string(x));
  return d;
}

double birth_rate(const BirthDeathSpec& spec, State x) {
  const double b = spec.birth(x);
  if (!(b >= 0) || !std::isfinite(b))
    throw DomainError("birth rate must be finite and >= 0 at state " + std::to_string(x));
  return b;
}

/// sum_{l>=k} alpha_l / alpha_k, using alpha_{l+1} / alpha_l = b_l / delta_{l+1}.
double inner_tail_ratio(const BirthDeathSpec& spec, State k) {
  CompensatedSum s;
  s.add(1.0);
  double term = 1.0;
  for (std::size_t i = 0; i < series_cap; ++i) {
    const State l = k + i;
    term *= birth_rate(spec, l) / death_rate(spec, l + 1);
    if (term == 0) return s.value();
    s.add(term);
    if (term < series_rel_tol * s.value()) return s.value();
  }
  throw NumericalError("divergent tail at k = " + std::to_string(k) +
                       " -- return from infinity fails");
}

double outer_term(const BirthDeathSpec& spec, State k) {
  return inner_tail_ratio(spec, k) / death_rate(spec, k);
}

/// sum_{k=z+1}^{infinity} outer_term(k), extrapolating the tail from window doublings.
double outer_series_to_infinity(const BirthDeathSpec& spec, State z) {
  CompensatedSum s;
  State next = z + 1;
  auto sum_to = [&](State last) {
    for (; next <= last; ++next) s.add(outer_term(spec, next));
    return s.value();
  };
  State last = z + 64;
  double s1 = sum_to(last);
  double s2 = sum_to(last *= 2);
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int round = 0; round < 20; ++round) {
    const double s4 = sum_to(last *= 2);
    const double d1 = s2 - s1, d2 = s4 - s2;
    if (d2 <= series_rel_tol * s4) return s4;
    const double r = d2 / d1;
    if (d1 > 0 && r < 1) {
      const double estimate = s4 + d2 * r / (1 - r);
      if (std::abs(estimate - previous) <= 1e-12 * estimate) return estimate;
      previous = estimate;
    }
    s1 = s2;
    s2 = s4;
  }
  throw NumericalError("expected hitting time series does not converge -- return from infinity fails");
}

/// h on {0..n-1} by the backward recursion h(x) = g_x h(x-1).
std::vector<double> solve_moment(const BirthDeathSpec& spec, State z, double lambda,
                                 std::size_t n) {
  const State top = n - 1;
  std::vector<double> g(n, 1.0);
  const auto diverges = [&](State x) {
    return NumericalError("moment diverges at lambda = " + std::to_string(lambda) +
                          " (state " + std::to_string(x) + ")");
  };
  {
    const double d = death_rate(spec, top);
    if (!(d - lambda > 0)) throw diverges(top);
    g[top] = d / (d - lambda);
  }
  for (State x = top - 1; x > z; --x) {
    const double d = death_rate(spec, x);
    const double b = birth_rate(spec, x);
    const double denom = d - lambda + b * (1.0 - g[x + 1]);
    if (!(denom > 0)) throw diverges(x);
    g[x] = d / denom;
  }
  std::vector<double> h(n, 1.0);
  for (State x = z + 1; x <= top; ++x) {
    h[x] = h[x - 1] * g[x];
    if (!std::isfinite(h[x])) throw diverges(x);
  }
  return h;
}

}  // namespace

std::vector<double> log_alpha_coeffs(const BirthDeathSpec& spec, std::size_t j_max) {
  if (j_max < 1) throw DomainError("j_max must be >= 1");
  std::vector<double> out(j_max + 1, 0.0);
  double log_births = 0;
  double log_deaths = 0;
  for (State j = 1; j <= j_max; ++j) {
    if (j > 1) log_births += std::log(birth_rate(spec, j - 1));
    log_deaths += std::log(death_rate(spec, j));
    out[j] = log_births - log_deaths;
  }
  return out;
}

std::vector<double> alpha_coeffs(const BirthDeathSpec& spec, std::size_t j_max) {
  auto out = log_alpha_coeffs(spec, j_max);
  out[0] = -std::numeric_limits<double>::infinity();
  for (auto& a : out) a = std::exp(a);
  return out;
}

double tail_expected_hitting(const BirthDeathSpec& spec, State z, State x) {
  if (z < 1) throw DomainError("z must be >= 1");
  if (x <= z) throw DomainError("x must be larger than z");
  if (x == infinity_state) return outer_series_to_infinity(spec, z);
  CompensatedSum s;
  for (State k = z + 1; k <= x; ++k) s.add(outer_term(spec, k));
  return s.value();
}

double tail_series_S(const BirthDeathSpec& spec) {
  return tail_expected_hitting(spec, 1, infinity_state);
}

ExpMoment exp_moment_hitting(const BirthDeathSpec& spec, State z, double lambda,
                             std::size_t x_max) {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw DomainError("lambda must be >= 0");
  if (z < 1) throw DomainError("z must be >= 1");
  if (x_max <= z) throw DomainError("x_max must exceed z");

  ExpMoment out;
  out.h = solve_moment(spec, z, lambda, x_max + 1);
  out.sup = *std::max_element(out.h.begin(), out.h.end());
  const double s1 = out.sup;
  const auto h2 = solve_moment(spec, z, lambda, 2 * x_max + 1);
  const double s2 = *std::max_element(h2.begin(), h2.end());
  const auto h4 = solve_moment(spec, z, lambda, 4 * x_max + 1);
  const double s4 = *std::max_element(h4.begin(), h4.end());

  const double e1 = s2 - s1, e2 = s4 - s2;
  out.extrapolated_sup = s4;
  if (std::abs(e2) <= 1e-8 * s4) {
    out.stabilized = true;
  } else if (e1 > 0 && e2 >= 0 && e2 / e1 <= 0.75) {
    const double r = e2 / e1;
    out.stabilized = true;
    out.extrapolated_sup = s4 + e2 * r / (1 - r);
  } else {
    out.stabilized = false;
  }
  return out;
}

std::optional<State> find_z0(const BirthDeathSpec& spec, double lambda0, State z_max,
                             std::size_t x_max) {
  if (!(lambda0 > 0)) throw DomainError("lambda0 must be > 0");
  for (State z = 1; z <= z_max && z < x_max; ++z) {
    try {
      if (exp_moment_hitting(spec, z, lambda0, x_max).stabilized) return z;
    } catch (const NumericalError&) {
    }
  }
  return std::nullopt;
}

BdHittingReport bd_report(const BirthDeathSpec& spec, double lambda0, std::size_t j_max,
                          State z_max, State table_max) {
  BdHittingReport r;
  r.alpha = alpha_coeffs(spec, j_max);
  try {
    r.tail_series_S = tail_series_S(spec);
  } catch (const NumericalError&) {
    r.tail_series_S = std::numeric_limits<double>::infinity();
  }
  r.lambda0 = lambda0;
  r.z0 = find_z0(spec, lambda0, z_max);
  if (!r.z0) return r;
  const auto moment = exp_moment_hitting(spec, *r.z0, lambda0);
  r.exp_moment_sup = moment.extrapolated_sup;
  for (State x = *r.z0 + 1; x <= table_max; ++x)
    r.table.push_back({x, tail_expected_hitting(spec, *r.z0, x), moment.h[x]});
  return r;
}

LogisticCertificate logistic_certificate(double b, double d, double c,
                                         LogisticCertificateOptions options) {
  const auto spec = BirthDeathSpec::make_logistic(b, d, c);
  const auto builder = builder_for(spec);
  QsdOptions qsd_options;
  qsd_options.engine = options.engine;
  auto window = auto_window(builder, options.window_tol, 16, 4096, qsd_options);
  const std::size_t n = std::max(window.chain.n_states(), options.min_states);
  AbsorbedChain chain = n == window.chain.n_states() ? window.chain : builder(n);
  QsdResult qsd = n == window.chain.n_states() ? window.result : compute_qsd(chain, qsd_options);

  const double lambda0 = b + d;
  const auto z0 = find_z0(spec, lambda0, options.z_max, options.x_max);
  if (!z0)
    throw CertificationError(4, "no z0 <= " + std::to_string(options.z_max) +
                                    " with a finite exponential moment at lambda0");
  const auto K = StateSet::prefix(*z0);
  if (K.max() + 1 >= n) throw CertificationError(4, "window too small for K");

  // c1 decreases towards its infimum as the window grows: extrapolate.
  const auto c1a = compute_c1(chain, 1, nullptr, options.engine);
  const auto c1b = compute_c1(builder(2 * n), 1, nullptr, options.engine);
  const auto c1c = compute_c1(builder(4 * n), 1, nullptr, options.engine);
  if (c1a.failed || c1b.failed || c1c.failed)
    throw CertificationError(1, "some state cannot reach 1 in unit time");
  double c1 = std::min({c1a.c1, c1b.c1, c1c.c1});
  {
    const double e1 = c1a.c1 - c1b.c1, e2 = c1b.c1 - c1c.c1;
    if (e1 > 0 && e2 >= 0 && e2 < e1) {
      const double r = e2 / e1;
      c1 = c1c.c1 - e2 * r / (1 - r);
    }
  }
  c1 = std::max(c1, c1c.unconditional_floor);

  C2Options c2_options;
  c2_options.engine = options.engine;
  const auto c2 = compute_c2(chain, K, c2_options);
  const auto c3 = compute_c3_lambda0(chain, 1, K, C3Strategy::sojourn);

  double c4 = 1.0;
  try {
    c4 = std::max(compute_c4(chain, K, c3.lambda0).c4,
                  exp_moment_hitting(spec, *z0, c3.lambda0, options.x_max).extrapolated_sup);
  } catch (const NumericalError& e) {
    throw CertificationError(4, e.what());
  }

  auto cert = HypothesisCertificate::assemble(
      K, 1, {c1, Provenance::empirical_estimate}, {c2.certified, Provenance::certified_bound},
      {c3.c3, Provenance::certified_bound}, {c4, Provenance::empirical_estimate},
      {c3.lambda0, Provenance::certified_bound});
  cert.window_limited = true;
  cert.notes.push_back("z0 = " + std::to_string(*z0));
  cert.notes.push_back("c1 extrapolated from windows of " + std::to_string(n) + ", " +
                       std::to_string(2 * n) + " and " + std::to_string(4 * n) + " states");
  cert.notes.push_back("c4 from the birth-death moment extrapolated in x_max");
  return {std::move(cert), std::move(chain), *z0, std::move(qsd)};
}

}  // namespace qsd
