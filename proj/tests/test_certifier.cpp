#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qsd/certifier.hpp"

using namespace qsd;

namespace {

const Constant certified(double v) { return {v, Provenance::certified_bound}; }

/// 1 -> 2 only, 2 -> 0: state 1 cannot be reached from 2.
AbsorbedChain one_way() {
  const std::vector<RateEntry> e{{1, 2, 1.0}, {2, 0, 1.0}};
  return build_from_entries(e, 3);
}

/// x -> x-1 at rate x, except 1 -> 0 at rate `first`.
AbsorbedChain pure_death_linear(std::size_t n, double first = 1.0) {
  std::vector<RateEntry> e{{1, 0, first}};
  for (State x = 2; x < n; ++x) e.push_back({x, x - 1, static_cast<double>(x)});
  return build_from_entries(e, n);
}

}  // namespace

TEST_CASE("certificate arithmetic") {
  const auto cert = HypothesisCertificate::assemble({1}, 1, certified(0.1), certified(0.5),
                                                    certified(0.2), certified(2), certified(1));
  CHECK(cert.gamma == doctest::Approx(0.0025).epsilon(1e-15));
  CHECK(cert.bound(2) == doctest::Approx(2 * 0.9975 * 0.9975).epsilon(1e-15));
  CHECK(cert.bound(2.9) == cert.bound(2));
  CHECK(cert.bound(0.5) == 2.0);
  CHECK(cert.provenance() == Provenance::certified_bound);

  auto mixed = HypothesisCertificate::assemble({1, 2}, 2, certified(0.3),
                                               {0.5, Provenance::empirical_estimate},
                                               certified(1), certified(1.5), certified(2));
  CHECK(mixed.provenance() == Provenance::empirical_estimate);

  CHECK_THROWS_AS(HypothesisCertificate::assemble({1}, 1, certified(0), certified(1), certified(1),
                                                  certified(1), certified(1)),
                  ValidationError);
  CHECK_THROWS_AS(HypothesisCertificate::assemble({1}, 1, certified(1), certified(1), certified(1),
                                                  certified(0.5), certified(1)),
                  ValidationError);
  CHECK_THROWS_AS(HypothesisCertificate::assemble({1}, 2, certified(1), certified(1), certified(1),
                                                  certified(1), certified(1)),
                  ValidationError);
  CHECK_THROWS_AS(HypothesisCertificate::assemble({1}, 1, certified(1), certified(1), certified(1),
                                                  certified(1), certified(0)),
                  ValidationError);
}

TEST_CASE("two-state chain gives the extreme certificate") {
  const auto chain = oracle::two_state();
  const auto cert = certify(chain, {1}, 1);
  CHECK(cert.c1.value == doctest::Approx(1.0));
  CHECK(cert.c2.value == 1.0);
  CHECK(cert.c3.value == 1.0);
  CHECK(cert.c4.value == 1.0);
  CHECK(cert.gamma == doctest::Approx(0.5));
  for (double t : {0.0, 1.0, 2.5, 4.0})
    CHECK(cert.bound(t) == doctest::Approx(2 * std::pow(0.5, std::floor(t))));
}

TEST_CASE("c1") {
  CHECK(compute_c1(oracle::two_state(), 1).c1 == doctest::Approx(1.0).epsilon(1e-13));

  const auto bd = oracle::three_state_bd();
  const auto P = oracle::expm(bd, 1.0);
  double expected = 1.0;
  for (int x = 0; x < 2; ++x) expected = std::min(expected, P(x, 0) / P.row(x).sum());
  const auto r = compute_c1(bd, 1);
  CHECK(r.c1 == doctest::Approx(expected).epsilon(1e-10));
  CHECK_FALSE(r.failed);
  CHECK(r.unconditional_floor <= r.c1);

  const auto broken = compute_c1(one_way(), 1);
  CHECK(broken.failed);
  CHECK(broken.c1 == 0.0);
  CHECK_THROWS_AS(compute_c1(bd, 0), DomainError);
}

TEST_CASE("c1 provenance follows window stability") {
  const auto small = oracle::catastrophe(20), doubled = oracle::catastrophe(40);
  const auto r = compute_c1(small, 1, &doubled);
  CHECK_FALSE(r.edge_attained);
  CHECK(r.provenance == Provenance::certified_bound);
  CHECK(compute_c1(small, 1).provenance == Provenance::empirical_estimate);
}

TEST_CASE("c2") {
  const auto bd = oracle::three_state_bd();
  const auto single = compute_c2(bd, {1});
  CHECK(single.certified == 1.0);
  CHECK(single.empirical == 1.0);

  const auto pair = compute_c2(bd, {1, 2});
  CHECK(pair.certified > 0);
  CHECK(pair.certified <= pair.empirical);
  CHECK(pair.sojourn_bound == doctest::Approx(std::exp(-2.0)));

  const auto logistic = compute_c2(build_logistic(1, 1, 1, 40), StateSet::prefix(3));
  CHECK(logistic.certified > 0);
  CHECK(logistic.certified <= logistic.empirical);
  CHECK_THROWS_AS(compute_c2(bd, StateSet{}), DomainError);
}

TEST_CASE("c2 bound dominance (property)") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    const auto chain = oracle::random_chain(rng, 4 + static_cast<std::size_t>(i % 6));
    const auto r = compute_c2(chain, {1, 2, 3});
    CHECK(r.certified <= r.empirical + 1e-15);
  }
}

TEST_CASE("c3 and lambda0") {
  const auto logistic = build_logistic(2, 0.5, 1, 30);
  const auto s = compute_c3_lambda0(logistic, 1, {1}, C3Strategy::sojourn);
  CHECK(s.lambda0 == 2.5);
  CHECK(s.c3 == 1.0);
  CHECK(s.provenance == Provenance::certified_bound);

  const auto two = oracle::two_state();
  const auto t = compute_c3_lambda0(two, 1, {1}, C3Strategy::sojourn);
  CHECK(t.lambda0 == 1.0);
  for (double time : {0.5, 2.0})
    CHECK(survival_probability(two, 1, time).value ==
          doctest::Approx(t.c3 * std::exp(-t.lambda0 * time)).epsilon(1e-12));

  const auto cat = compute_c3_lambda0(oracle::catastrophe(), 1, {1}, C3Strategy::absorption_rate);
  CHECK(cat.lambda0 == 1.0);
  CHECK_FALSE(cat.failed);
  CHECK((cat.c3 > 0 && cat.c3 <= 1));

  const auto broken = compute_c3_lambda0(one_way(), 1, {1}, C3Strategy::absorption_rate);
  CHECK(broken.failed);
  CHECK_THROWS_AS(compute_c3_lambda0(two, 1, {}, C3Strategy::sojourn), DomainError);
}

TEST_CASE("c3 lower bound holds on a time grid (property)") {
  for (const auto& chain : {oracle::catastrophe(), oracle::alternating_catastrophe(),
                            build_logistic(1, 1, 1, 40)}) {
    for (auto strategy : {C3Strategy::sojourn, C3Strategy::absorption_rate}) {
      const auto r = compute_c3_lambda0(chain, 1, {1}, strategy);
      REQUIRE_FALSE(r.failed);
      // P_1(X_t in {1}) from the dense exponential
      for (double t : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const double p = oracle::expm(chain, t)(0, 0);
        CHECK(p >= r.c3 * std::exp(-r.lambda0 * t) - 1e-12);
      }
    }
  }
}

TEST_CASE("c3 best strategy") {
  const auto r = compute_c3_lambda0(oracle::catastrophe(), 1, {1}, C3Strategy::best);
  REQUIRE(r.c4);
  const auto soj = compute_c3_lambda0(oracle::catastrophe(), 1, {1}, C3Strategy::sojourn);
  const auto abs = compute_c3_lambda0(oracle::catastrophe(), 1, {1}, C3Strategy::absorption_rate);
  const double g_soj = soj.c3 / compute_c4(oracle::catastrophe(), {1}, soj.lambda0).c4;
  const double g_abs = abs.c3 / compute_c4(oracle::catastrophe(), {1}, abs.lambda0).c4;
  CHECK(r.used == (g_abs > g_soj + 1e-12 ? C3Strategy::absorption_rate : C3Strategy::sojourn));
}

TEST_CASE("c4") {
  const auto bd = oracle::three_state_bd();
  CHECK(compute_c4(bd, {1, 2}, 1.0).c4 == 1.0);

  const auto cat = compute_c4(oracle::catastrophe(), {1}, 1.0);
  CHECK(std::abs(cat.c4 - 1.5) <= 1e-9);
  for (State x = 2; x < 40; ++x) CHECK(std::abs(cat.h[x] - 1.5) <= 1e-9);

  try {
    compute_c4(pure_death_linear(10), {1}, 2.0);
    FAIL("expected divergence");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("exponential moment diverges") != std::string::npos);
  }
  CHECK_THROWS_AS(compute_c4(bd, {1}, 0.0), DomainError);
}

TEST_CASE("logistic c4 is stable under window doubling on interior states") {
  const auto a = compute_c4(build_logistic(1, 1, 1, 64), {1}, 2.0);
  const auto b = compute_c4(build_logistic(1, 1, 1, 128), {1}, 2.0);
  CHECK(std::isfinite(a.c4));
  CHECK(a.edge_attained);
  CHECK(a.provenance == Provenance::empirical_estimate);
  for (State x = 2; x <= 20; ++x) CHECK(std::abs(a.h[x] - b.h[x]) <= 1e-8 * b.h[x]);
}

TEST_CASE("c4 moments are >= 1 and monotone in lambda0 (property)") {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 20; ++i) {
    const auto chain = i % 2 ? build_logistic(1, 1, 1, 30) : oracle::random_chain(rng, 6);
    std::vector<double> previous(chain.n_states(), 1.0);
    for (double lambda : {0.05, 0.1, 0.2, 0.3}) {
      C4Result r;
      try {
        r = compute_c4(chain, {1}, lambda);
      } catch (const NumericalError&) {
        break;
      }
      for (State x = 1; x < chain.n_states(); ++x) {
        CHECK(r.h[x] >= 1.0);
        CHECK(r.h[x] >= previous[x] - 1e-12);
      }
      previous = r.h;
    }
  }
}

TEST_CASE("certify names the failing part") {
  try {
    certify(one_way(), {1}, 1);
    FAIL("expected a failure");
  } catch (const CertificationError& e) {
    CHECK(e.part() == 1);
  }
  try {
    certify(pure_death_linear(10, 2.0), {1}, 1, {C3Strategy::sojourn});
    FAIL("expected a failure");
  } catch (const CertificationError& e) {
    CHECK(e.part() == 4);
  }
  CHECK_THROWS_AS(certify(oracle::two_state(), {1}, 2), DomainError);
}

TEST_CASE("logistic window certificate and ratio inequality") {
  const auto chain = build_logistic(1, 1, 1, 64), doubled = build_logistic(1, 1, 1, 128);
  CertifyOptions opts;
  opts.doubled = &doubled;
  const auto cert = certify(chain, {1}, 1, opts);
  CHECK(cert.gamma > 0);
  CHECK(cert.gamma <= 0.5);
  CHECK(cert.window_limited);
  const std::vector<double> grid{0.5, 1, 2, 5, 10};
  const auto ratio = check_ratio_inequality(chain, cert, grid);
  CHECK(ratio.ok);
  CHECK(ratio.worst_margin >= -1e-9);

  CHECK(check_ratio_inequality(oracle::two_state(), certify(oracle::two_state(), {1}, 1), grid).ok);

  // x0 = 1 drains fast while state 2 barely moves: a factor of 1/2 is too optimistic.
  const std::vector<RateEntry> e{{1, 0, 5.0}, {1, 2, 1.0}, {2, 1, 0.01}};
  const auto lopsided = build_from_entries(e, 3);
  const auto fake = HypothesisCertificate::assemble({1}, 1, certified(1), certified(1),
                                                    certified(1), certified(1), certified(1));
  const auto bad = check_ratio_inequality(lopsided, fake, grid);
  CHECK_FALSE(bad.ok);
  CHECK(bad.worst_margin < 0);
}

TEST_CASE("mixing bound holds and survives weakened constants (property)") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> U(0, 1);
  const std::vector<AbsorbedChain> chains{oracle::three_state_bd(), oracle::catastrophe(12),
                                          build_logistic(1, 1, 1, 24),
                                          build_logistic(0.5, 2, 0.5, 30)};
  for (const auto& chain : chains) {
    const auto cert = certify(chain, {1}, 1);
    const auto weaker = HypothesisCertificate::assemble(
        cert.K, cert.x0, {cert.c1.value * 0.9, cert.c1.provenance}, cert.c2,
        {cert.c3.value * 0.5, cert.c3.provenance}, {cert.c4.value * 2, cert.c4.provenance},
        cert.lambda0);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> a(chain.n_states(), 0.0), b(chain.n_states(), 0.0);
      for (State x = 1; x < chain.n_states(); ++x) {
        a[x] = U(rng);
        b[x] = U(rng) * U(rng);
      }
      const Distribution mu(a);
      const auto nu = trial == 0 ? Distribution::dirac(chain.top(), chain.n_states()) : Distribution(b);
      for (double t : {0.5, 1.0, 2.0, 3.0, 6.0, 10.0}) {
        const double d = tv_distance(conditional_distribution(chain, mu, t),
                                     conditional_distribution(chain, nu, t));
        CHECK(d <= cert.bound(t) + 1e-9);
        CHECK(d <= weaker.bound(t) + 1e-9);
      }
    }
  }
}
