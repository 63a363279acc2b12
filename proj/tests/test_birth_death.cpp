#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qsd/birth_death.hpp"

using namespace qsd;

namespace {

BirthDeathSpec pure_death(std::function<double(State)> death) {
  return BirthDeathSpec::make([](State) { return 0.0; }, std::move(death));
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("alpha coefficients") {
  const auto spec = BirthDeathSpec::make_logistic(1, 1, 1);
  const auto a = alpha_coeffs(spec, 10);
  CHECK(a[1] == 1.0);
  CHECK(a[2] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(a[3] == doctest::Approx(2.0 / (1 * 4 * 9)).epsilon(1e-15));

  const auto other = BirthDeathSpec::make_logistic(2, 0.3, 0.1);
  CHECK(alpha_coeffs(other, 1)[1] == doctest::Approx(1 / 0.3).epsilon(1e-15));

  const auto bad = BirthDeathSpec::make([](State) { return 1.0; },
                                        [](State x) { return x == 3 ? 0.0 : 1.0; });
  CHECK_THROWS_AS(alpha_coeffs(bad, 5), DomainError);
  CHECK_THROWS_AS(alpha_coeffs(spec, 0), DomainError);

  // deep coefficients stay representable in log space
  const auto logs = log_alpha_coeffs(spec, 400);
  CHECK(std::isfinite(logs[400]));
  CHECK(logs[400] < -1000);
}

TEST_CASE("alpha recursion consistency (property)") {
  for (const auto& p : {LogisticParams{1, 1, 1}, LogisticParams{3, 0.5, 0.2},
                        LogisticParams{0.4, 2, 5}}) {
    const auto spec = BirthDeathSpec::make_logistic(p.b, p.d, p.c);
    const auto a = alpha_coeffs(spec, 60);
    for (State j = 1; j < 60; ++j) {
      const double lhs = a[j + 1] * spec.death(j + 1), rhs = a[j] * spec.birth(j);
      // coefficients come from log space, so allow a few ulps of the log
      if (rhs > 1e-290) CHECK(rel(lhs, rhs) <= 1e-12);
    }
  }
}

TEST_CASE("expected hitting times match the first-step system (property)") {
  for (const auto& p : {LogisticParams{1, 1, 1}, LogisticParams{2, 1, 0.5},
                        LogisticParams{0.5, 0.2, 3}}) {
    const auto spec = BirthDeathSpec::make_logistic(p.b, p.d, p.c);
    const auto chain = truncate(spec, 200);
    for (State z : {1, 3}) {
      const auto oracle_times = oracle::expected_hitting_first_step(chain, z);
      double previous = 0;
      for (State x = z + 1; x <= 30; ++x) {
        const double v = tail_expected_hitting(spec, z, x);
        CHECK(rel(v, oracle_times[x]) <= 1e-8);
        CHECK(v >= previous);
        previous = v;
      }
    }
  }
  const auto spec = BirthDeathSpec::make_logistic(1, 1, 1);
  CHECK_THROWS_AS(tail_expected_hitting(spec, 2, 2), DomainError);
  CHECK_THROWS_AS(tail_expected_hitting(spec, 0, 2), DomainError);
}

TEST_CASE("the tail series S is finite and is the limit of the partial sums") {
  const auto spec = BirthDeathSpec::make_logistic(1, 1, 1);
  const double S = tail_series_S(spec);
  CHECK(std::isfinite(S));
  CHECK(S == tail_expected_hitting(spec, 1, infinity_state));
  const double far = tail_expected_hitting(spec, 1, 100000);
  CHECK(far < S);
  CHECK(S - far < 2e-5);
  CHECK(S - far > 0);
}

TEST_CASE("divergent tails are reported") {
  const auto super = BirthDeathSpec::make([](State x) { return 2.0 * static_cast<double>(x); },
                                          [](State x) { return static_cast<double>(x); });
  try {
    tail_expected_hitting(super, 1, 3);
    FAIL("expected divergence");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("divergent tail") != std::string::npos);
  }
}

TEST_CASE("exponential moments: pure quadratic death against the product formula") {
  const auto spec = pure_death([](State x) { return static_cast<double>(x * x); });
  const auto m = exp_moment_hitting(spec, 1, 1.0, 4096);
  double product = 1.0;
  for (State x = 2; x <= 4096; ++x) {
    product *= static_cast<double>(x * x) / static_cast<double>(x * x - 1);
    if (x <= 200 || x % 512 == 0) CHECK(rel(m.h[x], product) <= 1e-12);
  }
  CHECK(m.stabilized);
  CHECK(rel(m.extrapolated_sup, 2.0) <= 1e-7);
}

TEST_CASE("exponential moments: limits and monotonicity (property)") {
  const auto spec = BirthDeathSpec::make_logistic(1, 1, 1);
  const auto zero = exp_moment_hitting(spec, 1, 0.0, 256);
  for (double h : zero.h) CHECK(h == 1.0);

  std::vector<double> previous(257, 1.0);
  for (double lambda : {1e-6, 0.01, 0.5, 1.0, 2.0}) {
    const auto m = exp_moment_hitting(spec, 1, lambda, 256);
    for (State x = 0; x <= 256; ++x) CHECK(m.h[x] >= previous[x]);
    if (lambda == 1e-6)
      for (State x = 2; x <= 256; ++x) CHECK(m.h[x] - 1 < 1e-5);
    previous = m.h;
  }

  const auto two = exp_moment_hitting(spec, 1, 2.0);
  CHECK(two.stabilized);
  CHECK(std::isfinite(two.extrapolated_sup));
  CHECK(two.extrapolated_sup >= two.sup);
  CHECK(two.sup >= 1.0);

  try {
    exp_moment_hitting(pure_death([](State x) { return static_cast<double>(x); }), 1, 2.0, 64);
    FAIL("expected divergence");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("moment diverges") != std::string::npos);
  }
}

TEST_CASE("z0 selection") {
  const auto spec = BirthDeathSpec::make_logistic(1, 1, 1);
  const auto z0 = find_z0(spec, 2.0);
  REQUIRE(z0);
  CHECK(*z0 <= 50);
  CHECK(std::isfinite(exp_moment_hitting(spec, *z0, 2.0).extrapolated_sup));

  CHECK_FALSE(find_z0(pure_death([](State x) { return static_cast<double>(x); }), 2.0, 20, 1024));
  CHECK(find_z0(spec, 1e-9) == std::optional<State>(1));
  CHECK_THROWS_AS(find_z0(spec, 0.0), DomainError);
}

TEST_CASE("birth-death report") {
  const auto r = bd_report(BirthDeathSpec::make_logistic(1, 1, 1), 2.0, 10, 50, 12);
  CHECK(r.alpha.size() == 11);
  CHECK(r.tail_series_S > 0);
  REQUIRE(r.z0);
  REQUIRE(r.exp_moment_sup);
  CHECK(*r.exp_moment_sup >= 1.0);
  CHECK(r.table.size() == 12 - *r.z0);
}

TEST_CASE("logistic certificate") {
  const auto lc = logistic_certificate(1, 1, 1);
  const auto& cert = lc.certificate;
  CHECK(cert.lambda0.value == 2.0);
  CHECK(cert.c3.value == 1.0);
  CHECK(cert.x0 == 1);
  CHECK(cert.K == StateSet::prefix(lc.z0));
  CHECK(cert.gamma > 0);
  CHECK(cert.gamma <= 0.5);
  CHECK(lc.chain.n_states() >= 64);
  CHECK_THROWS_AS(logistic_certificate(1, 1, 0), ValidationError);
  CHECK_THROWS_AS(logistic_certificate(1, 1, -1), ValidationError);
}
