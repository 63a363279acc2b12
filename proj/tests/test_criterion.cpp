#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "qsd/criterion.hpp"

using namespace qsd;

TEST_CASE("absorption supremum") {
  CHECK(compute_absorption_sup(build_logistic(1, 0.7, 1, 30)).C == 0.7);
  CHECK(compute_absorption_sup(oracle::catastrophe()).C == 1.0);
  const std::vector<RateEntry> closed{{1, 2, 1.0}, {2, 1, 1.0}};
  const auto none = compute_absorption_sup(build_from_entries(closed, 3));
  CHECK(none.C == 0.0);
  CHECK(none.never_absorbed);
}

TEST_CASE("alpha_K") {
  CHECK(compute_alpha_K(oracle::catastrophe(), {1}).alpha_K == 3.0);
  CHECK(compute_alpha_K(oracle::alternating_catastrophe(), {1, 2}).alpha_K == 3.0);
  for (State k = 1; k < 10; ++k)
    CHECK(compute_alpha_K(build_logistic(1, 1, 1, 30), StateSet::prefix(k)).alpha_K == 0.0);
  CHECK_THROWS_AS(compute_alpha_K(oracle::three_state_bd(), {1, 2}), DomainError);
  CHECK_THROWS_AS(compute_alpha_K(oracle::three_state_bd(), StateSet{}), DomainError);
  const auto edge = compute_alpha_K(build_logistic(1, 1, 1, 5), {1});
  CHECK(edge.argmin == 3);
}

TEST_CASE("alpha_K is monotone in nested prefixes (property)") {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 30; ++i) {
    const auto chain = oracle::random_chain(rng, 4 + static_cast<std::size_t>(i % 10));
    double previous = 0;
    for (State k = 1; k + 1 < chain.top() + 1; ++k) {
      const double a = compute_alpha_K(chain, StateSet::prefix(k)).alpha_K;
      CHECK(a >= previous);
      previous = a;
    }
  }
}

TEST_CASE("jumps-into-K criterion") {
  const auto cat = check_theorem31(oracle::catastrophe(), {1});
  CHECK(cat.theorem31_holds);
  REQUIRE(cat.c4_bound);
  CHECK(*cat.c4_bound == 1.5);
  CHECK(*cat.lambda0 == 1.0);

  const auto alt = check_theorem31(oracle::alternating_catastrophe(), {1, 2});
  CHECK(alt.theorem31_holds);
  CHECK(*alt.c4_bound == 1.5);

  const auto bd = check_theorem31(build_logistic(1, 1, 1, 30), StateSet::prefix(5));
  CHECK_FALSE(bd.theorem31_holds);
  CHECK_FALSE(bd.c4_bound);
}

TEST_CASE("Ferrari-Maric condition") {
  const auto cat = check_ferrari_maric(oracle::catastrophe());
  CHECK(cat.alpha_fm == 3.0);
  CHECK(cat.q_bar == 4.0);
  CHECK(cat.fm_holds);

  const auto alt = check_ferrari_maric(oracle::alternating_catastrophe());
  CHECK(alt.alpha_fm == 0.0);
  CHECK_FALSE(alt.fm_holds);

  CHECK_FALSE(check_ferrari_maric(build_logistic(1, 1, 1, 30)).fm_holds);
}

TEST_CASE("minimal prefix K") {
  CHECK(find_minimal_K(oracle::catastrophe(), 10) == std::optional<StateSet>(StateSet{1}));
  CHECK(find_minimal_K(oracle::alternating_catastrophe(), 10) ==
        std::optional<StateSet>(StateSet{1, 2}));
  CHECK_FALSE(find_minimal_K(build_logistic(1, 1, 1, 30), 5));
  CHECK_THROWS_AS(find_minimal_K(oracle::three_state_bd(), 2), DomainError);
}

TEST_CASE("direct c4 never exceeds the criterion bound (property)") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> rate(0.2, 4.0);
  int checked = 0;
  for (int i = 0; i < 60; ++i) {
    // random catastrophe-like chains: strong flows into a small set
    const std::size_t n = 5 + static_cast<std::size_t>(i % 15);
    std::vector<RateEntry> e{{1, 0, rate(rng)}};
    for (State x = 1; x < n; ++x) {
      if (x + 1 < n) e.push_back({x, x + 1, rate(rng)});
      const State target = 1 + static_cast<State>(rng() % 2);
      if (x > 1 && target != x) e.push_back({x, target, rate(rng)});
      if (x > 2 && rng() % 2) e.push_back({x, 0, 0.3 * rate(rng)});
    }
    const auto chain = build_from_entries(e, n);
    const auto K = find_minimal_K(chain, std::min<std::size_t>(3, chain.top() - 1));
    if (!K) continue;
    const auto report = check_theorem31(chain, *K);
    REQUIRE(report.theorem31_holds);
    const auto c4 = compute_c4(chain, *K, *report.lambda0);
    CHECK(c4.c4 <= *report.c4_bound + 1e-9);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("certificate via the criterion") {
  const auto chain = oracle::catastrophe();
  const auto cert = derive_certificate_via_criterion(chain, {1}, 1);
  CHECK(cert.c2.value == 1.0);
  CHECK(cert.c4.value == 1.5);
  CHECK(cert.lambda0.value == 1.0);
  CHECK((cert.gamma > 0 && cert.gamma <= 0.5));

  const auto mu = Distribution::dirac(1, chain.n_states());
  const auto nu = Distribution::dirac(chain.top(), chain.n_states());
  for (int t = 1; t <= 10; ++t) {
    const double d = tv_distance(conditional_distribution(chain, mu, t),
                                 conditional_distribution(chain, nu, t));
    CHECK(d <= cert.bound(t) + 1e-9);
  }

  try {
    derive_certificate_via_criterion(build_logistic(1, 1, 1, 20), {1}, 1);
    FAIL("expected the criterion to fail");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("criterion not satisfied") != std::string::npos);
  }
}
