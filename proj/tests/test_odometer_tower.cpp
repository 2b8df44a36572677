#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include <kmslab/odometer_tower.hpp>

using namespace kmslab;

namespace {

BaseWord w(std::initializer_list<int> digits) {
  BaseWord b{static_cast<int>(digits.size()), 0};
  int i = 0;
  for (int d : digits) b.bits |= static_cast<std::uint64_t>(d) << i++;
  return b;
}

TowerSystem canonical(int k) { return TowerSystem(canonical_heights(), k); }

}  // namespace

TEST_CASE("odometer step") {
  REQUIRE(odometer_step(w({0, 0, 0})).word == w({1, 0, 0}));
  REQUIRE(odometer_step(w({1, 1, 0})).word == w({0, 0, 1}));
  OdometerStep wrap = odometer_step(w({1, 1, 1}));
  REQUIRE(wrap.word == w({0, 0, 0}));
  REQUIRE(wrap.overflow);
  REQUIRE_FALSE(odometer_step(w({1, 0, 1})).overflow);
  REQUIRE(w({1, 1, 0}).to_string() == "110");
}

TEST_CASE("heights") {
  TowerSystem t({1, 4, 13});
  REQUIRE(height(w({0, 1, 1}), t) == 1);
  REQUIRE(height(w({1, 0, 0}), t) == 3);
  REQUIRE(height(w({1, 1, 0}), t) == 8);
  REQUIRE(height(w({1, 1, 1}), t) == 3 * 13 + 1 - 18);
  REQUIRE_THROWS_AS(TowerSystem({1, 3}), Error);
  REQUIRE_THROWS_AS(TowerSystem({0, 4}), Error);
  for (int k = 1; k <= 6; ++k) {
    TowerSystem c = canonical(k);
    for (int j = 1; j <= k; ++j) {
      REQUIRE(c.level_height(j) >= 1);
      REQUIRE(c.level_height(j + 1) > c.level_height(j));
    }
  }
}

TEST_CASE("tower map") {
  TowerSystem t({1, 4, 13});
  REQUIRE(tower_step({w({0, 0, 0}), 1}, t) == TowerPoint{w({1, 0, 0}), 1});
  REQUIRE(tower_step({w({1, 0, 0}), 1}, t) == TowerPoint{w({1, 0, 0}), 2});
  REQUIRE(tower_step({w({1, 0, 0}), 3}, t) == TowerPoint{w({0, 1, 0}), 1});
  try {
    tower_step({w({1, 0, 0}), 4}, t);
    FAIL("expected InvalidLevel");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::invalid_level);
  }
}

TEST_CASE("tower mass") {
  TowerSystem t({1, 4, 13});
  REQUIRE(tower_mass(t, false) == Rational(9, 4));
  REQUIRE(tower_mass(t) == Rational(9, 4) + Rational(11, 4));
  REQUIRE(tower_mass(TowerSystem({1})) == Rational(1, 2) + Rational(3, 2));
  REQUIRE(tower_mass(canonical(3)) < tower_mass(canonical(4)));
  for (int k = 1; k <= 6; ++k) {
    TowerSystem c = canonical(k);
    // direct enumeration: 2^-K per cell
    Rational direct(c.cycle_length(), 1);
    direct /= Rational(Integer(1) << k);
    REQUIRE(tower_mass(c) == direct);
    REQUIRE(tower_mass(c) >= Rational(k - 1, 4));
    if (k < 6) {
      Rational step = tower_mass(canonical(k + 1), false) - tower_mass(c, false);
      REQUIRE(step == dyadic(k + 1) * Rational(static_cast<long>(canonical(k + 1).level_height(k + 1))));
      REQUIRE(tower_mass(canonical(k + 1)) > tower_mass(c));
    }
  }
}

TEST_CASE("kac check") {
  for (int k = 1; k <= 6; ++k) REQUIRE(kac_check(canonical(k)));
  REQUIRE(kac_check(TowerSystem({1, 4, 13}, 2)));
  REQUIRE(canonical(3).cycle_length() == 40);
  REQUIRE(canonical(6).cycle_length() == 1093);
  auto skipping = [](const TowerPoint& p, const TowerSystem& t) {
    TowerPoint q = tower_step(p, t);
    if (q.level == 2 && t.height(q.base) > 2) q.level = 3;
    return q;
  };
  REQUIRE_FALSE(kac_check(canonical(3), skipping));

  // orbit visits each cell once
  auto orbit = tower_orbit(canonical(4));
  std::set<std::pair<std::uint64_t, std::int64_t>> cells;
  for (const auto& p : orbit) cells.insert({p.base.bits, p.level});
  REQUIRE(cells.size() == orbit.size());
}

TEST_CASE("eigenvalue partial sums") {
  TowerSystem t({1, 4, 13});
  REQUIRE(eigen_partial_sum(Rational(0), t, 3) == 0.0);
  for (int upto = 0; upto <= 3; ++upto) REQUIRE(std::abs(eigen_partial_sum(Rational(1, 3), t, upto) - 3.0 * upto) < 1e-12);
  TowerSystem fours({4, 16, 64, 256});
  for (int upto = 0; upto <= 4; ++upto) {
    REQUIRE(eigen_partial_sum(Rational(1, 4), fours, upto) == 0.0);
    REQUIRE(eigen_partial_sum(0.25, fours, upto) < 1e-24);
  }
  REQUIRE(std::abs(eigen_partial_sum(1.0 / 3.0, t, 3) - 9.0) < 1e-12);
  REQUIRE_THROWS_AS(eigen_partial_sum(Rational(1, 3), t, 4), Error);
}

TEST_CASE("frequency selection") {
  SECTION("sqrt 2 - 1") {
    FrequencyPlan plan = choose_frequencies(AlphaInterval::surd(-1, 2, 1), 4, 1e-2);
    REQUIRE(plan.n == std::vector<Integer>{3, 13, 71, 409});
    for (std::size_t k = 0; k + 1 < plan.certificates.size(); ++k) {
      REQUIRE(plan.certificates[k + 1] < plan.certificates[k]);
      REQUIRE(plan.n[k + 1] > 3 * plan.n[k]);
    }
    REQUIRE(plan.certificates.back() < 1e-2);
    // certificate = |exp(2 pi i n alpha) - exp(2 pi i alpha)|
    double alpha = std::sqrt(2.0) - 1.0;
    for (std::size_t k = 0; k < plan.n.size(); ++k) {
      double n = plan.n[k].get_d();
      double re = std::cos(2 * M_PI * n * alpha) - std::cos(2 * M_PI * alpha);
      double im = std::sin(2 * M_PI * n * alpha) - std::sin(2 * M_PI * alpha);
      REQUIRE(std::abs(std::hypot(re, im) - plan.certificates[k]) < 1e-9);
    }
  }
  SECTION("golden mean") {
    FrequencyPlan plan = choose_frequencies(AlphaInterval::surd(-1, 5, 2), 6, 1e-3);
    for (std::size_t k = 0; k + 1 < plan.n.size(); ++k) {
      REQUIRE(plan.convergent_index[k + 1] - plan.convergent_index[k] >= 3);
      REQUIRE(plan.n[k + 1] > 3 * plan.n[k]);
    }
    // Fibonacci denominators plus one
    REQUIRE(plan.n[0] == 2);
    REQUIRE(plan.n[1] == 9);
    REQUIRE(plan.n[2] == 35);
  }
  SECTION("rational and imprecise inputs") {
    try {
      choose_frequencies(AlphaInterval::exact(Rational(1, 2)), 3, 1e-3);
      FAIL("expected RationalAlpha");
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::rational_alpha);
    }
    try {
      choose_frequencies(AlphaInterval::decimal("0.4142"), 5, 1e-9);
      FAIL("expected PrecisionExhausted");
    } catch (const Error& e) {
      REQUIRE(e.code() == ErrorCode::precision_exhausted);
    }
    REQUIRE_THROWS_AS(choose_frequencies(AlphaInterval::surd(-1, 2, 1), 0, 1e-2), Error);
  }
}
