#include <catch_amalgamated.hpp>

#include <kmslab/riesz_spectral.hpp>

#include "oracles.hpp"

using namespace kmslab;

TEST_CASE("signed decompositions") {
  RieszSpec r({1, 4, 13});
  REQUIRE(signed_decomposition(0, r) == std::vector<int>{0, 0, 0});
  REQUIRE(signed_decomposition(9, r) == std::vector<int>{0, -1, 1});
  REQUIRE_FALSE(signed_decomposition(7, r).has_value());
  REQUIRE(oracle::all_signed_decompositions({1, 4, 13}, 7).empty());
  REQUIRE(oracle::all_signed_decompositions({1, 4, 13}, 9).size() == 1);
  REQUIRE_THROWS_AS(signed_decomposition(19, r), Error);
  REQUIRE_THROWS_AS(RieszSpec({1, 3}), Error);
}

TEST_CASE("greedy matches exhaustive search for the canonical heights") {
  for (int K = 1; K <= 6; ++K) {
    std::vector<std::int64_t> n(canonical_heights().begin(), canonical_heights().begin() + K);
    RieszSpec r(n);
    for (std::int64_t m = -r.total(); m <= r.total(); ++m) {
      auto all = oracle::all_signed_decompositions(n, m);
      REQUIRE(all.size() <= 1);
      auto greedy = signed_decomposition(m, r);
      REQUIRE(greedy.has_value() == !all.empty());
      if (greedy) REQUIRE(*greedy == all.front());
    }
  }
}

TEST_CASE("riesz coefficients") {
  RieszSpec r({1, 4, 13});
  REQUIRE(riesz_coefficient(0, r) == 1);
  REQUIRE(riesz_coefficient(5, r) == Rational(1, 4));
  REQUIRE(riesz_coefficient(2, r) == 0);
  REQUIRE(std::abs(oracle::riesz_numeric({1, 4, 13}, 5) - 0.25) < 1e-12);
  REQUIRE(std::abs(oracle::riesz_numeric({1, 4, 13}, 2)) < 1e-12);
  for (std::int64_t m = -40; m <= 40; ++m) {
    REQUIRE(riesz_coefficient(m, r) == riesz_coefficient(-m, r));
    REQUIRE(std::abs(riesz_coefficient(m, r).get_d() - oracle::riesz_numeric({1, 4, 13}, m)) < 1e-10);
  }
}

TEST_CASE("koopman autocorrelation against the column sequence") {
  for (int K = 1; K <= 5; ++K) {
    TowerSystem t(canonical_heights(), K);
    std::int64_t L = t.cycle_length();
    REQUIRE(koopman_autocorrelation(t, 0) == 1);
    REQUIRE(koopman_autocorrelation(t, L) == 1);
    for (std::int64_t lag = -L; lag <= L; ++lag)
      REQUIRE(koopman_autocorrelation(t, lag) == oracle::base_autocorrelation(t.frequencies(), lag));
  }
  TowerSystem t({1, 4, 13});
  REQUIRE_THROWS_AS(koopman_autocorrelation(t, 41), Error);
}

TEST_CASE("autocorrelation is positive definite at truncation") {
  for (int K = 1; K <= 6; ++K) {
    auto weights = autocorrelation_spectrum(TowerSystem(canonical_heights(), K));
    for (double w : weights) REQUIRE(w > -1e-9);
  }
}

TEST_CASE("spectral comparison table") {
  TowerSystem t({1, 4, 13});
  std::vector<std::int64_t> lags{0, 1, 2, 5, 7};
  SpectralThresholds th{"unit", {}};
  for (auto lag : lags) th.per_lag[lag] = 1;
  SpectralReport rep = compare_spectra(t, lags, th);
  REQUIRE(rep.rows.size() == lags.size());
  REQUIRE(rep.rows[0].koopman == 1);
  REQUIRE(rep.rows[0].riesz == 1);
  REQUIRE(rep.rows[0].deviation == 0);
  REQUIRE(rep.rows[2].riesz == 0);
  REQUIRE(rep.rows[4].riesz == 0);
  for (const auto& row : rep.rows) REQUIRE(row.deviation == abs(row.koopman - row.riesz));
  th.per_lag.erase(7);
  REQUIRE_THROWS_AS(compare_spectra(t, lags, th), Error);
}
