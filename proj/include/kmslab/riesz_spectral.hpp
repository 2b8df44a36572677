#pragma once

// Fourier coefficients of the Riesz product prod_k (1 + cos 2 pi n_k t) and
// their comparison with return statistics of the truncated tower.

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "odometer_tower.hpp"

namespace kmslab {

class RieszSpec {
 public:
  explicit RieszSpec(std::vector<std::int64_t> n) : n_(std::move(n)) {
    if (n_.empty()) fail(ErrorCode::invalid_frequencies, "no frequencies");
    if (n_[0] < 1) fail(ErrorCode::invalid_frequencies, "frequencies must be positive");
    for (std::size_t i = 0; i + 1 < n_.size(); ++i)
      if (n_[i + 1] <= 3 * n_[i]) fail(ErrorCode::invalid_frequencies, "gap condition fails at k=" + std::to_string(i + 1));
  }

  explicit RieszSpec(const TowerSystem& t) : RieszSpec(t.frequencies()) {}

  const std::vector<std::int64_t>& frequencies() const { return n_; }
  int K() const { return static_cast<int>(n_.size()); }

  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto x : n_) s += x;
    return s;
  }

 private:
  std::vector<std::int64_t> n_;
};

// The eps in {-1,0,1}^K with m = sum eps_k n_k. Greedy from the top: the
// smaller frequencies sum to less than n_k / 2, so each choice is forced.
inline std::optional<std::vector<int>> signed_decomposition(std::int64_t m, const RieszSpec& r) {
  if (m > r.total() || m < -r.total()) fail(ErrorCode::invalid_argument, "|m| exceeds the sum of the frequencies");
  const auto& n = r.frequencies();
  std::vector<std::int64_t> below(n.size() + 1, 0);
  for (std::size_t k = 0; k < n.size(); ++k) below[k + 1] = below[k] + n[k];
  std::vector<int> eps(n.size(), 0);
  std::int64_t rest = m;
  for (std::size_t k = n.size(); k-- > 0;) {
    if (rest > below[k]) {
      eps[k] = 1;
      rest -= n[k];
    } else if (rest < -below[k]) {
      eps[k] = -1;
      rest += n[k];
    }
  }
  if (rest != 0) return std::nullopt;
  return eps;
}

inline Rational riesz_coefficient(std::int64_t m, const RieszSpec& r) {
  if (m > r.total() || m < -r.total()) return 0;
  auto eps = signed_decomposition(m, r);
  if (!eps) return 0;
  long used = 0;
  for (int e : *eps) used += e != 0;
  return dyadic(used);
}

// Number of base cells B (level 1) with T^lag(c) also in B, per lag in [0, L).
inline std::vector<std::int64_t> base_return_counts(const TowerSystem& t) {
  auto orbit = tower_orbit(t);
  std::size_t L = orbit.size();
  std::vector<std::int64_t> counts(L, 0);
  std::vector<std::size_t> base;
  for (std::size_t i = 0; i < L; ++i)
    if (orbit[i].level == 1) base.push_back(i);
  std::vector<bool> in_base(L, false);
  for (auto i : base) in_base[i] = true;
  for (std::size_t lag = 0; lag < L; ++lag)
    for (auto i : base) counts[lag] += in_base[(i + lag) % L];
  return counts;
}

// <U^lag 1_B, 1_B> / nu(B) with Haar cell mass 2^-K; nu(B) = 1.
inline Rational koopman_autocorrelation(const TowerSystem& t, std::int64_t lag) {
  std::int64_t L = t.cycle_length();
  if (lag > L || lag < -L) fail(ErrorCode::invalid_argument, "lag exceeds the cycle length");
  auto counts = base_return_counts(t);
  std::int64_t l = ((lag % L) + L) % L;
  return Rational(static_cast<long>(counts[static_cast<std::size_t>(l)])) * dyadic(t.K());
}

inline std::vector<Rational> koopman_autocorrelations(const TowerSystem& t, const std::vector<std::int64_t>& lags) {
  std::int64_t L = t.cycle_length();
  auto counts = base_return_counts(t);
  std::vector<Rational> out;
  for (auto lag : lags) {
    if (lag > L || lag < -L) fail(ErrorCode::invalid_argument, "lag exceeds the cycle length");
    std::int64_t l = ((lag % L) + L) % L;
    out.push_back(Rational(static_cast<long>(counts[static_cast<std::size_t>(l)])) * dyadic(t.K()));
  }
  return out;
}

// Spectral weights of the periodic autocorrelation sequence: its discrete
// Fourier transform over one cycle. Nonnegative for a positive-definite sequence.
inline std::vector<double> autocorrelation_spectrum(const TowerSystem& t) {
  auto counts = base_return_counts(t);
  std::size_t L = counts.size();
  double scale = std::ldexp(1.0, -t.K());
  std::vector<double> weights(L);
  for (std::size_t j = 0; j < L; ++j) {
    std::complex<double> s = 0;
    for (std::size_t l = 0; l < L; ++l)
      s += static_cast<double>(counts[l]) * scale *
           std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((j * l) % L) / static_cast<double>(L));
    weights[j] = s.real();
  }
  return weights;
}

inline const char* probe_vector_label() { return "indicator of the tower base (level 1)"; }

struct SpectralRow {
  std::int64_t lag = 0;
  Rational koopman;
  Rational riesz;
  Rational deviation;
  Rational threshold;
  bool pass = false;
};

struct SpectralReport {
  std::string probe = probe_vector_label();
  std::string threshold_source;
  std::vector<SpectralRow> rows;

  bool verdict() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }
  Rational max_deviation() const {
    Rational m = 0;
    for (const auto& r : rows)
      if (r.deviation > m) m = r.deviation;
    return m;
  }
};

// Thresholds are fixed per lag by an earlier brute-force run.
struct SpectralThresholds {
  std::string source;
  std::map<std::int64_t, Rational> per_lag;
};

inline SpectralReport compare_spectra(const TowerSystem& t, const std::vector<std::int64_t>& lags,
                                      const SpectralThresholds& thresholds) {
  RieszSpec spec(t);
  auto koopman = koopman_autocorrelations(t, lags);
  SpectralReport report;
  report.threshold_source = thresholds.source;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    auto it = thresholds.per_lag.find(lags[i]);
    if (it == thresholds.per_lag.end())
      fail(ErrorCode::invalid_argument, "no threshold recorded for lag " + std::to_string(lags[i]));
    SpectralRow row;
    row.lag = lags[i];
    row.koopman = koopman[i];
    row.riesz = riesz_coefficient(lags[i], spec);
    row.deviation = abs(row.koopman - row.riesz);
    row.threshold = it->second;
    row.pass = row.deviation <= row.threshold;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace kmslab
