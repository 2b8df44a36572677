#pragma once

// Staircase profiles for hereditary subsets of Z^2, the Omega x Z
// parametrisation, lifted measures, and SL2(Z) reparametrisations.

#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "symbolic_space.hpp"

namespace kmslab {

class Height {
 public:
  enum class Kind { neg_inf, finite, pos_inf };

  constexpr Height() = default;
  constexpr Height(std::int64_t v) : value_(v) {}

  static constexpr Height pos_inf() { return Height(Kind::pos_inf); }
  static constexpr Height neg_inf() { return Height(Kind::neg_inf); }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_finite() const { return kind_ == Kind::finite; }
  std::int64_t value() const {
    if (!is_finite()) fail(ErrorCode::invalid_argument, "infinite height has no value");
    return value_;
  }

  constexpr Height operator+(std::int64_t d) const { return is_finite() ? Height(value_ + d) : *this; }

  friend constexpr bool operator==(const Height&, const Height&) = default;
  friend constexpr std::strong_ordering operator<=>(const Height& a, const Height& b) {
    if (a.kind_ != b.kind_) return a.kind_ <=> b.kind_;
    return a.is_finite() ? a.value_ <=> b.value_ : std::strong_ordering::equal;
  }

  std::string to_string() const {
    switch (kind_) {
      case Kind::neg_inf: return "-inf";
      case Kind::pos_inf: return "inf";
      case Kind::finite: break;
    }
    return std::to_string(value_);
  }

 private:
  constexpr explicit Height(Kind k) : kind_(k) {}

  Kind kind_ = Kind::finite;
  std::int64_t value_ = 0;
};

struct LatticeVector {
  std::int64_t m = 0;
  std::int64_t n = 0;

  // Coordinates with respect to v1 = (1,0), v2 = (1,1).
  LatticeVector to_skewed() const { return {m - n, n}; }
  static LatticeVector from_skewed(std::int64_t alpha, std::int64_t gamma) { return {alpha + gamma, gamma}; }

  friend LatticeVector operator+(LatticeVector a, LatticeVector b) { return {a.m + b.m, a.n + b.n}; }
  friend LatticeVector operator-(LatticeVector a, LatticeVector b) { return {a.m - b.m, a.n - b.n}; }
  friend bool operator==(const LatticeVector&, const LatticeVector&) = default;
  friend auto operator<=>(const LatticeVector&, const LatticeVector&) = default;
};

inline constexpr LatticeVector e1{1, 0};
inline constexpr LatticeVector e2{0, 1};
inline constexpr LatticeVector v1{1, 0};
inline constexpr LatticeVector v2{1, 1};

// skewed:   A = { m v1 + n v2 : n <= a_m }, the convention of the Omega x Z picture.
// standard: A = { (m, n) : n <= a_m }.
enum class Basis { skewed, standard };

class StaircaseProfile {
 public:
  StaircaseProfile(Basis basis, std::int64_t lo, std::vector<Height> heights)
      : basis_(basis), lo_(lo), heights_(std::move(heights)) {
    if (heights_.empty()) fail(ErrorCode::invalid_argument, "profile window is empty");
    for (std::size_t i = 0; i + 1 < heights_.size(); ++i) {
      const Height &a = heights_[i], &b = heights_[i + 1];
      bool ok = b <= a;
      // In skewed coordinates A must also be closed under -e2 = v1 - v2.
      if (ok && basis_ == Basis::skewed) ok = a.is_finite() ? b.is_finite() && a.value() - b.value() <= 1 : a == b;
      if (!ok) fail(ErrorCode::invalid_argument, "profile is not hereditary at column " + std::to_string(lo_ + static_cast<std::int64_t>(i)));
    }
  }

  Basis basis() const { return basis_; }
  std::int64_t lo() const { return lo_; }
  std::int64_t hi() const { return lo_ + static_cast<std::int64_t>(heights_.size()) - 1; }
  const std::vector<Height>& heights() const { return heights_; }

  const Height& at(std::int64_t m) const {
    if (m < lo_ || m > hi()) fail(ErrorCode::window_too_small, "column " + std::to_string(m) + " outside profile window");
    return heights_[static_cast<std::size_t>(m - lo_)];
  }

  StaircaseProfile restricted(std::int64_t lo, std::int64_t hi) const {
    if (lo > hi || lo < lo_ || hi > this->hi()) fail(ErrorCode::window_too_small, "restriction leaves the profile window");
    return StaircaseProfile(basis_, lo, {heights_.begin() + (lo - lo_), heights_.begin() + (hi - lo_ + 1)});
  }

  friend bool operator==(const StaircaseProfile&, const StaircaseProfile&) = default;

 private:
  Basis basis_;
  std::int64_t lo_;
  std::vector<Height> heights_;
};

// Column range determined by a word on [p, q].
inline std::pair<std::int64_t, std::int64_t> determined_columns(const Cylinder& word) {
  std::int64_t p = word.lo(), q = word.hi();
  return {q >= -1 ? std::min<std::int64_t>(p, 0) : 0, p <= 0 ? std::max<std::int64_t>(q + 1, 0) : 0};
}

// a(x,t)_m = t - (x_0 + ... + x_{m-1}) for m > 0, t for m = 0, t + (x_m + ... + x_{-1}) for m < 0.
inline StaircaseProfile profile_from_word(const Cylinder& word, std::int64_t t,
                                          std::optional<std::pair<std::int64_t, std::int64_t>> columns = {}) {
  if (word.is_full_space() || !word.is_contiguous()) fail(ErrorCode::invalid_argument, "word must be a contiguous cylinder");
  auto [lo, hi] = determined_columns(word);
  if (columns) {
    if (columns->first < lo || columns->second > hi || columns->first > columns->second)
      fail(ErrorCode::window_too_small, "requested columns exceed the word support");
    std::tie(lo, hi) = *columns;
  }
  std::vector<Height> h;
  for (std::int64_t m = lo; m <= hi; ++m) {
    std::int64_t a = t;
    if (m > 0)
      for (std::int64_t j = 0; j < m; ++j) a -= *word.at(static_cast<int>(j));
    else
      for (std::int64_t j = m; j <= -1; ++j) a += *word.at(static_cast<int>(j));
    h.emplace_back(a);
  }
  return StaircaseProfile(Basis::skewed, lo, std::move(h));
}

inline StaircaseProfile translate_profile(const StaircaseProfile& a, LatticeVector s) {
  LatticeVector d = a.basis() == Basis::skewed ? s.to_skewed() : s;
  std::vector<Height> h;
  h.reserve(a.heights().size());
  for (const Height& x : a.heights()) h.push_back(x + d.n);
  return StaircaseProfile(a.basis(), a.lo() + d.m, std::move(h));
}

inline StaircaseProfile translate_profile(const StaircaseProfile& a, LatticeVector s, std::int64_t lo, std::int64_t hi) {
  return translate_profile(a, s).restricted(lo, hi);
}

// Equality on the intersection of the two windows.
inline bool agree_on_common_window(const StaircaseProfile& a, const StaircaseProfile& b) {
  if (a.basis() != b.basis()) fail(ErrorCode::invalid_argument, "profiles use different bases");
  std::int64_t lo = std::max(a.lo(), b.lo()), hi = std::min(a.hi(), b.hi());
  if (lo > hi) fail(ErrorCode::window_too_small, "profiles share no column");
  for (std::int64_t m = lo; m <= hi; ++m)
    if (a.at(m) != b.at(m)) return false;
  return true;
}

enum class Generator { v1, v2 };

inline std::string to_string(Generator g) { return g == Generator::v1 ? "v1" : "v2"; }

// A(x,t) + v1 = A(tau x, x_{-1} + t) and A(x,t) + v2 = A(x, t+1).
inline bool check_equivariance(const Cylinder& word, std::int64_t t, Generator g) {
  StaircaseProfile a = profile_from_word(word, t);
  if (g == Generator::v2) return agree_on_common_window(translate_profile(a, v2), profile_from_word(word, t + 1));
  auto last = word.at(-1);
  if (!last) fail(ErrorCode::window_too_small, "word does not fix x_{-1}");
  return agree_on_common_window(translate_profile(a, v1), profile_from_word(shift_cylinder(word), t + *last));
}

struct EquivarianceRow {
  Cylinder word;
  std::int64_t t = 0;
  Generator generator = Generator::v1;
  bool pass = false;
};

// Every word on [lo, hi], every t in [t_lo, t_hi], both generators.
inline std::vector<EquivarianceRow> equivariance_sweep(int lo, int hi, std::int64_t t_lo, std::int64_t t_hi) {
  std::vector<EquivarianceRow> rows;
  int len = hi - lo + 1;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << len); ++bits) {
    Cylinder w = Cylinder::from_bits(lo, len, bits);
    for (std::int64_t t = t_lo; t <= t_hi; ++t)
      for (Generator g : {Generator::v1, Generator::v2}) rows.push_back({w, t, g, check_equivariance(w, t, g)});
  }
  return rows;
}

// psi^{-1}(A) = {(n, m) : (m, n) in A}, read inside the box W x W with W the
// profile window. Heights at or above the top of W become +inf, heights below W become -inf.
inline StaircaseProfile normalize_box(const StaircaseProfile& a) {
  std::vector<Height> h;
  for (const Height& x : a.heights()) {
    if (x >= Height(a.hi())) h.push_back(Height::pos_inf());
    else if (x < Height(a.lo())) h.push_back(Height::neg_inf());
    else h.push_back(x);
  }
  return StaircaseProfile(a.basis(), a.lo(), std::move(h));
}

inline StaircaseProfile apply_psi(const StaircaseProfile& a) {
  if (a.basis() != Basis::standard) fail(ErrorCode::invalid_argument, "apply_psi expects standard coordinates");
  std::vector<Height> h;
  for (std::int64_t p = a.lo(); p <= a.hi(); ++p) {
    Height b = Height::neg_inf();
    for (std::int64_t q = a.lo(); q <= a.hi(); ++q)
      if (a.at(q) >= Height(p)) b = Height(q);
    h.push_back(b);
  }
  return normalize_box(StaircaseProfile(Basis::standard, a.lo(), std::move(h)));
}

class LiftedMeasure {
 public:
  explicit LiftedMeasure(CylinderMeasure base) : base_(std::move(base)), factors_(BoltzmannFactors::for_beta(base_.beta())) {}

  const CylinderMeasure& base() const { return base_; }
  double beta() const { return base_.beta(); }
  double theta() const { return base_.theta(); }

  // exp(-beta(1+theta)) = u v.
  FormalWeight slice_factor() const { return factors_.on_zero * factors_.on_one.reciprocal(); }
  // exp(-beta c(v1)) = exp(-beta) = u.
  FormalWeight v1_factor() const { return factors_.on_zero; }

  FormalWeight weight(const Cylinder& e, long n) const { return slice_factor().pow(static_cast<int>(n)) * base_.weight(e); }

  // Mass of (E x {n}) + v1, pushed through (x,t) -> (tau x, x_{-1} + t).
  FormalWeight v1_image_weight(const Cylinder& e, long n) const {
    FormalWeight sum;
    for (int s : {0, 1})
      if (e.compatible(-1, s)) sum += weight(shift_cylinder(e.with(-1, s)), n + s);
    return sum;
  }

  FormalWeight v2_image_weight(const Cylinder& e, long n) const { return weight(e, n + 1); }

 private:
  CylinderMeasure base_;
  BoltzmannFactors factors_;
};

inline LiftedMeasure lift_measure(const CylinderMeasure& m, int verify_depth = 4, const CheckOptions& opt = {}) {
  if (!check_conformal(m, verify_depth, opt).verdict())
    fail(ErrorCode::not_conformal, "base measure fails the conformality check at depth " + std::to_string(verify_depth));
  return LiftedMeasure(m);
}

struct LiftRow {
  Cylinder cylinder;
  long slice = 0;
  Generator generator = Generator::v1;
  bool pass = false;
};

struct LiftReport {
  std::size_t tested = 0;
  std::size_t failed = 0;
  std::vector<LiftRow> failures;

  bool verdict() const { return failed == 0; }
};

inline LiftReport check_lift(const LiftedMeasure& lm, int depth, long max_slice, const CheckOptions& opt = {}) {
  auto [u, v] = lm.base().variables();
  auto same = [&](const FormalWeight& a, const FormalWeight& b) {
    if (opt.mode == CheckMode::exact) return a == b;
    return numerically_equal(a.evaluate(u, v), b.evaluate(u, v), opt.tolerance);
  };
  LiftReport report;
  for_each_cylinder(depth, [&](const Cylinder& c) {
    for (long n = -max_slice; n <= max_slice; ++n) {
      FormalWeight w = lm.weight(c, n);
      const std::pair<Generator, bool> checks[] = {
          {Generator::v1, same(lm.v1_image_weight(c, n), lm.v1_factor() * w)},
          {Generator::v2, same(lm.v2_image_weight(c, n), lm.slice_factor() * w)},
      };
      for (auto [g, ok] : checks) {
        ++report.tested;
        if (!ok) {
          ++report.failed;
          report.failures.push_back({c, n, g, false});
        }
      }
    }
  });
  return report;
}

struct Sl2Reparam {
  std::int64_t x = 1, y = 0, z = 0, w = 1;

  std::int64_t det() const { return x * w - y * z; }
  LatticeVector apply(LatticeVector s) const { return {x * s.m + y * s.n, z * s.m + w * s.n}; }
  friend bool operator==(const Sl2Reparam&, const Sl2Reparam&) = default;
};

inline bool satisfies_constraints(const Sl2Reparam& phi, std::int64_t p, std::int64_t q) {
  return phi.det() == 1 && phi.x >= 0 && phi.y >= 0 && phi.z >= 0 && phi.w >= 0 && phi.x + phi.z == q &&
         phi.y + phi.w == p;
}

// (1/q) c(phi(s)) = c_theta(s) on both generators, c(m,n) = m + n and theta = p/q.
inline bool cocycle_matches(const Sl2Reparam& phi, std::int64_t p, std::int64_t q) {
  auto c = [](LatticeVector s) { return Rational(static_cast<long>(s.m + s.n)); };
  Rational theta = make_rational(p, q);
  Rational qq(static_cast<long>(q));
  return c(phi.apply(e1)) / qq == 1 && c(phi.apply(e2)) / qq == theta;
}

// Solution with x in [1, q], x = p^{-1} mod q.
inline Sl2Reparam make_phi(std::int64_t p, std::int64_t q) {
  if (p <= 0 || q <= 0) fail(ErrorCode::invalid_argument, "p and q must be positive");
  if (std::gcd(p, q) != 1) fail(ErrorCode::not_coprime, std::to_string(p) + " and " + std::to_string(q) + " share a factor");
  std::int64_t old_r = p % q, r = q, old_s = 1, s = 0;
  while (r != 0) {
    std::int64_t k = old_r / r;
    std::tie(old_r, r) = std::pair{r, old_r - k * r};
    std::tie(old_s, s) = std::pair{s, old_s - k * s};
  }
  std::int64_t x = ((old_s % q) + q) % q;
  if (x == 0) x = q;
  std::int64_t y = (x * p - 1) / q;
  return {x, y, q - x, p - y};
}

}  // namespace kmslab
