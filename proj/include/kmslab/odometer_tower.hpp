#pragma once

// Dyadic odometer on {0,1}^K, the Kakutani tower over it, and frequency
// selection for an irrational rotation number.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "rational.hpp"

namespace kmslab {

// Digits are least significant first; digit i is the coordinate x_{i+1}.
struct BaseWord {
  int length = 0;
  std::uint64_t bits = 0;

  int digit(int i) const { return static_cast<int>(bits >> i & 1u); }
  bool all_ones() const { return bits == mask(length); }

  static std::uint64_t mask(int length) { return length == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << length) - 1; }

  std::string to_string() const {
    std::string s;
    for (int i = 0; i < length; ++i) s += static_cast<char>('0' + digit(i));
    return s;
  }

  friend bool operator==(const BaseWord&, const BaseWord&) = default;
};

struct OdometerStep {
  BaseWord word;
  bool overflow = false;
};

// Add one with carry. The all-ones word wraps to zero with the overflow flag set.
inline OdometerStep odometer_step(BaseWord x) {
  std::uint64_t m = BaseWord::mask(x.length);
  bool overflow = x.bits == m;
  return {{x.length, (x.bits + 1) & m}, overflow};
}

class TowerSystem {
 public:
  explicit TowerSystem(std::vector<std::int64_t> n, std::optional<int> k = {}) : n_(std::move(n)) {
    if (k) {
      if (*k < 1 || *k > static_cast<int>(n_.size())) fail(ErrorCode::invalid_frequencies, "K must lie in [1, #heights]");
      n_.resize(static_cast<std::size_t>(*k));
    }
    if (n_.empty() || n_.size() > 62) fail(ErrorCode::invalid_frequencies, "K must lie in [1, 62]");
    if (n_[0] < 1) fail(ErrorCode::invalid_frequencies, "n_1 must be positive");
    for (std::size_t i = 0; i + 1 < n_.size(); ++i)
      if (n_[i + 1] <= 3 * n_[i] || n_[i + 1] > (std::int64_t{1} << 60))
        fail(ErrorCode::invalid_frequencies, "gap condition n_{k+1} > 3 n_k fails at k=" + std::to_string(i + 1));
  }

  int K() const { return static_cast<int>(n_.size()); }
  const std::vector<std::int64_t>& frequencies() const { return n_; }

  // h_k = n_k - (n_1 + ... + n_{k-1}), k = 1..K; h_{K+1} = 3 n_K + 1 - (n_1 + ... + n_K).
  std::int64_t level_height(int k) const {
    if (k < 1 || k > K() + 1) fail(ErrorCode::invalid_argument, "level index out of range");
    std::int64_t nk = k <= K() ? n_[k - 1] : 3 * n_.back() + 1;
    for (int j = 0; j < k - 1; ++j) nk -= n_[j];
    return nk;
  }

  std::int64_t height(BaseWord x) const {
    check_word(x);
    for (int i = 0; i < K(); ++i)
      if (x.digit(i) == 0) return level_height(i + 1);
    return level_height(K() + 1);
  }

  // Number of cells of the truncated tower.
  std::int64_t cycle_length() const {
    std::int64_t total = level_height(K() + 1);
    for (int k = 1; k <= K(); ++k) total += level_height(k) << (K() - k);
    return total;
  }

  void check_word(BaseWord x) const {
    if (x.length != K() || (x.bits & ~BaseWord::mask(x.length)))
      fail(ErrorCode::invalid_argument, "base word does not live on {0,1}^K");
  }

 private:
  std::vector<std::int64_t> n_;
};

inline const std::vector<std::int64_t>& canonical_heights() {
  static const std::vector<std::int64_t> h{1, 4, 13, 40, 121, 364};
  return h;
}

inline std::int64_t height(BaseWord x, const TowerSystem& t) { return t.height(x); }

struct TowerPoint {
  BaseWord base;
  std::int64_t level = 1;

  friend bool operator==(const TowerPoint&, const TowerPoint&) = default;
};

inline TowerPoint tower_step(const TowerPoint& p, const TowerSystem& t) {
  std::int64_t h = t.height(p.base);
  if (p.level < 1 || p.level > h)
    fail(ErrorCode::invalid_level, "level " + std::to_string(p.level) + " outside [1," + std::to_string(h) + "]");
  if (p.level < h) return {p.base, p.level + 1};
  return {odometer_step(p.base).word, 1};
}

// Sum over first-zero classes of Haar mass times height, plus the all-ones cell.
inline Rational tower_mass(const TowerSystem& t, bool include_all_ones_cell = true) {
  Rational m = 0;
  for (int k = 1; k <= t.K(); ++k) m += dyadic(k) * Rational(static_cast<long>(t.level_height(k)));
  if (include_all_ones_cell) m += dyadic(t.K()) * Rational(static_cast<long>(t.level_height(t.K() + 1)));
  return m;
}

// The step map visits every cell exactly once before returning, and the
// return time equals the sum of heights over {0,1}^K.
template <class Step>
bool kac_check(const TowerSystem& t, Step&& step) {
  std::size_t words = std::size_t{1} << t.K();
  std::vector<std::int64_t> offsets(words + 1, 0);
  for (std::size_t b = 0; b < words; ++b) offsets[b + 1] = offsets[b] + t.height({t.K(), b});
  std::int64_t expected = offsets[words];
  if (expected != t.cycle_length()) return false;
  std::vector<bool> seen(static_cast<std::size_t>(expected), false);
  TowerPoint start{{t.K(), 0}, 1};
  TowerPoint p = start;
  for (std::int64_t i = 0; i < expected; ++i) {
    if (p.level < 1 || p.level > t.height(p.base)) return false;
    std::size_t idx = static_cast<std::size_t>(offsets[p.base.bits] + p.level - 1);
    if (seen[idx]) return false;
    seen[idx] = true;
    try {
      p = step(p, t);
    } catch (const Error&) {
      return false;
    }
  }
  return p == start;
}

inline bool kac_check(const TowerSystem& t) { return kac_check(t, tower_step); }

// The orbit of ((0,...,0), 1) over one full cycle.
inline std::vector<TowerPoint> tower_orbit(const TowerSystem& t) {
  std::vector<TowerPoint> orbit;
  orbit.reserve(static_cast<std::size_t>(t.cycle_length()));
  TowerPoint p{{t.K(), 0}, 1};
  for (std::int64_t i = 0; i < t.cycle_length(); ++i) {
    orbit.push_back(p);
    p = tower_step(p, t);
  }
  return orbit;
}

namespace detail {

inline double chord_squared(double frac) {
  double s = std::sin(std::numbers::pi * frac);
  return 4.0 * s * s;
}

inline void check_upto(int upto, const TowerSystem& t) {
  if (upto < 0 || upto > t.K()) fail(ErrorCode::invalid_argument, "upto must lie in [0, K]");
}

}  // namespace detail

// sum_{k <= upto} |1 - exp(2 pi i n_k s)|^2.
inline double eigen_partial_sum(const Rational& s, const TowerSystem& t, int upto) {
  detail::check_upto(upto, t);
  double sum = 0.0;
  for (int k = 0; k < upto; ++k) {
    Rational x = s * Rational(static_cast<long>(t.frequencies()[k]));
    Integer fl;
    mpz_fdiv_q(fl.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
    Rational frac = x - Rational(fl);
    if (frac != 0) sum += detail::chord_squared(frac.get_d());
  }
  return sum;
}

inline double eigen_partial_sum(double s, const TowerSystem& t, int upto) {
  detail::check_upto(upto, t);
  double sum = 0.0;
  for (int k = 0; k < upto; ++k) {
    double x = static_cast<double>(t.frequencies()[k]) * s;
    sum += detail::chord_squared(x - std::floor(x));
  }
  return sum;
}

// A real number known to lie in [lo, hi]; lo == hi for exact rationals.
struct AlphaInterval {
  Rational lo;
  Rational hi;
  std::string label;

  static AlphaInterval exact(const Rational& r) { return {r, r, r.get_str()}; }

  // (p + sqrt(d)) / q to `digits` decimal digits.
  static AlphaInterval surd(long p, long d, long q, int digits = 60) {
    if (d < 0 || q <= 0 || digits < 1) fail(ErrorCode::invalid_argument, "surd needs d >= 0, q > 0");
    Integer scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(digits));
    Integer radicand = Integer(d) * scale * scale;
    Integer s;
    mpz_sqrt(s.get_mpz_t(), radicand.get_mpz_t());
    Integer denom = Integer(q) * scale;
    Rational lo(Integer(p) * scale + s, denom), hi(Integer(p) * scale + s + (s * s == radicand ? 0 : 1), denom);
    lo.canonicalize();
    hi.canonicalize();
    std::string label = "(" + std::to_string(p) + "+sqrt(" + std::to_string(d) + "))/" + std::to_string(q);
    return {lo, hi, label};
  }

  // A decimal literal taken as exact to its last digit: the interval has half-ulp width.
  static AlphaInterval decimal(const std::string& text) {
    Rational mid = parse_rational(text);
    auto dot = text.find('.');
    long places = dot == std::string::npos ? 0 : static_cast<long>(text.size() - dot - 1);
    Rational half_ulp = dyadic(1) * pow(Rational(1, 10), places);
    return {mid - half_ulp, mid + half_ulp, text};
  }

  bool is_exact() const { return lo == hi; }
  Rational width() const { return hi - lo; }
};

struct FrequencyPlan {
  std::string alpha;
  std::vector<Integer> n;
  std::vector<int> convergent_index;
  std::vector<double> certificates;
};

namespace detail {

inline Integer floor_of(const Rational& r) {
  Integer f;
  mpz_fdiv_q(f.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
  return f;
}

// Convergent denominators q_j of a number known up to an interval.
class ContinuedFraction {
 public:
  explicit ContinuedFraction(const AlphaInterval& a) : lo_(a.lo), hi_(a.hi) {}

  enum class Status { ok, terminated, exhausted };

  // Advances to the next partial quotient and returns its convergent denominator.
  Status next(Integer& q) {
    if (done_) return Status::terminated;
    Integer a = floor_of(lo_);
    if (a != floor_of(hi_)) return Status::exhausted;
    Integer qj = a * q1_ + q2_;
    q2_ = q1_;
    q1_ = qj;
    q = qj;
    Rational flo = lo_ - Rational(a), fhi = hi_ - Rational(a);
    if (flo == 0 && fhi == 0) done_ = true;
    else if (flo == 0) stalled_ = true;
    else {
      lo_ = 1 / fhi;
      hi_ = 1 / flo;
    }
    return Status::ok;
  }

  bool stalled() const { return stalled_; }
  bool terminated() const { return done_; }

 private:
  Rational lo_, hi_;
  bool done_ = false;
  bool stalled_ = false;
  Integer q1_ = 0, q2_ = 1;
};

}  // namespace detail

// n_k = q_{j_k} + 1 with q_j the convergent denominators (j >= 1). A candidate
// is taken when it clears n_{k+1} > 3 n_k and lowers the certificate
// |exp(2 pi i q alpha) - 1| = 2 sin(pi ||q alpha||); the last one must also beat tol.
inline FrequencyPlan choose_frequencies(const AlphaInterval& alpha, int count, double tol) {
  if (count < 1 || count > 64) fail(ErrorCode::invalid_argument, "count must lie in [1, 64]");
  if (!(tol > 0)) fail(ErrorCode::invalid_argument, "tolerance must be positive");
  if (alpha.lo > alpha.hi) fail(ErrorCode::invalid_argument, "empty alpha interval");
  FrequencyPlan plan;
  plan.alpha = alpha.label;
  detail::ContinuedFraction cf(alpha);
  Rational mid = (alpha.lo + alpha.hi) / 2;
  Integer q;
  for (int j = 0;; ++j) {
    if (cf.terminated()) fail(ErrorCode::rational_alpha, "continued fraction of " + alpha.label + " terminates");
    if (cf.stalled()) fail(ErrorCode::precision_exhausted, "alpha interval too wide for further convergents");
    auto status = cf.next(q);
    if (status == detail::ContinuedFraction::Status::exhausted)
      fail(ErrorCode::precision_exhausted, "alpha interval too wide for further convergents");
    if (j == 0) continue;
    // ||q alpha|| from the midpoint; the interval error must be negligible.
    Rational x = Rational(q) * mid;
    Rational frac = x - Rational(detail::floor_of(x));
    Rational dist = frac > Rational(1, 2) ? Rational(1 - frac) : frac;
    if (dist == 0) {
      if (alpha.is_exact()) fail(ErrorCode::rational_alpha, "continued fraction of " + alpha.label + " terminates");
      fail(ErrorCode::precision_exhausted, "alpha interval too wide for further convergents");
    }
    if (Rational(q) * alpha.width() * 1000000 > dist)
      fail(ErrorCode::precision_exhausted, "alpha interval too wide to certify ||q alpha||");
    double cert = 2.0 * std::sin(std::numbers::pi * dist.get_d());
    Integer n = q + 1;
    bool gap = plan.n.empty() || n > 3 * plan.n.back();
    bool lower = plan.certificates.empty() || cert < plan.certificates.back();
    bool last = static_cast<int>(plan.n.size()) + 1 == count;
    if (gap && lower && (!last || cert < tol)) {
      plan.n.push_back(n);
      plan.convergent_index.push_back(j);
      plan.certificates.push_back(cert);
      if (static_cast<int>(plan.n.size()) == count) return plan;
    }
  }
}

}  // namespace kmslab
