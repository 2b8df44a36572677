#pragma once

// Cylinders of {0,1}^Z, the shift, the flip, and exact conformal measures.

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "formal_weight.hpp"

namespace kmslab {

// A finite set of fixed coordinates. The empty set is the whole space.
// Coordinates need not be contiguous; their span is limited to 64.
class Cylinder {
 public:
  Cylinder() = default;

  static Cylinder full_space() { return {}; }

  static Cylinder single(int k, int symbol) { return Cylinder().with(k, symbol); }

  // Contiguous window [lo, lo+length-1]; bit i of `bits` is the symbol at lo+i.
  static Cylinder from_bits(int lo, int length, std::uint64_t bits) {
    if (length < 0 || length > 64) fail(ErrorCode::invalid_cylinder, "window length out of range");
    Cylinder c;
    if (length == 0) return c;
    c.lo_ = lo;
    c.mask_ = length == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << length) - 1;
    c.bits_ = bits & c.mask_;
    return c;
  }

  static Cylinder from_symbols(int lo, const std::vector<int>& symbols) {
    Cylinder c;
    for (std::size_t i = 0; i < symbols.size(); ++i) c = c.with(lo + static_cast<int>(i), symbols[i]);
    return c;
  }

  bool is_full_space() const { return mask_ == 0; }
  bool is_contiguous() const { return (mask_ & (mask_ + 1)) == 0; }
  int lo() const { return lo_; }
  int hi() const { return lo_ + 63 - std::countl_zero(mask_); }
  int size() const { return std::popcount(mask_); }

  std::optional<int> at(int k) const {
    if (is_full_space() || k < lo_ || k > hi()) return std::nullopt;
    std::uint64_t b = std::uint64_t{1} << (k - lo_);
    if (!(mask_ & b)) return std::nullopt;
    return (bits_ & b) ? 1 : 0;
  }

  bool compatible(int k, int symbol) const {
    auto s = at(k);
    return !s || *s == symbol;
  }

  Cylinder with(int k, int symbol) const {
    if (symbol != 0 && symbol != 1) fail(ErrorCode::invalid_cylinder, "symbols are 0 or 1");
    if (auto s = at(k)) {
      if (*s != symbol) fail(ErrorCode::invalid_cylinder, "conflicting symbol at " + std::to_string(k));
      return *this;
    }
    Cylinder c = *this;
    if (is_full_space()) {
      c.lo_ = k;
      c.mask_ = 1;
      c.bits_ = static_cast<std::uint64_t>(symbol);
      return c;
    }
    int new_lo = std::min(lo_, k);
    int new_hi = std::max(hi(), k);
    if (new_hi - new_lo >= 64) fail(ErrorCode::invalid_cylinder, "cylinder span exceeds 64 coordinates");
    int up = lo_ - new_lo;
    c.lo_ = new_lo;
    c.mask_ = mask_ << up;
    c.bits_ = bits_ << up;
    c.mask_ |= std::uint64_t{1} << (k - new_lo);
    if (symbol) c.bits_ |= std::uint64_t{1} << (k - new_lo);
    return c;
  }

  std::vector<std::pair<int, int>> coordinates() const {
    std::vector<std::pair<int, int>> out;
    for (std::uint64_t m = mask_; m; m &= m - 1) {
      int i = std::countr_zero(m);
      out.emplace_back(lo_ + i, static_cast<int>((bits_ >> i) & 1u));
    }
    return out;
  }

  Cylinder shifted(int by) const {
    Cylinder c = *this;
    if (!is_full_space()) c.lo_ += by;
    return c;
  }

  // Coordinate k goes to -k-1.
  Cylinder flipped() const {
    if (is_full_space()) return *this;
    int span = hi() - lo_ + 1;
    Cylinder c;
    c.lo_ = -hi() - 1;
    c.mask_ = reverse(mask_, span);
    c.bits_ = reverse(bits_, span);
    return c;
  }

  std::string window_string() const {
    if (is_full_space()) return "full";
    return "[" + std::to_string(lo_) + "," + std::to_string(hi()) + "]";
  }

  // One character per coordinate of the window, '*' for a free coordinate.
  std::string symbols_string() const {
    if (is_full_space()) return "";
    std::string s;
    for (int k = lo_; k <= hi(); ++k) {
      auto v = at(k);
      s += v ? static_cast<char>('0' + *v) : '*';
    }
    return s;
  }

  friend bool operator==(const Cylinder&, const Cylinder&) = default;

 private:
  static std::uint64_t reverse(std::uint64_t x, int span) {
    std::uint64_t r = 0;
    for (int i = 0; i < span; ++i)
      if (x >> i & 1u) r |= std::uint64_t{1} << (span - 1 - i);
    return r;
  }

  int lo_ = 0;
  std::uint64_t mask_ = 0;
  std::uint64_t bits_ = 0;
};

inline Cylinder shift_cylinder(const Cylinder& c) { return c.shifted(1); }
inline Cylinder flip_cylinder(const Cylinder& c) { return c.flipped(); }

// Values of exp(-beta*chi) on {x_{-1}=0} and {x_{-1}=1}.
struct BoltzmannFactors {
  FormalWeight on_zero;
  FormalWeight on_one;

  static BoltzmannFactors for_beta(double beta) {
    if (beta == 0.0) return {FormalWeight(1), FormalWeight(1)};
    return {FormalWeight::u(), FormalWeight::v(-1)};
  }
};

enum class MeasureKind { product, orbit_atomic, custom };

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::product: return "product";
    case MeasureKind::orbit_atomic: return "orbit-atomic";
    case MeasureKind::custom: return "custom";
  }
  return "?";
}

// Marginal laws of a product measure: probability of each symbol on the
// negative half-line (k<0) and on the nonnegative half-line (k>=0).
struct ProductLaw {
  FormalWeight zero_neg, one_neg, zero_pos, one_pos;

  ProductLaw inverted() const {
    return {zero_neg.inverted(), one_neg.inverted(), zero_pos.inverted(), one_pos.inverted()};
  }
};

class CylinderMeasure {
 public:
  using Oracle = std::function<FormalWeight(const Cylinder&)>;
  using Parameters = std::vector<std::pair<std::string, FormalWeight>>;

  static CylinderMeasure product(ProductLaw law, double beta, double theta) {
    CylinderMeasure m(MeasureKind::product, beta, theta);
    m.parameters_ = {{"p_minus", law.zero_neg}, {"p_plus", law.zero_pos}};
    m.law_ = std::move(law);
    return m;
  }

  static CylinderMeasure custom(MeasureKind kind, Oracle oracle, double beta, double theta,
                                Parameters params = {}) {
    CylinderMeasure m(kind, beta, theta);
    m.oracle_ = std::move(oracle);
    m.parameters_ = std::move(params);
    return m;
  }

  MeasureKind kind() const { return kind_; }
  double beta() const { return beta_; }
  double theta() const { return theta_; }
  const Parameters& parameters() const { return parameters_; }
  const std::optional<ProductLaw>& law() const { return law_; }

  FormalWeight weight(const Cylinder& c) const {
    if (!law_) return oracle_(c);
    int counts[4] = {0, 0, 0, 0};
    for (auto [k, s] : c.coordinates()) ++counts[(k < 0 ? 0 : 2) + s];
    const FormalWeight* f[4] = {&law_->zero_neg, &law_->one_neg, &law_->zero_pos, &law_->one_pos};
    FormalWeight w(1);
    for (int i = 0; i < 4; ++i)
      if (counts[i]) w *= power(*f[i], counts[i]);
    return w;
  }

  // (u, v) at the measure's own (beta, theta).
  std::pair<double, double> variables() const {
    return {std::exp(-beta_), std::exp(-beta_ * theta_)};
  }

  double value(const Cylinder& c) const {
    auto [u, v] = variables();
    return weight(c).evaluate(u, v);
  }

 private:
  CylinderMeasure(MeasureKind kind, double beta, double theta) : kind_(kind), beta_(beta), theta_(theta) {}

  static FormalWeight power(const FormalWeight& f, int n) {
    if (f.numerator().is_monomial()) {
      const auto& [m, c] = *f.numerator().terms().begin();
      auto e = f.exponents();
      return FormalWeight(LaurentPoly::monomial(kmslab::pow(c, n), m.u * n, m.v * n), {e[0] * n, e[1] * n, e[2] * n});
    }
    return f.pow(n);
  }

  MeasureKind kind_;
  double beta_;
  double theta_;
  Parameters parameters_;
  std::optional<ProductLaw> law_;
  Oracle oracle_;
};

inline void require_theta(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) fail(ErrorCode::invalid_argument, "theta must be positive");
}

// Product measure with constant marginals, p_minus = P(x_k=0) for k<0 and p_plus = P(x_k=0) for k>=0.
inline CylinderMeasure make_product_measure(const Rational& p_minus, const Rational& p_plus, double beta, double theta) {
  require_theta(theta);
  if (p_minus < 0 || p_minus > 1 || p_plus < 0 || p_plus > 1)
    fail(ErrorCode::invalid_argument, "probabilities must lie in [0,1]");
  Rational q_minus = 1 - p_minus, q_plus = 1 - p_plus;
  return CylinderMeasure::product(ProductLaw{p_minus, q_minus, p_plus, q_plus}, beta, theta);
}

// p_- = (1-v)/(1-uv), 1-p_- = v(1-u)/(1-uv), p_+ = u p_-, 1-p_+ = (1-u)/(1-uv).
inline CylinderMeasure make_product_conformal(double beta, double theta) {
  require_theta(theta);
  if (beta == 0.0 || !std::isfinite(beta)) fail(ErrorCode::invalid_beta, "beta must be a nonzero real");
  const FormalWeight over = FormalWeight::factor(Factor::one_minus_uv, -1);
  ProductLaw law{
      FormalWeight::factor(Factor::one_minus_v) * over,
      FormalWeight::v() * FormalWeight::factor(Factor::one_minus_u) * over,
      FormalWeight::u() * FormalWeight::factor(Factor::one_minus_v) * over,
      FormalWeight::factor(Factor::one_minus_u) * over,
  };
  return CylinderMeasure::product(std::move(law), beta, theta);
}

// Mass of the orbit atom at tau^k x*, where x*_i = 1 iff i >= 0.
inline FormalWeight orbit_atom_weight(long k) {
  FormalWeight w0 = FormalWeight::factor(Factor::one_minus_u) * FormalWeight::factor(Factor::one_minus_v) *
                    FormalWeight::factor(Factor::one_minus_uv, -1);
  return k >= 0 ? FormalWeight::u(static_cast<int>(k)) * w0 : FormalWeight::v(static_cast<int>(-k)) * w0;
}

namespace detail {

// sum_{j=a}^{b} z^j for z in {u, v}; b = nullopt means infinity.
inline FormalWeight geometric_sum(bool in_u, int a, std::optional<int> b) {
  auto mono = [&](int e) { return in_u ? LaurentPoly::monomial(1, e, 0) : LaurentPoly::monomial(1, 0, e); };
  LaurentPoly num = mono(a);
  if (b) num -= mono(*b + 1);
  return FormalWeight(num) * FormalWeight::factor(in_u ? Factor::one_minus_u : Factor::one_minus_v, -1);
}

}  // namespace detail

inline CylinderMeasure make_orbit_measure(double beta, double theta) {
  require_theta(theta);
  if (!(beta > 0.0) || !std::isfinite(beta))
    fail(ErrorCode::divergent_orbit_weights, "orbit weights are summable only for beta > 0");
  auto oracle = [](const Cylinder& c) {
    // tau^k x* lies in c iff every fixed 1 sits at i >= k and every fixed 0 at i < k.
    std::optional<int> lo, hi;
    for (auto [i, s] : c.coordinates()) {
      if (s == 1) hi = hi ? std::min(*hi, i) : i;
      else lo = lo ? std::max(*lo, i + 1) : i + 1;
    }
    if (lo && hi && *lo > *hi) return FormalWeight();
    FormalWeight w0 = orbit_atom_weight(0);
    FormalWeight sum;
    // k >= 0 atoms carry w0 u^k, k < 0 atoms carry w0 v^{-k}.
    if (!hi || *hi >= 0) sum += detail::geometric_sum(true, lo ? std::max(*lo, 0) : 0, hi);
    if (!lo || *lo <= -1) {
      int first = hi ? std::max(1, -*hi) : 1;
      std::optional<int> last;
      if (lo) last = -*lo;
      if (!last || first <= *last) sum += detail::geometric_sum(false, first, last);
    }
    return sum * w0;
  };
  return CylinderMeasure::custom(MeasureKind::orbit_atomic, oracle, beta, theta, {{"w_0", orbit_atom_weight(0)}});
}

inline CylinderMeasure pushforward_kappa(const CylinderMeasure& m) {
  if (const auto& law = m.law()) {
    ProductLaw flipped{law->zero_pos, law->one_pos, law->zero_neg, law->one_neg};
    return CylinderMeasure::product(flipped.inverted(), -m.beta(), m.theta());
  }
  auto oracle = [m](const Cylinder& c) { return m.weight(c.flipped()).inverted(); };
  CylinderMeasure::Parameters params;
  for (const auto& [name, w] : m.parameters()) params.emplace_back(name + "_flipped", w.inverted());
  return CylinderMeasure::custom(m.kind(), oracle, -m.beta(), m.theta(), std::move(params));
}

inline FormalWeight conformal_rhs(const Cylinder& c, const CylinderMeasure& m) {
  const auto f = BoltzmannFactors::for_beta(m.beta());
  if (auto s = c.at(-1)) return (*s == 0 ? f.on_zero : f.on_one) * m.weight(c);
  return f.on_zero * m.weight(c.with(-1, 0)) + f.on_one * m.weight(c.with(-1, 1));
}

enum class CheckMode { exact, numeric };

struct CheckOptions {
  CheckMode mode = CheckMode::exact;
  double tolerance = 1e-12;
  int max_depth = 10;
  bool keep_rows = true;
};

inline bool numerically_equal(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

struct ConformalityRow {
  Cylinder cylinder;
  FormalWeight lhs;
  FormalWeight rhs;
  bool pass = false;
};

struct ConformalityReport {
  int depth = 0;
  std::vector<ConformalityRow> rows;
  std::size_t tested = 0;
  std::size_t failed = 0;
  double max_residual = 0.0;

  bool verdict() const { return failed == 0; }
};

using RowSink = std::function<void(const ConformalityRow&)>;

// Calls visit on the full space and on every contiguous window inside [-depth, depth].
template <class Visit>
void for_each_cylinder(int depth, Visit&& visit) {
  visit(Cylinder::full_space());
  for (int len = 1; len <= 2 * depth + 1; ++len)
    for (int lo = -depth; lo + len - 1 <= depth; ++lo)
      for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << len); ++bits) visit(Cylinder::from_bits(lo, len, bits));
}

inline std::size_t cylinder_count(int depth) {
  std::size_t n = 1;
  for (int len = 1; len <= 2 * depth + 1; ++len) n += static_cast<std::size_t>(2 * depth + 2 - len) << len;
  return n;
}

namespace detail {

inline void require_depth(int depth, const CheckOptions& opt) {
  if (depth < 1 || depth > opt.max_depth)
    fail(ErrorCode::invalid_argument, "depth must lie in [1," + std::to_string(opt.max_depth) + "]");
  if (opt.mode == CheckMode::numeric && !(opt.tolerance > 0)) fail(ErrorCode::invalid_argument, "tolerance must be positive");
}

}  // namespace detail

// Total mass one and additivity at both adjacent coordinates of every window
// (for product laws, the marginal sums).
// Returns the first offending cylinder.
inline std::optional<Cylinder> find_additivity_violation(const CylinderMeasure& m, int depth,
                                                         const CheckOptions& opt = {}) {
  auto [u, v] = m.variables();
  auto same = [&](const FormalWeight& a, const FormalWeight& b) {
    if (opt.mode == CheckMode::exact) return a == b;
    return numerically_equal(a.evaluate(u, v), b.evaluate(u, v), opt.tolerance);
  };
  if (!same(m.weight(Cylinder::full_space()), FormalWeight(1))) return Cylinder::full_space();
  // A product law is additive on every cylinder iff both marginals sum to one.
  if (const auto& law = m.law()) {
    if (!same(law->zero_neg + law->one_neg, FormalWeight(1))) return Cylinder::full_space().with(-1, 0);
    if (!same(law->zero_pos + law->one_pos, FormalWeight(1))) return Cylinder::full_space().with(0, 0);
    return std::nullopt;
  }
  std::optional<Cylinder> bad;
  for_each_cylinder(depth, [&](const Cylinder& c) {
    if (bad || c.is_full_space()) return;
    FormalWeight w = m.weight(c);
    for (int j : {c.lo() - 1, c.hi() + 1})
      if (!same(w, m.weight(c.with(j, 0)) + m.weight(c.with(j, 1)))) {
        bad = c;
        return;
      }
  });
  return bad;
}

inline ConformalityReport check_conformal(const CylinderMeasure& m, int depth, const CheckOptions& opt = {},
                                          const RowSink& sink = {}) {
  detail::require_depth(depth, opt);
  if (auto bad = find_additivity_violation(m, depth, opt))
    fail(ErrorCode::additivity_violation, "weights are not additive at cylinder " + bad->window_string() + " " +
                                              bad->symbols_string());
  auto [u, v] = m.variables();
  ConformalityReport report;
  report.depth = depth;
  for_each_cylinder(depth, [&](const Cylinder& c) {
    ConformalityRow row{c, m.weight(shift_cylinder(c)), conformal_rhs(c, m), false};
    double residual = 0.0;
    if (opt.mode == CheckMode::exact) {
      row.pass = row.lhs == row.rhs;
      if (!row.pass) residual = std::abs(row.lhs.evaluate(u, v) - row.rhs.evaluate(u, v));
    } else {
      double l = row.lhs.evaluate(u, v), r = row.rhs.evaluate(u, v);
      residual = std::abs(l - r);
      row.pass = numerically_equal(l, r, opt.tolerance);
    }
    report.max_residual = std::max(report.max_residual, residual);
    ++report.tested;
    if (!row.pass) ++report.failed;
    if (sink) sink(row);
    if (opt.keep_rows || !row.pass) report.rows.push_back(std::move(row));
  });
  return report;
}

}  // namespace kmslab
