#pragma once

// Finite compressions of operators on l^2(base x N) and the bookkeeping that
// says where a compression still agrees with the operator it truncates.
//
// Every column j of a TruncatedOperator carries a "lossy" flag: set when the
// untruncated operator sends e_j partly outside the window. An expression is
// safe at a cell if no letter is ever applied to a lossy column while
// tracking the support of e_cell through it; on safe cells the truncated and
// untruncated expressions agree exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lattice_space.hpp"
#include "rational.hpp"

namespace kmslab {

using Complex = std::complex<double>;

template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<Rational> {
  using Real = Rational;
  static constexpr bool exact = true;
  static Rational conj(const Rational& x) { return x; }
  static Rational norm(const Rational& x) { return x * x; }
  static double magnitude(const Rational& x) { return std::abs(x.get_d()); }
  static Rational from(const Rational& r) { return r; }
  static double to_double(const Rational& r) { return r.get_d(); }
};

template <>
struct ScalarTraits<double> {
  using Real = double;
  static constexpr bool exact = false;
  static double conj(double x) { return x; }
  static double norm(double x) { return x * x; }
  static double magnitude(double x) { return std::abs(x); }
  static double from(const Rational& r) { return r.get_d(); }
  static double to_double(double r) { return r; }
};

template <>
struct ScalarTraits<Complex> {
  using Real = double;
  static constexpr bool exact = false;
  static Complex conj(const Complex& x) { return std::conj(x); }
  static double norm(const Complex& x) { return std::norm(x); }
  static double magnitude(const Complex& x) { return std::abs(x); }
  static Complex from(const Rational& r) { return {r.get_d(), 0.0}; }
  static double to_double(double r) { return r; }
};

template <class S>
bool negligible(const S& x, double tol) {
  if constexpr (ScalarTraits<S>::exact)
    return x == 0;
  else
    return ScalarTraits<S>::magnitude(x) <= tol;
}

// Inverse temperature. When e^{-beta/2} is rational it is kept exactly.
class Beta {
 public:
  Beta() = default;

  static Beta from_half_factor(const Rational& h) {
    if (h <= 0) fail(ErrorCode::invalid_beta, "e^{-beta/2} must be positive");
    Beta b;
    b.half_ = h;
    b.value_ = -2.0 * std::log(h.get_d());
    return b;
  }
  static Beta numeric(double beta) {
    if (!std::isfinite(beta)) fail(ErrorCode::invalid_beta, "beta must be finite");
    Beta b;
    b.value_ = beta;
    if (beta != 0) b.half_.reset();
    return b;
  }

  double value() const { return value_; }
  bool exact() const { return half_.has_value(); }
  const std::optional<Rational>& half_factor() const { return half_; }

  // e^{-beta n/2}
  template <class S>
  S half_power(std::int64_t n) const {
    if constexpr (ScalarTraits<S>::exact) {
      if (!half_) fail(ErrorCode::invalid_beta, "beta has no exact half factor");
      return pow(*half_, n);
    } else if (half_) {
      return ScalarTraits<S>::from(pow(*half_, n));
    } else {
      return S(std::exp(-value_ * static_cast<double>(n) / 2.0));
    }
  }

  std::string to_string() const {
    if (half_) return *half_ == 1 ? "0" : "-2ln(" + kmslab::to_string(*half_) + ")";
    return std::to_string(value_);
  }

 private:
  double value_ = 0;
  std::optional<Rational> half_ = Rational(1);
};

// Cells (b, s): base point b, fiber level s in [0, fiber).
struct CellGrid {
  std::size_t base = 0;
  std::size_t fiber = 0;
  bool closed = false;

  std::size_t size() const { return base * fiber; }
  std::size_t index(std::size_t b, std::size_t s) const { return b * fiber + s; }
  std::size_t base_of(std::size_t c) const { return c / fiber; }
  std::size_t fiber_of(std::size_t c) const { return c % fiber; }

  std::size_t base_distance(std::size_t b1, std::size_t b2) const {
    std::size_t d = b1 > b2 ? b1 - b2 : b2 - b1;
    return closed ? std::min(d, base - d) : d;
  }
};

// How far one application moves support: fiber levels and base points.
struct Margin {
  std::int64_t fiber = 0;
  std::int64_t base = 0;
};

template <class S>
using SparseVector = std::map<std::size_t, S>;

template <class S>
class TruncatedOperator {
 public:
  using Column = std::vector<std::pair<std::size_t, S>>;

  TruncatedOperator() = default;
  explicit TruncatedOperator(std::size_t dim) : cols_(dim), lossy_(dim, false) {}

  std::size_t dim() const { return cols_.size(); }
  const Column& column(std::size_t j) const { return cols_.at(j); }
  bool lossy(std::size_t j) const { return lossy_.at(j); }

  void set_column(std::size_t j, Column col, bool lossy) {
    std::erase_if(col, [](const auto& e) { return e.second == S(0); });
    cols_.at(j) = std::move(col);
    lossy_.at(j) = lossy;
  }
  void mark_lossy(std::size_t j, bool lossy = true) { lossy_.at(j) = lossy; }

  // Conjugate transpose; lossy flags start clear and are the builder's job.
  TruncatedOperator adjoint() const {
    TruncatedOperator out(dim());
    for (std::size_t j = 0; j < dim(); ++j)
      for (const auto& [i, x] : cols_[j]) out.cols_[i].emplace_back(j, ScalarTraits<S>::conj(x));
    out.margin = margin;
    return out;
  }

  std::vector<S> apply(const std::vector<S>& v) const {
    std::vector<S> out(dim(), S(0));
    for (std::size_t j = 0; j < dim(); ++j) {
      if (v[j] == S(0)) continue;
      for (const auto& [i, x] : cols_[j]) out[i] += x * v[j];
    }
    return out;
  }

  SparseVector<S> apply(const SparseVector<S>& v) const {
    SparseVector<S> out;
    for (const auto& [j, y] : v)
      for (const auto& [i, x] : cols_[j]) out[i] += x * y;
    std::erase_if(out, [](const auto& e) { return e.second == S(0); });
    return out;
  }

  std::size_t nonzeros() const {
    std::size_t n = 0;
    for (const auto& c : cols_) n += c.size();
    return n;
  }

  Margin margin;

 private:
  std::vector<Column> cols_;
  std::vector<bool> lossy_;
};

template <class S>
TruncatedOperator<S> diagonal_operator(const std::vector<S>& d) {
  TruncatedOperator<S> op(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) op.set_column(j, {{j, d[j]}}, false);
  return op;
}

// V_a with a = (m, n) is V1^m V2^n. Letters are applied left to right.
struct Letter {
  int gen = 0;
  bool star = false;
};

struct Term {
  int sign = 1;
  std::vector<Letter> word;
};

using Expr = std::vector<Term>;

inline Expr identity_expr() { return {Term{}}; }

inline Expr isometry_expr(LatticeVector a) {
  Term t;
  for (std::int64_t i = 0; i < a.n; ++i) t.word.push_back({1, false});
  for (std::int64_t i = 0; i < a.m; ++i) t.word.push_back({0, false});
  return {t};
}

inline Expr adjoint(const Expr& e) {
  Expr out;
  for (const auto& t : e) {
    Term r{t.sign, {}};
    for (auto it = t.word.rbegin(); it != t.word.rend(); ++it) r.word.push_back({it->gen, !it->star});
    out.push_back(std::move(r));
  }
  return out;
}

// first, then second
inline Expr then(const Expr& first, const Expr& second) {
  Expr out;
  for (const auto& a : first)
    for (const auto& b : second) {
      Term t{a.sign * b.sign, a.word};
      t.word.insert(t.word.end(), b.word.begin(), b.word.end());
      out.push_back(std::move(t));
    }
  return out;
}

inline Expr minus(Expr a, const Expr& b) {
  for (auto t : b) {
    t.sign = -t.sign;
    a.push_back(std::move(t));
  }
  return a;
}

inline Expr range_projection_expr(LatticeVector a) { return then(adjoint(isometry_expr(a)), isometry_expr(a)); }
inline Expr corange_projection_expr(LatticeVector a) { return minus(identity_expr(), range_projection_expr(a)); }

inline std::string word_name(LatticeVector a, bool star = false) {
  return std::string("V_(") + std::to_string(a.m) + "," + std::to_string(a.n) + ")" + (star ? "*" : "");
}

template <class S>
struct Generators {
  std::array<TruncatedOperator<S>, 2> V;
  std::array<TruncatedOperator<S>, 2> Vstar;

  const TruncatedOperator<S>& letter(Letter l) const { return l.star ? Vstar.at(l.gen) : V.at(l.gen); }

  std::int64_t fiber_margin(const Expr& e) const {
    std::int64_t best = 0;
    for (const auto& t : e) {
      std::int64_t m = 0;
      for (auto l : t.word) m += letter(l).margin.fiber;
      best = std::max(best, m);
    }
    return best;
  }

  // Union of the supports met while pushing e_cell through every term, or
  // nothing if some step touches a lossy column.
  std::optional<std::set<std::size_t>> reach(std::size_t cell, const Expr& e) const {
    std::set<std::size_t> all{cell};
    for (const auto& t : e) {
      std::set<std::size_t> support{cell};
      for (auto l : t.word) {
        const auto& op = letter(l);
        std::set<std::size_t> next;
        for (auto j : support) {
          if (op.lossy(j)) return std::nullopt;
          for (const auto& [i, x] : op.column(j)) next.insert(i);
        }
        support = std::move(next);
        all.insert(support.begin(), support.end());
      }
    }
    return all;
  }

  bool safe(std::size_t cell, const Expr& e) const { return reach(cell, e).has_value(); }

  std::vector<S> apply(const Expr& e, const std::vector<S>& v) const {
    std::vector<S> out(v.size(), S(0));
    for (const auto& t : e) {
      std::vector<S> w = v;
      for (auto l : t.word) w = letter(l).apply(w);
      for (std::size_t i = 0; i < w.size(); ++i) out[i] += t.sign > 0 ? w[i] : S(-w[i]);
    }
    return out;
  }

  SparseVector<S> apply(const Expr& e, const SparseVector<S>& v) const {
    SparseVector<S> out;
    for (const auto& t : e) {
      SparseVector<S> w = v;
      for (auto l : t.word) w = letter(l).apply(w);
      for (const auto& [i, x] : w) out[i] += t.sign > 0 ? x : S(-x);
    }
    std::erase_if(out, [](const auto& p) { return p.second == S(0); });
    return out;
  }
};

// A window vector together with the cells where it equals the untruncated one.
template <class S>
struct TrackedVector {
  std::vector<S> value;
  std::vector<bool> valid;

  std::size_t valid_count() const { return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true)); }
};

template <class S>
TrackedVector<S> exact_everywhere(std::vector<S> v) {
  std::vector<bool> valid(v.size(), true);
  return {std::move(v), std::move(valid)};
}

template <class S>
TrackedVector<S> apply_tracked(const Generators<S>& g, const Expr& e, const TrackedVector<S>& v) {
  TrackedVector<S> out{g.apply(e, v.value), std::vector<bool>(v.value.size(), false)};
  Expr rows = adjoint(e);
  for (std::size_t c = 0; c < v.value.size(); ++c) {
    auto r = g.reach(c, rows);
    if (!r) continue;
    bool ok = true;
    for (auto j : *r) ok = ok && v.valid[j];
    out.valid[c] = ok;
  }
  return out;
}

struct CheckRow {
  std::string identity;
  std::int64_t margin = 0;
  std::size_t tested = 0;
  double max_residual = 0;
  bool pass = false;
};

inline bool all_pass(const std::vector<CheckRow>& rows) {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return !rows.empty();
}

// L e_c = R e_c on every cell where both sides are safe. A check that finds
// no safe cell fails: nothing was verified.
template <class S>
CheckRow operator_identity(const Generators<S>& g, std::string name, const Expr& lhs, const Expr& rhs, double tol) {
  CheckRow row{std::move(name), std::max(g.fiber_margin(lhs), g.fiber_margin(rhs)), 0, 0.0, true};
  bool exact_ok = true;
  for (std::size_t c = 0; c < g.V[0].dim(); ++c) {
    if (!g.safe(c, lhs) || !g.safe(c, rhs)) continue;
    ++row.tested;
    SparseVector<S> e{{c, S(1)}};
    auto l = g.apply(lhs, e);
    auto r = g.apply(rhs, e);
    for (const auto& [i, x] : r) l[i] -= x;
    for (const auto& [i, x] : l) {
      row.max_residual = std::max(row.max_residual, ScalarTraits<S>::magnitude(x));
      exact_ok = exact_ok && negligible(x, tol);
    }
  }
  row.pass = row.tested > 0 && exact_ok;
  return row;
}

template <class S>
CheckRow vector_identity(std::string name, std::int64_t margin, const TrackedVector<S>& lhs, const TrackedVector<S>& rhs,
                         double tol) {
  CheckRow row{std::move(name), margin, 0, 0.0, true};
  bool ok = true;
  for (std::size_t c = 0; c < lhs.value.size(); ++c) {
    if (!lhs.valid[c] || !rhs.valid[c]) continue;
    ++row.tested;
    S d = lhs.value[c] - rhs.value[c];
    row.max_residual = std::max(row.max_residual, ScalarTraits<S>::magnitude(d));
    ok = ok && negligible(d, tol);
  }
  row.pass = row.tested > 0 && ok;
  return row;
}

template <class S>
TrackedVector<S> scaled(TrackedVector<S> v, const S& k) {
  for (auto& x : v.value) x *= k;
  return v;
}

}  // namespace kmslab
