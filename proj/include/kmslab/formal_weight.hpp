#pragma once

// Exact weights in the commuting formal variables u, v.
//
// A FormalWeight is N(u,v) * (1-u)^i * (1-v)^j * (1-uv)^k where N is a Laurent
// polynomial with rational coefficients and i, j, k are integers of either
// sign. Every measure family in this library keeps its weights in that shape,
// so sums, products and equality stay exact without general rational-function
// arithmetic.

#include <algorithm>
#include <array>
#include <compare>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>

#include "rational.hpp"

namespace kmslab {

struct Monomial {
  int u = 0;
  int v = 0;
  auto operator<=>(const Monomial&) const = default;
};

template <class T>
T ipow(const T& base, int exponent) {
  if (exponent < 0) return T(1) / ipow(base, -exponent);
  T result(1), b(base);
  for (unsigned e = static_cast<unsigned>(exponent); e != 0; e >>= 1) {
    if (e & 1u) result *= b;
    if (e > 1) b *= b;
  }
  return result;
}

class LaurentPoly {
 public:
  using Terms = std::map<Monomial, Rational>;

  LaurentPoly() = default;
  LaurentPoly(const Rational& c) { add_term({}, c); }
  LaurentPoly(int c) : LaurentPoly(Rational(c)) {}

  static LaurentPoly monomial(const Rational& c, int eu, int ev) {
    LaurentPoly p;
    p.add_term({eu, ev}, c);
    return p;
  }

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool is_monomial() const { return terms_.size() == 1; }

  void add_term(Monomial m, const Rational& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  LaurentPoly& operator+=(const LaurentPoly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  LaurentPoly& operator-=(const LaurentPoly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  friend LaurentPoly operator+(LaurentPoly a, const LaurentPoly& b) { return a += b; }
  friend LaurentPoly operator-(LaurentPoly a, const LaurentPoly& b) { return a -= b; }
  LaurentPoly operator-() const {
    LaurentPoly r;
    for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
    return r;
  }

  friend LaurentPoly operator*(const LaurentPoly& a, const LaurentPoly& b) {
    LaurentPoly r;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) r.add_term({ma.u + mb.u, ma.v + mb.v}, ca * cb);
    return r;
  }
  LaurentPoly& operator*=(const LaurentPoly& o) { return *this = *this * o; }

  friend bool operator==(const LaurentPoly& a, const LaurentPoly& b) { return a.terms_ == b.terms_; }

  // Substitutes u -> 1/u, v -> 1/v.
  LaurentPoly inverted() const {
    LaurentPoly r;
    for (const auto& [m, c] : terms_) r.terms_.emplace(Monomial{-m.u, -m.v}, c);
    return r;
  }

  template <class T>
  T evaluate(const T& u, const T& v) const {
    T sum(0);
    for (const auto& [m, c] : terms_) sum += coefficient_as<T>(c) * ipow<T>(u, m.u) * ipow<T>(v, m.v);
    return sum;
  }

  std::string to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
      Rational mag = abs(c);
      if (!first) os << (c < 0 ? " - " : " + ");
      else if (c < 0) os << "-";
      first = false;
      bool bare = m.u == 0 && m.v == 0;
      if (mag != 1 || bare) os << mag.get_str();
      auto var = [&](char name, int e, bool lead) {
        if (e == 0) return;
        if (!lead) os << "*";
        os << name;
        if (e != 1) os << "^" << e;
      };
      var('u', m.u, mag == 1);
      var('v', m.v, mag == 1 && m.u == 0);
    }
    return os.str();
  }

 private:
  template <class T>
  static T coefficient_as(const Rational& c) {
    if constexpr (std::is_same_v<T, Rational>) return c;
    else return T(c.get_d());
  }

  Terms terms_;
};

enum class Factor { one_minus_u = 0, one_minus_v = 1, one_minus_uv = 2 };

class FormalWeight {
 public:
  using Exponents = std::array<int, 3>;

  FormalWeight() = default;
  FormalWeight(const Rational& c) : num_(c) {}
  FormalWeight(int c) : num_(c) {}
  FormalWeight(LaurentPoly num, Exponents e = {}) : num_(std::move(num)), exp_(e) { canonicalize(); }

  static FormalWeight u(int power = 1) { return LaurentPoly::monomial(1, power, 0); }
  static FormalWeight v(int power = 1) { return LaurentPoly::monomial(1, 0, power); }
  static FormalWeight factor(Factor f, int power = 1) {
    Exponents e{};
    e[static_cast<int>(f)] = power;
    return FormalWeight(LaurentPoly(1), e);
  }

  const LaurentPoly& numerator() const { return num_; }
  const Exponents& exponents() const { return exp_; }
  bool is_zero() const { return num_.is_zero(); }

  friend FormalWeight operator*(const FormalWeight& a, const FormalWeight& b) {
    return FormalWeight(a.num_ * b.num_, {a.exp_[0] + b.exp_[0], a.exp_[1] + b.exp_[1], a.exp_[2] + b.exp_[2]});
  }
  FormalWeight& operator*=(const FormalWeight& o) { return *this = *this * o; }

  friend FormalWeight operator+(const FormalWeight& a, const FormalWeight& b) { return combine(a, b, false); }
  friend FormalWeight operator-(const FormalWeight& a, const FormalWeight& b) { return combine(a, b, true); }
  FormalWeight& operator+=(const FormalWeight& o) { return *this = *this + o; }
  FormalWeight operator-() const { return FormalWeight(-num_, exp_); }

  friend bool operator==(const FormalWeight& a, const FormalWeight& b) { return (a - b).is_zero(); }

  // Only weights with a single-term numerator are invertible in this representation.
  FormalWeight reciprocal() const {
    if (!num_.is_monomial()) fail(ErrorCode::invalid_argument, "reciprocal of a non-monomial numerator");
    const auto& [m, c] = *num_.terms().begin();
    return FormalWeight(LaurentPoly::monomial(Rational(1) / c, -m.u, -m.v), {-exp_[0], -exp_[1], -exp_[2]});
  }

  FormalWeight pow(int power) const {
    if (power < 0) return reciprocal().pow(-power);
    FormalWeight r(1);
    for (int i = 0; i < power; ++i) r *= *this;
    return r;
  }

  // Substitutes u -> 1/u, v -> 1/v, using (1 - 1/z) = -(1 - z)/z.
  FormalWeight inverted() const {
    LaurentPoly num = num_.inverted();
    int eu = -exp_[0] - exp_[2];
    int ev = -exp_[1] - exp_[2];
    int sign = (exp_[0] + exp_[1] + exp_[2]) % 2 == 0 ? 1 : -1;
    return FormalWeight(num * LaurentPoly::monomial(sign, eu, ev), exp_);
  }

  template <class T>
  T evaluate(const T& u, const T& v) const {
    T r = num_.evaluate(u, v);
    r *= ipow<T>(T(1) - u, exp_[0]);
    r *= ipow<T>(T(1) - v, exp_[1]);
    r *= ipow<T>(T(1) - u * v, exp_[2]);
    return r;
  }

  std::string to_string() const {
    std::string s = "(" + num_.to_string() + ")";
    static constexpr const char* names[] = {"(1-u)", "(1-v)", "(1-uv)"};
    for (int i = 0; i < 3; ++i) {
      if (exp_[i] == 0) continue;
      s += std::string("*") + names[i];
      if (exp_[i] != 1) s += "^" + std::to_string(exp_[i]);
    }
    return s;
  }

 private:
  static const LaurentPoly& factor_poly(int i) {
    static const LaurentPoly polys[] = {
        LaurentPoly(1) - LaurentPoly::monomial(1, 1, 0),
        LaurentPoly(1) - LaurentPoly::monomial(1, 0, 1),
        LaurentPoly(1) - LaurentPoly::monomial(1, 1, 1),
    };
    return polys[i];
  }

  static LaurentPoly lift(const LaurentPoly& p, const Exponents& have, const Exponents& target) {
    LaurentPoly r = p;
    for (int i = 0; i < 3; ++i)
      for (int k = target[i]; k < have[i]; ++k) r *= factor_poly(i);
    return r;
  }

  static FormalWeight combine(const FormalWeight& a, const FormalWeight& b, bool subtract) {
    if (b.is_zero()) return a;
    if (a.is_zero()) return subtract ? -b : b;
    Exponents e;
    for (int i = 0; i < 3; ++i) e[i] = std::min(a.exp_[i], b.exp_[i]);
    LaurentPoly na = lift(a.num_, a.exp_, e);
    LaurentPoly nb = lift(b.num_, b.exp_, e);
    if (subtract) na -= nb;
    else na += nb;
    return FormalWeight(std::move(na), e);
  }

  void canonicalize() {
    if (num_.is_zero()) exp_ = {};
  }

  LaurentPoly num_;
  Exponents exp_{};
};

}  // namespace kmslab
