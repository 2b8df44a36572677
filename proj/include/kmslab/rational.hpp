#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace kmslab {

using Rational = mpq_class;
using Integer = mpz_class;

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
  if (den == 0) fail(ErrorCode::invalid_argument, "zero denominator");
  Rational r{Integer(std::to_string(num)), Integer(std::to_string(den))};
  r.canonicalize();
  return r;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }
inline std::string to_string(const Integer& z) { return z.get_str(); }

// Accepts "p", "p/q" and finite decimals such as "-0.125" or "2.5e-3".
inline Rational parse_rational(std::string_view text) {
  std::string s(text);
  if (s.empty()) fail(ErrorCode::invalid_argument, "empty rational literal");
  try {
    if (s.find_first_of(".eE") == std::string::npos) {
      Rational r(s);
      r.canonicalize();
      return r;
    }
    std::int64_t exponent = 0;
    if (auto e = s.find_first_of("eE"); e != std::string::npos) {
      exponent = std::stoll(s.substr(e + 1));
      s.erase(e);
    }
    if (auto dot = s.find('.'); dot != std::string::npos) {
      exponent -= static_cast<std::int64_t>(s.size() - dot - 1);
      s.erase(dot, 1);
    }
    Integer mantissa(s);
    Integer scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
    Rational r = exponent < 0 ? Rational(mantissa, scale) : Rational(mantissa * scale);
    r.canonicalize();
    return r;
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::invalid_argument, "not a rational literal: " + std::string(text));
  }
}

inline Rational pow(const Rational& base, long exponent) {
  if (exponent < 0) {
    if (base == 0) fail(ErrorCode::invalid_argument, "zero to a negative power");
    return Rational(1) / pow(base, -exponent);
  }
  Rational result;
  mpz_pow_ui(result.get_num_mpz_t(), base.get_num_mpz_t(), static_cast<unsigned long>(exponent));
  mpz_pow_ui(result.get_den_mpz_t(), base.get_den_mpz_t(), static_cast<unsigned long>(exponent));
  return result;
}

inline Rational dyadic(long exponent) { return pow(Rational(1, 2), exponent); }

}  // namespace kmslab
