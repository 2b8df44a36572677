#include <catch_amalgamated.hpp>

#include <kmslab/formal_weight.hpp>

using namespace kmslab;

namespace {

const Rational half(1, 2);

FormalWeight one_minus(Factor f, int p = 1) { return FormalWeight::factor(f, p); }

}  // namespace

TEST_CASE("laurent polynomial arithmetic") {
  LaurentPoly a = LaurentPoly(1) - LaurentPoly::monomial(1, 1, 0);
  LaurentPoly b = LaurentPoly(1) + LaurentPoly::monomial(1, 1, 0);
  LaurentPoly prod = a * b;
  REQUIRE(prod == LaurentPoly(1) - LaurentPoly::monomial(1, 2, 0));
  REQUIRE((a - a).is_zero());
  REQUIRE(LaurentPoly::monomial(3, -2, 1).evaluate(Rational(2), Rational(5)) == Rational(15, 4));
  REQUIRE(LaurentPoly::monomial(Rational(-2, 3), 1, -1).to_string() == "-2/3*u*v^-1");
}

TEST_CASE("factored weights compare exactly") {
  // (1-u^2)/(1-u) == 1 + u
  FormalWeight lhs = FormalWeight(LaurentPoly(1) - LaurentPoly::monomial(1, 2, 0)) * one_minus(Factor::one_minus_u, -1);
  FormalWeight rhs = FormalWeight(1) + FormalWeight::u();
  REQUIRE(lhs == rhs);
  REQUIRE_FALSE(lhs == FormalWeight::u());

  // (1-v)/(1-uv) + v(1-u)/(1-uv) == 1
  FormalWeight p = one_minus(Factor::one_minus_v) * one_minus(Factor::one_minus_uv, -1);
  FormalWeight q = FormalWeight::v() * one_minus(Factor::one_minus_u) * one_minus(Factor::one_minus_uv, -1);
  REQUIRE(p + q == FormalWeight(1));
}

TEST_CASE("evaluation agrees between exact and double") {
  FormalWeight w = FormalWeight::u(2) * FormalWeight::v(-1) * one_minus(Factor::one_minus_uv, -2) + FormalWeight(Rational(1, 3));
  Rational exact = w.evaluate(half, Rational(1, 3));
  double approx = w.evaluate(0.5, 1.0 / 3.0);
  REQUIRE(std::abs(exact.get_d() - approx) < 1e-14);
  // u^2 v^-1 (1-uv)^-2 at (1/2,1/3) = (1/4)*3/(25/36) = 27/25
  REQUIRE(exact == Rational(27, 25) + Rational(1, 3));
}

TEST_CASE("reciprocal and powers") {
  FormalWeight w = Rational(2, 3) * FormalWeight::u() * one_minus(Factor::one_minus_v, 3);
  REQUIRE(w * w.reciprocal() == FormalWeight(1));
  REQUIRE(w.pow(3) == w * w * w);
  REQUIRE(w.pow(-2) * w.pow(2) == FormalWeight(1));
  REQUIRE_THROWS_AS((FormalWeight(1) + FormalWeight::u()).reciprocal(), Error);
}

TEST_CASE("inversion of the variables") {
  Rational u(2, 7), v(5, 3);
  Rational iu = 1 / u, iv = 1 / v;
  const FormalWeight samples[] = {
      one_minus(Factor::one_minus_u),
      one_minus(Factor::one_minus_uv, -3) * FormalWeight::v(2),
      one_minus(Factor::one_minus_v, -1) + FormalWeight::u(-1),
      Rational(4) * one_minus(Factor::one_minus_u, 2) * one_minus(Factor::one_minus_v, -1),
  };
  for (const auto& w : samples) {
    REQUIRE(w.inverted().evaluate(u, v) == w.evaluate(iu, iv));
    REQUIRE(w.inverted().inverted() == w);
  }
}
