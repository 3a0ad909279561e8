#include <catch2/catch_amalgamated.hpp>

#include "abr/decimal.hpp"
#include "abr/rng.hpp"

using abr::Decimal;
using abr::Rational;

TEST_CASE("decimal parse and canonical rendering") {
  CHECK(Decimal::parse("2505.64")->str() == "2505.64");
  CHECK(Decimal::parse("-1040.00")->str() == "-1040.00");
  CHECK(Decimal::parse("18.00")->str() == "18.00");
  CHECK(Decimal::parse("3")->str() == "3");
  CHECK(Decimal::parse("+7.5")->str() == "7.5");
  CHECK(Decimal::parse("0.05")->str() == "0.05");
  CHECK(Decimal::parse("-0.5")->str() == "-0.5");

  CHECK_FALSE(Decimal::parse(""));
  CHECK_FALSE(Decimal::parse("abc"));
  CHECK_FALSE(Decimal::parse("1.2.3"));
  CHECK_FALSE(Decimal::parse("1e5"));
  CHECK_FALSE(Decimal::parse("."));
  CHECK_FALSE(Decimal::parse("1234567890123456789"));  // 19 digits
}

TEST_CASE("rounding is half away from zero") {
  CHECK(Decimal::parse("2505.636")->rounded(2).str() == "2505.64");
  CHECK(Decimal::parse("2505.635")->rounded(2).str() == "2505.64");
  CHECK(Decimal::parse("-2505.635")->rounded(2).str() == "-2505.64");
  CHECK(Decimal::parse("2505.634")->rounded(2).str() == "2505.63");
  CHECK(Decimal::parse("6.5166")->rounded(2).str() == "6.52");
  CHECK(Decimal::parse("0.005")->rounded(2).str() == "0.01");
  CHECK(Decimal::parse("-0.005")->rounded(2).str() == "-0.01");
  CHECK(Decimal::parse("3")->rounded(2).str() == "3.00");
}

TEST_CASE("rounding an already-rounded number is the identity") {
  abr::Rng rng(2024);
  for (int i = 0; i < 2000; ++i) {
    Decimal d = Decimal::from_units(rng.range(-5'000'000, 5'000'000), static_cast<int>(rng.range(0, 4)));
    Decimal once = d.rounded(2);
    CHECK(once.rounded(2) == once);
    CHECK(once.rounded(2).str() == once.str());
  }
}

TEST_CASE("exact arithmetic") {
  Decimal a = *Decimal::parse("6.52");
  Decimal b = *Decimal::parse("384.30");
  CHECK(Decimal::mul_rounded(a, b, 2).str() == "2505.64");
  CHECK((a + b).str() == "390.82");
  CHECK((b - a).str() == "377.78");
  CHECK(Decimal::div_rounded(*Decimal::parse("14.9"), *Decimal::parse("6"), 2).str() == "2.48");
  CHECK(Decimal::div_rounded(*Decimal::parse("1"), *Decimal::parse("-3"), 2).str() == "-0.33");
  CHECK(Decimal::div_rounded(*Decimal::parse("-1"), *Decimal::parse("-8"), 2).str() == "0.13");
}

TEST_CASE("comparison aligns scales") {
  CHECK(*Decimal::parse("1.5") == *Decimal::parse("1.50"));
  CHECK(*Decimal::parse("1.5") < *Decimal::parse("1.51"));
  CHECK(*Decimal::parse("-2") < *Decimal::parse("0.01"));
  CHECK(Decimal::parse("3398.00")->str() != Decimal::parse("3398")->str());  // scale is preserved
  CHECK(*Decimal::parse("3398.00") == *Decimal::parse("3398"));
}

TEST_CASE("narrowing overflow raises") {
  Decimal big = Decimal::from_units(INT64_MAX - 1, 0);
  CHECK_THROWS_AS(big + big, abr::ArithmeticOverflow);
  CHECK_THROWS_AS(Decimal::mul_rounded(big, big, 2), abr::ArithmeticOverflow);
  CHECK_THROWS_AS(big.rounded(4), abr::ArithmeticOverflow);
}

TEST_CASE("rational arithmetic stays exact until the final rounding") {
  // 2 - 14.9 / 6 + 7 evaluated exactly, one rounding step at the end.
  Rational v = Rational::from_int(2) - Rational::from_decimal(*Decimal::parse("14.9")) / Rational::from_int(6) +
               Rational::from_int(7);
  CHECK(v.to_decimal(2).str() == "6.52");
  CHECK(v.to_decimal(4).str() == "6.5167");

  Rational third(1, 3);
  CHECK((third + third + third) == Rational::from_int(1));
  CHECK((Rational(19, 1) * Rational(197, 10) + Rational(20, 1) / Rational(2, 1)).to_decimal(2).str() == "384.30");
  CHECK_THROWS_AS(Rational(1, 0), abr::ArithmeticOverflow);
}
