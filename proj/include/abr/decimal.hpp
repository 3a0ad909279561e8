#pragma once

#include <cstdint>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

#include "abr/errors.hpp"

namespace abr {

namespace detail {

using int128 = __int128;

inline int128 pow10_128(int n) {
  int128 p = 1;
  for (int i = 0; i < n; ++i) p *= 10;
  return p;
}

// Scales by 10^exp with 128-bit bounds checking.
inline int128 scale_up_checked(int128 u, int exp) {
  constexpr int128 max128 = ~(int128(1) << 127);
  for (int i = 0; i < exp; ++i) {
    if (u > max128 / 10 || u < -(max128 / 10)) throw ArithmeticOverflow("scale out of range");
    u *= 10;
  }
  return u;
}

inline std::int64_t narrow_checked(int128 v, const char* what) {
  if (v > int128(INT64_MAX) || v < int128(INT64_MIN)) {
    throw ArithmeticOverflow(std::string(what) + ": value out of range");
  }
  return static_cast<std::int64_t>(v);
}

// Round q = n / d to the nearest integer, halves away from zero. d > 0.
inline int128 div_half_away(int128 n, int128 d) {
  int128 q = n / d;
  int128 r = n % d;
  if (r < 0) r = -r;
  if (2 * r >= d) q += (n < 0) ? -1 : 1;
  return q;
}

}  // namespace detail

// Exact fixed-point decimal: value = units * 10^-scale. Arithmetic is exact
// (no binary floating point anywhere), so rounding and equality are stable
// across platforms. Scales are small by construction: every pipeline result
// is rounded to a fixed number of places before further use.
class Decimal {
 public:
  static constexpr int kMaxScale = 12;
  static constexpr int kMaxDigits = 18;

  constexpr Decimal() = default;

  static Decimal from_units(std::int64_t units, int scale) {
    if (scale < 0 || scale > kMaxScale) throw ArithmeticOverflow("decimal scale out of range");
    Decimal d;
    d.units_ = units;
    d.scale_ = scale;
    return d;
  }

  static Decimal from_int(std::int64_t v) { return from_units(v, 0); }

  // Accepts [+-]digits[.digits]. Returns nullopt on malformed input.
  static std::optional<Decimal> parse(std::string_view text) {
    if (text.empty()) return std::nullopt;
    std::size_t i = 0;
    bool neg = false;
    if (text[i] == '+' || text[i] == '-') {
      neg = text[i] == '-';
      ++i;
    }
    detail::int128 units = 0;
    int digits = 0;
    int scale = -1;  // -1: before the point
    bool any = false;
    for (; i < text.size(); ++i) {
      char c = text[i];
      if (c == '.') {
        if (scale >= 0) return std::nullopt;
        scale = 0;
        continue;
      }
      if (c < '0' || c > '9') return std::nullopt;
      any = true;
      ++digits;
      if (digits > kMaxDigits) return std::nullopt;
      units = units * 10 + (c - '0');
      if (scale >= 0) ++scale;
    }
    if (!any) return std::nullopt;
    if (scale < 0) scale = 0;
    if (scale > kMaxScale) return std::nullopt;
    if (neg) units = -units;
    return from_units(static_cast<std::int64_t>(units), scale);
  }

  std::int64_t units() const { return units_; }
  int scale() const { return scale_; }
  bool is_zero() const { return units_ == 0; }
  bool is_negative() const { return units_ < 0; }

  // Rounds (half away from zero) and normalizes the scale to exactly
  // `places`, padding with zeros when the value has fewer digits.
  Decimal rounded(int places) const {
    if (places < 0 || places > kMaxScale) throw ArithmeticOverflow("rounding scale out of range");
    detail::int128 u = units_;
    if (scale_ < places) {
      u *= detail::pow10_128(places - scale_);
    } else if (scale_ > places) {
      u = detail::div_half_away(u, detail::pow10_128(scale_ - places));
    }
    return from_units(detail::narrow_checked(u, "round"), places);
  }

  friend Decimal operator+(const Decimal& a, const Decimal& b) {
    int s = a.scale_ > b.scale_ ? a.scale_ : b.scale_;
    detail::int128 ua = detail::int128(a.units_) * detail::pow10_128(s - a.scale_);
    detail::int128 ub = detail::int128(b.units_) * detail::pow10_128(s - b.scale_);
    return from_units(detail::narrow_checked(ua + ub, "add"), s);
  }

  friend Decimal operator-(const Decimal& a, const Decimal& b) { return a + b.negated(); }

  friend Decimal operator*(const Decimal& a, const Decimal& b) {
    int s = a.scale_ + b.scale_;
    detail::int128 u = detail::int128(a.units_) * detail::int128(b.units_);
    // Products are always rounded back down by the caller; reduce here when
    // the combined scale exceeds what Decimal can carry.
    while (s > kMaxScale) {
      u = detail::div_half_away(u, 10);
      --s;
    }
    return from_units(detail::narrow_checked(u, "mul"), s);
  }

  // Product rounded half away from zero directly at `places`, avoiding the
  // intermediate combined-scale narrowing of operator*.
  static Decimal mul_rounded(const Decimal& a, const Decimal& b, int places) {
    if (places < 0 || places > kMaxScale) throw ArithmeticOverflow("rounding scale out of range");
    detail::int128 u = detail::int128(a.units_) * detail::int128(b.units_);
    int s = a.scale_ + b.scale_;
    if (s < places) {
      u = detail::scale_up_checked(u, places - s);
    } else if (s > places) {
      u = detail::div_half_away(u, detail::pow10_128(s - places));
    }
    return from_units(detail::narrow_checked(u, "mul"), places);
  }

  // Quotient rounded half away from zero directly at `places`. b must be nonzero.
  static Decimal div_rounded(const Decimal& a, const Decimal& b, int places) {
    if (b.is_zero()) throw ArithmeticOverflow("division by zero");
    // a/b = (ua / ub) * 10^(sb - sa); target units = a/b * 10^places.
    int exp = places + b.scale_ - a.scale_;
    detail::int128 num = a.units_;
    detail::int128 den = b.units_;
    if (exp >= 0) {
      num *= detail::pow10_128(exp);
    } else {
      den *= detail::pow10_128(-exp);
    }
    if (den < 0) {
      num = -num;
      den = -den;
    }
    return from_units(detail::narrow_checked(detail::div_half_away(num, den), "div"), places);
  }

  Decimal negated() const { return from_units(units_ == INT64_MIN ? throw ArithmeticOverflow("negate") : -units_, scale_); }

  Decimal abs() const { return units_ < 0 ? negated() : *this; }

  friend bool operator==(const Decimal& a, const Decimal& b) { return cmp(a, b) == 0; }
  friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
    int c = cmp(a, b);
    return c < 0 ? std::strong_ordering::less
         : c > 0 ? std::strong_ordering::greater
                 : std::strong_ordering::equal;
  }

  // Canonical rendering: sign, integer digits, then exactly scale() fraction
  // digits ("2505.64", "18.00", "-1040.00", "3").
  std::string str() const {
    std::uint64_t mag = units_ < 0 ? 0ull - static_cast<std::uint64_t>(units_)
                                   : static_cast<std::uint64_t>(units_);
    std::string digits = std::to_string(mag);
    if (static_cast<int>(digits.size()) <= scale_) {
      digits.insert(0, static_cast<std::size_t>(scale_) + 1 - digits.size(), '0');
    }
    std::string out;
    if (units_ < 0) out.push_back('-');
    out.append(digits, 0, digits.size() - scale_);
    if (scale_ > 0) {
      out.push_back('.');
      out.append(digits, digits.size() - scale_, std::string::npos);
    }
    return out;
  }

  double to_double() const {
    double v = static_cast<double>(units_);
    for (int i = 0; i < scale_; ++i) v /= 10.0;
    return v;
  }

 private:
  static int cmp(const Decimal& a, const Decimal& b) {
    int s = a.scale_ > b.scale_ ? a.scale_ : b.scale_;
    detail::int128 ua = detail::int128(a.units_) * detail::pow10_128(s - a.scale_);
    detail::int128 ub = detail::int128(b.units_) * detail::pow10_128(s - b.scale_);
    return ua < ub ? -1 : (ua > ub ? 1 : 0);
  }

  std::int64_t units_ = 0;
  int scale_ = 0;
};

// Exact rational on int64 with 128-bit intermediates. Used where division
// must stay exact until one final rounding step (embedded-question truths).
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den) { *this = make(num, den); }

  static Rational from_int(std::int64_t v) { return Rational(v, 1); }

  static Rational from_decimal(const Decimal& d) {
    return make(d.units(), static_cast<std::int64_t>(detail::pow10_128(d.scale())));
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  bool is_zero() const { return num_ == 0; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return make128(detail::int128(a.num_) * b.den_ + detail::int128(b.num_) * a.den_,
                   detail::int128(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return make128(detail::int128(a.num_) * b.den_ - detail::int128(b.num_) * a.den_,
                   detail::int128(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return make128(detail::int128(a.num_) * b.num_, detail::int128(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw ArithmeticOverflow("rational division by zero");
    return make128(detail::int128(a.num_) * b.den_, detail::int128(a.den_) * b.num_);
  }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }

  Decimal to_decimal(int places) const {
    detail::int128 scaled = detail::div_half_away(detail::int128(num_) * detail::pow10_128(places), den_);
    return Decimal::from_units(detail::narrow_checked(scaled, "rational round"), places);
  }

 private:
  static detail::int128 gcd128(detail::int128 a, detail::int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      detail::int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Rational make128(detail::int128 num, detail::int128 den) {
    if (den == 0) throw ArithmeticOverflow("rational zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    detail::int128 g = gcd128(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    Rational r;
    r.num_ = detail::narrow_checked(num, "rational num");
    r.den_ = detail::narrow_checked(den, "rational den");
    return r;
  }

  static Rational make(std::int64_t num, std::int64_t den) {
    return make128(num, den);
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace abr
