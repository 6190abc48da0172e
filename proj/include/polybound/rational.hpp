#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace polybound {

//! Exact rational arithmetic for program construction. Coefficients stay
//! rational until they enter the solver, where everything is double.
using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rat& r) { return static_cast<double>(r); }

//! Parse a decimal literal ("0.350665", "-1", "2e-3", ".5") into an exact
//! rational. Scientific notation shifts the power of ten; no binary rounding.
inline Rat rat_from_decimal(const std::string& text) {
  std::string s = text;
  bool neg = false;
  std::size_t pos = 0;
  if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    neg = s[pos] == '-';
    ++pos;
  }
  BigInt mantissa = 0;
  long exp10 = 0;
  bool any_digit = false, seen_dot = false;
  for (; pos < s.size(); ++pos) {
    char c = s[pos];
    if (c >= '0' && c <= '9') {
      mantissa = mantissa * 10 + (c - '0');
      if (seen_dot) --exp10;
      any_digit = true;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else if (c == 'e' || c == 'E') {
      exp10 += std::stol(s.substr(pos + 1));
      pos = s.size() - 1;
    } else {
      throw std::invalid_argument("bad numeric literal: " + text);
    }
  }
  if (!any_digit) throw std::invalid_argument("bad numeric literal: " + text);
  Rat r(mantissa, 1);
  if (exp10 > 0) {
    BigInt p = 1;
    for (long i = 0; i < exp10; ++i) p *= 10;
    r *= Rat(p, 1);
  } else if (exp10 < 0) {
    BigInt p = 1;
    for (long i = 0; i < -exp10; ++i) p *= 10;
    r /= Rat(p, 1);
  }
  return neg ? -r : r;
}

//! Exact conversion from a double (doubles are dyadic rationals).
inline Rat rat_from_double(double v) { return Rat(v); }

}  // namespace polybound
