#pragma once

#include <cstdint>
#include <string>

#include <boost/rational.hpp>

namespace rampmeter {

using Rational = boost::rational<std::int64_t>;

/// Best rational approximation of `value` with denominator at most
/// `max_denominator` (continued fractions). Decimal inputs such as 0.6 or
/// 0.45 come back exact.
Rational to_rational(double value, std::int64_t max_denominator = 1'000'000);

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace rampmeter
