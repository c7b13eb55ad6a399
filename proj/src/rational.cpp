#include "rampmeter/rational.hpp"

#include <cmath>

#include "rampmeter/errors.hpp"

namespace rampmeter {

Rational to_rational(double value, std::int64_t max_denominator) {
  if (!std::isfinite(value)) throw ValidationError("cannot convert non-finite value to a rational");
  const bool negative = value < 0.0;
  double x = std::fabs(value);

  // Convergents h/k of the continued fraction of x.
  std::int64_t h_prev = 1, h = static_cast<std::int64_t>(std::floor(x));
  std::int64_t k_prev = 0, k = 1;
  double frac = x - std::floor(x);
  while (frac > 1e-12) {
    const double inv = 1.0 / frac;
    const auto a = static_cast<std::int64_t>(std::floor(inv));
    const std::int64_t k_next = a * k + k_prev;
    if (k_next > max_denominator) break;
    const std::int64_t h_next = a * h + h_prev;
    h_prev = h;
    h = h_next;
    k_prev = k;
    k = k_next;
    if (std::fabs(static_cast<double>(h) / static_cast<double>(k) - x) < 1e-15 * (1.0 + x)) break;
    frac = inv - std::floor(inv);
  }
  return Rational(negative ? -h : h, k);
}

}  // namespace rampmeter
