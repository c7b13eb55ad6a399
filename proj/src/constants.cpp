#include "rampmeter/constants.hpp"

#include <cmath>
#include <string>

#include "rampmeter/errors.hpp"

namespace rampmeter {

namespace {

void require(bool ok, const char* field, const char* rule) {
  if (!ok) {
    throw ValidationError(std::string(field) + " must be " + rule);
  }
}

}  // namespace

SimConstants derive_constants(double h, double s0, double length, double vf,
                              double a_min, double a_max) {
  require(std::isfinite(h) && h > 0.0, "h", "positive");
  require(std::isfinite(s0) && s0 > 0.0, "S0", "positive");
  require(std::isfinite(length) && length > 0.0, "L", "positive");
  require(std::isfinite(vf) && vf > 0.0, "Vf", "positive");
  require(std::isfinite(a_min) && a_min < 0.0, "a_min", "negative");
  require(std::isfinite(a_max) && a_max > 0.0, "a_max", "positive");

  SimConstants c;
  c.h = h;
  c.s0 = s0;
  c.length = length;
  c.vf = vf;
  c.a_min = a_min;
  c.a_max = a_max;
  c.tau = h + (s0 + length) / vf;
  c.slot_spacing = h * vf + s0 + length;
  return c;
}

}  // namespace rampmeter
