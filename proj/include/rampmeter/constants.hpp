#pragma once

namespace rampmeter {

/// Feedback gains of the car-following controller used by the kinematic backend.
struct ControllerGains {
  double k_speed = 0.8;     // K_v [1/s]
  double k_gap = 0.25;      // K_g [1/s^2]
  double k_rel_speed = 0.9; // K_l [1/s]
  double margin = 2.0;      // safety-mode entry margin above S_e [m]
  double hysteresis = 1.0;  // extra margin before leaving safety mode [m]
};

/// Physical constants shared by every backend.
///
/// `tau` is the minimum safe time headway at free-flow speed and doubles as
/// the simulation step; `slot_spacing` is the distance a free-flow vehicle
/// covers in one step.
struct SimConstants {
  double h = 0.0;      // safe time headway [s]
  double s0 = 0.0;     // standstill gap [m]
  double length = 0.0; // vehicle length [m]
  double vf = 0.0;     // free-flow speed [m/s]
  double a_min = 0.0;  // max braking [m/s^2], negative
  double a_max = 0.0;  // max acceleration [m/s^2], positive
  double tau = 0.0;
  double slot_spacing = 0.0;
  ControllerGains gains{};
};

inline constexpr double kDefaultAMin = -4.0;
inline constexpr double kDefaultAMax = 2.0;

/// Throws ValidationError naming the first offending field.
SimConstants derive_constants(double h, double s0, double length, double vf,
                              double a_min = kDefaultAMin,
                              double a_max = kDefaultAMax);

}  // namespace rampmeter
