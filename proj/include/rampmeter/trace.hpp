#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "rampmeter/network.hpp"
#include "rampmeter/policy.hpp"

namespace rampmeter {

inline constexpr double kNotYet = std::numeric_limits<double>::quiet_NaN();

/// One vehicle's life. Initial mainline vehicles carry ramp == kNone.
struct VehicleLog {
  std::int64_t id = 0;
  RampIndex ramp = kNone;
  RouteIndex route = kNone;
  double arrival_s = 0.0;
  double release_s = kNotYet;
  double exit_s = kNotYet;
  std::int64_t arrival_step = 0;
  std::int64_t release_step = -1;
  std::int64_t exit_step = -1;
};

struct RunOptions {
  bool record_vehicles = true;
  bool record_queues = true;  // per-ramp queue lengths every step
  int degree_every = 0;       // degree snapshot period in steps; 0 disables
  int trajectory_every = 0;   // kinematic: trajectory sample period in steps; 0 disables
};

inline constexpr std::size_t kHoldReasons = 7;

struct TrajectorySample {
  double time_s;
  std::int64_t vehicle;
  EdgeIndex edge;
  double position_m;
  double speed;
  double accel;
  bool safety_mode;
};

/// Everything a run produces. Series are indexed by step - 1.
struct RunResult {
  std::int64_t horizon = 0;
  int ramps = 0;
  double tau = 0.0;
  std::uint64_t seed = 0;

  std::vector<std::int32_t> queue_lengths;  // [step][ramp], flattened
  std::vector<std::int64_t> total_queue;    // sum over ramps per step
  std::vector<VehicleLog> vehicles;
  std::vector<std::int64_t> probe_counts;   // one per configured probe

  std::vector<std::int64_t> degree_steps;
  std::vector<std::vector<std::int64_t>> degrees;  // [snapshot][ramp]

  std::vector<std::array<std::int64_t, kHoldReasons>> holds;  // per ramp

  std::int64_t arrived = 0;
  std::int64_t released = 0;
  std::int64_t exited = 0;
  std::int64_t initial_vehicles = 0;

  // Kinematic backend only.
  std::vector<double> xf_times;
  std::vector<double> xf1;
  std::vector<double> xf2;
  std::vector<double> gap_g;
  std::vector<double> gap_theta;
  std::vector<TrajectorySample> trajectory;
  double min_gap_m = std::numeric_limits<double>::infinity();

  std::int32_t queue_at(std::int64_t step, RampIndex ramp) const {
    return queue_lengths[static_cast<std::size_t>((step - 1) * ramps + ramp)];
  }
};

/// Cumulative probe crossings divided by elapsed steps. Throws
/// ValidationError for an unknown probe index.
double crossing_rate(const RunResult& result, std::size_t probe);

}  // namespace rampmeter
