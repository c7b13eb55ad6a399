#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "rampmeter/schedule.hpp"

namespace rampmeter {

enum class PolicyKind { drra, drra_nonreactive, safe_alinea };

std::string_view to_string(PolicyKind kind);

/// Why a ramp held its head vehicle. DRRA checks queue, M1, M2, M3, M4 in
/// that order; `rate_limit` is ALINEA's credit shortfall.
enum class HoldReason { none, queue_empty, m1_offset, m2_quota, m3_safety, m4_gap, rate_limit };

std::string_view to_string(HoldReason reason);

struct Decision {
  bool release = false;
  HoldReason reason = HoldReason::none;

  static Decision go() { return {true, HoldReason::none}; }
  static Decision hold(HoldReason r) { return {false, r}; }
};

/// What a ramp can observe locally at a decision instant.
struct LocalView {
  bool queue_nonempty = false;
  bool target_safe = false;          // M3: release point clear of leader and follower
  bool head_route_has_merge = true;  // only consulted by the non-reactive variant
};

// ---------------------------------------------------------------------------
// Adaptive minimum release gap

struct GapParams {
  double period_s = 0.0;  // T_per
  double gamma1 = 50.0;
  double gamma2 = 10.0;
  double theta0 = 0.1;
  double beta = 1.01;
};

struct GapState {
  double g = 0.0;
  double theta = 0.1;
  double xf_prev = 0.0;
};

GapState initial_gap_state(const GapParams& params, double xf_initial);

/// One period of the minimum-gap update. Throws ContractViolation on
/// negative X_f or ill-formed constants.
GapState gap_update(const GapState& state, const GapParams& params, double xf_now);

// ---------------------------------------------------------------------------
// DRRA cycle bookkeeping

struct DrraState {
  int cycle_steps = 1;  // T
  std::int64_t cycle = 0;
  std::vector<std::int64_t> quota;
  std::vector<std::int64_t> released;
  std::vector<double> last_release_s;  // -inf before the first release

  explicit DrraState(int ramps = 0, int cycle_steps = 1);
};

/// True iff `step` (>= 1) opens a new cycle.
bool is_cycle_boundary(const DrraState& state, std::int64_t step);

/// Freezes quotas to the current queue sizes. Throws ContractViolation when
/// `step` is not a cycle boundary.
std::vector<std::int64_t> drra_begin_cycle(DrraState& state, std::int64_t step, std::span<const std::int64_t> queues);

/// M1-M4 for ramp i at `step`, time `t_s` seconds. Pure.
Decision drra_decide(RampIndex ramp, std::int64_t step, double t_s, const DrraState& state,
                     const ReleaseSchedule& schedule, double min_gap_s, const LocalView& view, bool nonreactive);

void drra_record_release(DrraState& state, RampIndex ramp, double t_s);

// ---------------------------------------------------------------------------
// ALINEA with a safety gate

struct AlineaParams {
  double k_r = 70.0;      // veh/h per percentage point
  double o_hat = 13.0;    // target occupancy [%]
  double period_s = 60.0;
  double r_min = 0.0;     // veh/h
  double r_max = 1800.0;  // veh/h
  double r_init = 1800.0; // veh/h
  double credit_cap = 2.0;
  double detector_length_m = 100.0;
};

struct AlineaState {
  double r = 0.0;       // metered outflow [veh/h]
  double credit = 0.0;  // vehicles
};

AlineaState alinea_update(const AlineaState& state, const AlineaParams& params, double occupancy_pct);

/// Adds one step's worth of release credit (capped).
void alinea_accrue(AlineaState& state, const AlineaParams& params, double step_s);

/// Release iff queue nonempty, a whole credit is available and M3 holds.
Decision alinea_decide(const AlineaState& state, const LocalView& view);

}  // namespace rampmeter
