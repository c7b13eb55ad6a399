#include "rampmeter/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rampmeter/errors.hpp"

namespace rampmeter {

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::drra: return "drra";
    case PolicyKind::drra_nonreactive: return "drra_nonreactive";
    case PolicyKind::safe_alinea: return "safe_alinea";
  }
  return "?";
}

std::string_view to_string(HoldReason reason) {
  switch (reason) {
    case HoldReason::none: return "none";
    case HoldReason::queue_empty: return "queue";
    case HoldReason::m1_offset: return "M1";
    case HoldReason::m2_quota: return "M2";
    case HoldReason::m3_safety: return "M3";
    case HoldReason::m4_gap: return "M4";
    case HoldReason::rate_limit: return "rate";
  }
  return "?";
}

GapState initial_gap_state(const GapParams& params, double xf_initial) {
  return GapState{0.0, params.theta0, xf_initial};
}

GapState gap_update(const GapState& state, const GapParams& params, double xf_now) {
  if (!(xf_now >= 0.0)) throw ContractViolation("X_f must be non-negative");
  if (!(params.beta > 1.0)) throw ContractViolation("beta must exceed 1");
  GapState next = state;
  if (xf_now <= std::max(state.xf_prev - params.gamma1, 0.0)) {
    next.g = std::max(state.g - params.gamma2, 0.0);
  } else {
    next.theta = params.beta * state.theta;
    next.g = state.g + next.theta;
  }
  next.xf_prev = xf_now;
  return next;
}

DrraState::DrraState(int ramps, int cycle_steps_)
    : cycle_steps(cycle_steps_),
      quota(static_cast<std::size_t>(ramps), 0),
      released(static_cast<std::size_t>(ramps), 0),
      last_release_s(static_cast<std::size_t>(ramps), -std::numeric_limits<double>::infinity()) {
  if (cycle_steps < 1) throw ValidationError("cycle length T must be a positive integer");
}

bool is_cycle_boundary(const DrraState& state, std::int64_t step) {
  return step >= 1 && (step - 1) % state.cycle_steps == 0;
}

std::vector<std::int64_t> drra_begin_cycle(DrraState& state, std::int64_t step, std::span<const std::int64_t> queues) {
  if (!is_cycle_boundary(state, step)) {
    throw ContractViolation("drra_begin_cycle called at step " + std::to_string(step) + ", not a cycle boundary");
  }
  if (queues.size() != state.quota.size()) throw ContractViolation("queue vector has the wrong size");
  state.cycle = (step - 1) / state.cycle_steps + 1;
  std::copy(queues.begin(), queues.end(), state.quota.begin());
  std::fill(state.released.begin(), state.released.end(), 0);
  return state.quota;
}

Decision drra_decide(RampIndex ramp, std::int64_t step, double t_s, const DrraState& state,
                     const ReleaseSchedule& schedule, double min_gap_s, const LocalView& view, bool nonreactive) {
  const auto i = static_cast<std::size_t>(ramp);
  if (!view.queue_nonempty) return Decision::hold(HoldReason::queue_empty);
  const bool on_offset = schedule.ramps[i].releases_at(step);
  const bool waived = nonreactive && !view.head_route_has_merge;
  if (!on_offset && !waived) return Decision::hold(HoldReason::m1_offset);
  if (state.released[i] >= state.quota[i]) return Decision::hold(HoldReason::m2_quota);
  if (!view.target_safe) return Decision::hold(HoldReason::m3_safety);
  if (t_s - state.last_release_s[i] < min_gap_s) return Decision::hold(HoldReason::m4_gap);
  return Decision::go();
}

void drra_record_release(DrraState& state, RampIndex ramp, double t_s) {
  const auto i = static_cast<std::size_t>(ramp);
  ++state.released[i];
  state.last_release_s[i] = t_s;
}

AlineaState alinea_update(const AlineaState& state, const AlineaParams& params, double occupancy_pct) {
  AlineaState next = state;
  next.r = std::clamp(state.r + params.k_r * (params.o_hat - occupancy_pct), params.r_min, params.r_max);
  return next;
}

void alinea_accrue(AlineaState& state, const AlineaParams& params, double step_s) {
  state.credit = std::min(state.credit + state.r * step_s / 3600.0, params.credit_cap);
}

Decision alinea_decide(const AlineaState& state, const LocalView& view) {
  if (!view.queue_nonempty) return Decision::hold(HoldReason::queue_empty);
  if (state.credit < 1.0) return Decision::hold(HoldReason::rate_limit);
  if (!view.target_safe) return Decision::hold(HoldReason::m3_safety);
  return Decision::go();
}

}  // namespace rampmeter
