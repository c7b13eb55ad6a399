#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rampmeter/network.hpp"
#include "rampmeter/rational.hpp"
#include "rampmeter/scenario.hpp"
#include "rampmeter/trace.hpp"

namespace rampmeter {

// ---------------------------------------------------------------------------
// Analytical bounds for equal arrival rates on every ramp

/// Largest lambda with rho_i(lambda) < a_i / b_i at every ramp node; 1 if no
/// ramp node carries load.
Rational inner_bound(const Network& network, const std::vector<std::vector<double>>& routing,
                     const ReleaseSchedule& schedule);

/// Lambda at which the most loaded node reaches rho = 1, capped at 1.
Rational outer_bound(const Network& network, const std::vector<std::vector<double>>& routing);

// ---------------------------------------------------------------------------
// Predecessor families and degrees

using Multiset = std::vector<RampIndex>;  // sorted

struct UFamily {
  RampIndex ramp = kNone;
  std::vector<std::vector<Multiset>> levels;  // levels[k] sorted, deduplicated
};

/// Levels 0..k_max of the recursive predecessor families of `ramp`, stopping
/// early at the first empty level. Throws ValidationError on cyclic networks.
UFamily enumerate_U(const Network& network, RampIndex ramp, int k_max = 64);

/// Union of every level of every ramp's family, deduplicated.
std::vector<Multiset> all_families(const Network& network, int k_max = 64);

/// max over families I of sum_{j in I} degrees[j] (multiplicity counts).
std::int64_t family_degree(std::span<const std::int64_t> degrees, const std::vector<Multiset>& families);

// ---------------------------------------------------------------------------
// Lyapunov drift of V = D^2

struct DriftStats {
  double threshold = 0.0;  // L
  std::size_t samples = 0; // transitions with V(n) > L
  double mean = 0.0;
  double std_error = 0.0;  // batch means
  double ci_low = 0.0;     // 95%
  double ci_high = 0.0;
  bool empty() const noexcept { return samples == 0; }
};

/// Conditional mean drift E[V(n+1) - V(n) | V(n) > L] pooled over series of
/// V values (one per run, consecutive entries Delta steps apart). Without a
/// threshold, L is the `quantile` of all observed V (nearest rank).
DriftStats lyapunov_drift(const std::vector<std::vector<double>>& v_series, std::optional<double> threshold = std::nullopt,
                          double quantile = 0.9, int batches = 20);

/// V = D^2 series from a run's degree snapshots, keeping every `stride`-th one.
std::vector<double> lyapunov_series(const RunResult& run, const std::vector<Multiset>& families, int stride = 1);

// ---------------------------------------------------------------------------
// Stability and boundary search

inline constexpr double kDefaultSlopeTolerance = 1e-3;

/// OLS slope of the total queue over the trailing half of the run [veh/step].
double trailing_slope(std::span<const std::int64_t> total_queue);

struct StabilityVerdict {
  double lambda = 0.0;
  bool stable = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> slopes;
};

/// Stable iff a strict majority of slopes are <= tolerance.
StabilityVerdict stability_verdict(double lambda, std::span<const std::uint64_t> seeds, std::span<const double> slopes,
                                   double tolerance = kDefaultSlopeTolerance);

/// Evaluates one lambda; returns the per-seed verdict. Supplied by the caller
/// so the search can run seeds in parallel or be replaced in tests.
using StabilityProbe = std::function<StabilityVerdict(double lambda)>;

struct BoundaryEstimate {
  double lambda_star = 0.0;
  double lo = 0.0;  // last stable
  double hi = 0.0;  // last saturated
  std::vector<StabilityVerdict> evaluations;  // in evaluation order
};

/// Bisection on [lo, hi] until hi - lo <= resolution. Throws ValidationError
/// when lo is not stable or hi is not saturated.
BoundaryEstimate estimate_boundary(const StabilityProbe& probe, double lo, double hi, double resolution = 0.01);

/// Probe that runs `seeds` seeds of the scenario at horizon steps each.
StabilityProbe stability_probe(const Scenario& scenario, std::int64_t horizon, int seeds,
                               double tolerance = kDefaultSlopeTolerance);

// ---------------------------------------------------------------------------
// Total travel time

/// Mean (exit - arrival) in seconds over the first n completed trips, in exit
/// order. Initial mainline vehicles are excluded. Throws ValidationError when
/// n == 0 or fewer than n trips completed.
double ttt(std::span<const VehicleLog> logs, std::size_t n);

/// TTT_n for n = 1..completed.
std::vector<double> ttt_curve(std::span<const VehicleLog> logs);

/// Seed-average of ttt_curve, truncated to the shortest run.
std::vector<double> mean_ttt_curve(const std::vector<RunResult>& runs);

}  // namespace rampmeter
