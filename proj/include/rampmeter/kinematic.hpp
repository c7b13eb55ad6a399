#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <vector>

#include "rampmeter/demand.hpp"
#include "rampmeter/policy.hpp"
#include "rampmeter/scenario.hpp"
#include "rampmeter/trace.hpp"

namespace rampmeter {

/// Gap within this many metres of S_e counts as safe.
inline constexpr double kGapTolerance = 1e-4;
/// Speeds within this many m/s of Vf snap to Vf when the gap allows it.
inline constexpr double kSpeedTolerance = 1e-6;

/// Emergency-stop safety distance h*v_e + S0 + (v_e^2 - v_l^2) / (2|a_min|).
double safety_distance(double v_ego, double v_leader, const SimConstants& constants);

/// What the ego sees ahead: the nearest physical or virtual (merge) leader.
struct LeaderView {
  bool present = false;
  double gap = 0.0;    // bumper-to-bumper [m]
  double speed = 0.0;  // [m/s]
  double accel = 0.0;
  bool safety_mode = false;
  std::int64_t id = -1;
  bool virtual_leader = false;  // on another branch approaching the same merge node
};

struct ControlOutput {
  double accel = 0.0;
  bool safety_mode = false;
};

/// Two-mode car-following law. Speed tracking: K_v (Vf - v). Safety mode
/// (entered below S_e + margin, left above S_e + margin + hysteresis):
/// the smaller of the tracking law and K_g (y - S_e) + K_l (v_l - v).
/// The result is clamped to [a_min, a_max].
ControlOutput controller_accel(double v_ego, bool was_safety, const LeaderView& leader, const SimConstants& constants);

/// State of one party in a merge prediction. `distance_to_node` is positive
/// upstream of the node and negative once past it.
struct MergeParty {
  double distance_to_node = 0.0;
  double speed = 0.0;
  bool safety_mode = false;
};

struct MergePrediction {
  bool applicable = false;  // ego reaches the node within the horizon
  double t_m = 0.0;         // seconds until the ego reaches the node
  double y_hat = 0.0;       // predicted gap to the leader at t_m
  double s_hat = 0.0;       // predicted safety distance at t_m
  double violation = 0.0;   // max(s_hat - y_hat, 0)
};

/// Rolls ego and leader forward: a vehicle in speed-tracking mode is assumed
/// to stay in it, a vehicle in safety mode keeps its speed. `dt` is the
/// rollout step and `horizon_s` the give-up time.
MergePrediction predict_merge(const MergeParty& ego, const MergeParty& leader, const SimConstants& constants,
                              double dt, double horizon_s = 120.0);

/// Per-vehicle deviation from free flow: ((y - S_e)[y < S_e], v - Vf, a).
struct Deviation {
  double gap_shortfall = 0.0;
  double speed_error = 0.0;
  double accel = 0.0;
};

struct CongestionMeasure {
  double xf1 = 0.0;
  double xf2 = 0.0;
  double xf = 0.0;
};

/// X_f1 is the norm of the stacked deviations, X_f2 the sum of window violations.
CongestionMeasure compute_xf(std::span<const Deviation> deviations, std::span<const double> window_violations,
                             XfNorm norm = XfNorm::euclidean);

/// Continuous-state backend. Vehicles move under `controller_accel` with
/// `substeps` constant-acceleration substeps per tau; arrivals and policy
/// decisions happen on the tau grid, in the same order as the slot backend.
class KinematicSimulator {
 public:
  struct Vehicle {
    std::int64_t id = 0;
    RouteIndex route = kNone;
    int edge_pos = 1;   // index into the route's edge list
    double x = 0.0;     // front bumper, metres from the edge's tail
    double v = 0.0;
    double a = 0.0;
    bool safety_mode = false;
  };

  struct Queued {
    std::int64_t vehicle;
    RouteIndex route;
  };

  KinematicSimulator(const Scenario& scenario, std::uint64_t seed, RunOptions options = {});
  // Keeps a pointer to the scenario; a temporary would dangle.
  KinematicSimulator(Scenario&&, std::uint64_t, RunOptions = {}) = delete;

  void step();
  void run(std::int64_t steps);
  /// Advances the continuous dynamics by one substep only (no policy events).
  void substep();

  std::int64_t clock() const noexcept { return clock_; }
  double time_s() const noexcept { return time_s_; }
  const Scenario& scenario() const noexcept { return *scenario_; }
  double dt() const noexcept { return dt_; }
  const std::vector<Vehicle>& vehicles() const noexcept { return vehicles_; }
  const std::deque<Queued>& queue(RampIndex ramp) const { return queues_.at(static_cast<std::size_t>(ramp)); }
  double edge_length(EdgeIndex e) const { return lengths_.at(static_cast<std::size_t>(e)); }
  const GapState& gap_state(RampIndex ramp = 0) const;
  const DrraState& drra_state() const noexcept { return drra_; }

  /// Nearest leader of vehicle `index` in vehicles(), including merge virtual leaders.
  LeaderView leader_of(std::size_t index) const;
  /// Current X_f over the whole mainline (window violations included).
  CongestionMeasure congestion() const;
  std::vector<std::int64_t> node_degrees() const;
  /// Space occupancy [%] of ramp i's detector zone right now.
  double detector_occupancy(RampIndex ramp) const;

  /// Test hooks.
  std::int64_t place_vehicle(RouteIndex route, int edge_pos, double x, double v);
  std::int64_t enqueue(RampIndex ramp, RouteIndex route);
  /// M3 for a release onto `route` right now.
  bool release_safe(RouteIndex route) const;

  const RunResult& result() const noexcept { return result_; }
  RunResult take_result();

 private:
  struct Slot {
    std::size_t vehicle;
    double x;
  };

  EdgeIndex edge_of(const Vehicle& v) const;
  void rebuild_index();
  std::int64_t new_vehicle(RampIndex ramp, RouteIndex route);
  void integrate(double dt);
  void check_collisions();
  void arrivals();
  void releases();
  void record_predictions();
  void update_gaps();
  void record();
  void init_uniform_mainline(std::uint64_t seed);
  std::vector<Deviation> deviations(const std::vector<char>* edge_mask) const;
  std::vector<double> violations(const std::vector<char>* edge_mask) const;
  // Nearest vehicle whose front is at or ahead of position x on route edge
  // `pos`, following the route for at most `limit` metres. `front_distance`
  // receives the front-to-front distance.
  const Vehicle* first_ahead(RouteIndex route, int pos, double x, double limit, std::size_t exclude,
                             double& front_distance) const;
  // True when `other`, on edge k of `route`, turns off that route within
  // `within` metres of the start of edge k.
  bool leaves_route(const Vehicle& other, RouteIndex route, std::size_t k, double within) const;
  const Vehicle* nearest_upstream(NodeIndex node, double limit, double& distance) const;

  const Scenario* scenario_;
  RunOptions options_;
  std::int64_t clock_ = 0;
  double time_s_ = 0.0;
  double dt_ = 0.0;

  std::vector<double> lengths_;
  std::vector<Vehicle> vehicles_;
  std::vector<std::vector<Slot>> on_edge_;  // per edge, sorted by x ascending
  std::vector<std::deque<Queued>> queues_;
  std::vector<RngStream> arrival_rng_;
  std::vector<RngStream> route_rng_;
  std::vector<char> route_has_merge_;
  std::vector<std::vector<std::vector<RampIndex>>> remaining_ramps_;
  std::vector<std::vector<char>> vicinity_;  // per ramp: edges counted by its local gap

  DrraState drra_;
  std::vector<GapState> gaps_;  // one shared state, or one per ramp
  struct WindowEntry {
    double violation;
    EdgeIndex edge;
  };
  std::map<std::int64_t, WindowEntry> window_violations_;  // worst per vehicle in the current T_per window
  std::vector<AlineaState> alinea_;
  std::vector<double> occupancy_accum_;
  std::int64_t occupancy_samples_ = 0;
  double next_alinea_s_ = 0.0;

  RunResult result_;
};

/// Runs the kinematic backend for `horizon` tau steps.
RunResult run_kinematic(const Scenario& scenario, std::int64_t horizon, std::uint64_t seed, RunOptions options = {});

/// Dispatches on the scenario's backend.
RunResult run_scenario(const Scenario& scenario, std::int64_t horizon, std::uint64_t seed, RunOptions options = {});

}  // namespace rampmeter
