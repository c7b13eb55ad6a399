#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "rampmeter/demand.hpp"
#include "rampmeter/policy.hpp"
#include "rampmeter/scenario.hpp"
#include "rampmeter/trace.hpp"

namespace rampmeter {

/// Discrete-time slot automaton. Each step runs, in order: slot advance,
/// exits, arrivals, releases (ramps in id order). One instance is strictly
/// single-threaded and deterministic for a given (scenario, seed).
class SlotSimulator {
 public:
  struct Queued {
    std::int64_t vehicle;
    RouteIndex route;
  };

  SlotSimulator(const Scenario& scenario, std::uint64_t seed, RunOptions options = {});
  // Keeps a pointer to the scenario; a temporary would dangle.
  SlotSimulator(Scenario&&, std::uint64_t, RunOptions = {}) = delete;

  void step();
  void run(std::int64_t steps);

  std::int64_t clock() const noexcept { return clock_; }
  const Scenario& scenario() const noexcept { return *scenario_; }

  /// Vehicle id in each cell of a segment, -1 if empty. Cell 0 sits at the tail node.
  const std::vector<std::int64_t>& cells(EdgeIndex segment) const { return cells_.at(static_cast<std::size_t>(segment)); }
  const std::deque<Queued>& queue(RampIndex ramp) const { return queues_.at(static_cast<std::size_t>(ramp)); }
  std::int64_t on_mainline() const noexcept { return on_mainline_; }
  const DrraState& drra_state() const noexcept { return drra_; }
  const GapState& gap_state() const noexcept { return gap_; }

  /// Degree D_i of every ramp: queued or mainline vehicles still to cross ramp i's node.
  std::vector<std::int64_t> node_degrees() const;

  /// Test hooks: put a routed vehicle on the mainline or in a queue.
  std::int64_t place_vehicle(RouteIndex route, int edge_pos, int cell);
  std::int64_t enqueue(RampIndex ramp, RouteIndex route);

  const RunResult& result() const noexcept { return result_; }
  RunResult take_result();

 private:
  struct Live {
    RouteIndex route = kNone;
    int edge_pos = 0;
  };

  std::int64_t new_vehicle(RampIndex ramp, RouteIndex route);
  void advance();
  void arrivals();
  void releases();
  void record();
  bool target_free(RouteIndex route) const;
  double detector_occupancy(RampIndex ramp) const;

  const Scenario* scenario_;
  RunOptions options_;
  std::int64_t clock_ = 0;

  std::vector<std::vector<std::int64_t>> cells_;
  std::vector<std::int64_t> incoming_;
  std::vector<std::deque<Queued>> queues_;
  std::vector<std::int64_t> queued_on_route_;  // queued vehicles per route
  std::vector<Live> live_;
  std::vector<RngStream> arrival_rng_;
  std::vector<RngStream> route_rng_;
  std::vector<char> route_has_merge_;
  std::vector<std::vector<std::vector<RampIndex>>> remaining_ramps_;  // [route][edge_pos]

  DrraState drra_;
  GapState gap_;
  std::vector<AlineaState> alinea_;
  std::vector<double> occupancy_accum_;
  std::int64_t occupancy_samples_ = 0;
  double next_alinea_s_ = 0.0;

  std::int64_t on_mainline_ = 0;
  RunResult result_;
};

/// Runs the slot backend for `horizon` steps.
RunResult run_slot(const Scenario& scenario, std::int64_t horizon, std::uint64_t seed, RunOptions options = {});

}  // namespace rampmeter
