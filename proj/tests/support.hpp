#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "json.hpp"

#include "rampmeter/scenario.hpp"
#include "rampmeter/schedule.hpp"

namespace testing {

struct NetGen {
  int min_ramps = 1;
  int max_ramps = 4;
  int max_slots = 4;
  int max_period = 4;
  bool diverges = true;
};

/// Random acyclic freeway: ramps joining a mainline that merges and splits,
/// every route listed, random positive routing. Policy is DRRA with a random
/// schedule that may conflict.
nlohmann::json random_scenario_json(std::mt19937_64& rng, const NetGen& gen = {});

/// Same network with a conflict-free schedule found by find_offsets for random
/// (a_i, b_i); retries a new network when no assignment exists.
nlohmann::json random_valid_scenario_json(std::mt19937_64& rng, const NetGen& gen = {});

rampmeter::Scenario load_json(const nlohmann::json& j, bool check_conflicts = true);

/// The 1-ramp line used by several tests: src -> on -> r -> seg (cells) -> d -> off -> sink.
nlohmann::json line_json(int cells, double lambda, int cycle_steps = 1);

/// Brute-force monitor: every ramp releases one non-interacting vehicle per
/// route on every scheduled step (infinite demand); vehicles advance one cell
/// per step. Returns true when two different vehicles enter a node in the
/// same step over different incoming edges within 2H + longest-route steps.
/// Standard mode ignores coincidences with a release at the vehicle's own
/// on-ramp node.
bool ghost_conflict(const rampmeter::Network& net, const rampmeter::ReleaseSchedule& schedule,
                    rampmeter::ConflictMode mode);

}  // namespace testing
