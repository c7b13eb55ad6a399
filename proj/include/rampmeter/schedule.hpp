#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rampmeter/network.hpp"

namespace rampmeter {

/// Periodic release pattern of one ramp: releases allowed at steps
/// t = period * m + n for n in `offsets` (each in [1, period]).
struct RampSchedule {
  int period = 1;
  std::vector<int> offsets{1};

  int allowed() const noexcept { return static_cast<int>(offsets.size()); }
  /// True iff step (>= 1) is a release step.
  bool releases_at(std::int64_t step) const;
};

struct ReleaseSchedule {
  std::vector<RampSchedule> ramps;
};

inline constexpr std::int64_t kMaxHyperperiod = 1'000'000;

ValidationReport validate_schedule(const Network& network, const ReleaseSchedule& schedule,
                                   const std::string& pointer = "/policy/schedule");

/// lcm of all periods. Throws ConfigError above kMaxHyperperiod.
std::int64_t hyperperiod(const ReleaseSchedule& schedule);

/// One free-flow release stream reaching a node.
struct ReleaseEvent {
  RampIndex ramp = kNone;
  int offset = 0;
  RouteIndex route = kNone;
  int steps = 0;          // crossing steps from release to the node
  EdgeIndex via = kNone;  // incoming edge at the node
};

struct ConflictWitness {
  NodeIndex node = kNone;
  ReleaseEvent first;
  ReleaseEvent second;
  std::int64_t residue = 0;     // common arrival step modulo the hyperperiod
  std::int64_t first_step = 0;  // earliest absolute step both reach the node
  std::int64_t hyperperiod = 1;
};

/// `standard` exempts coincidences with a ramp's own release at its node
/// (those are gated by the target-slot check); `strict` reports them too.
enum class ConflictMode { standard, strict };

/// Returns nothing when no two free-flow release streams can reach a joining
/// node at the same step through different incoming edges; otherwise the
/// first witness in (node, ramp, offset, route) order.
std::optional<ConflictWitness> verify_conflict_free(const Network& network, const ReleaseSchedule& schedule,
                                                    ConflictMode mode = ConflictMode::standard);

/// Deterministic backtracking over offset sets in ramp order. `rates[i]`
/// offsets are chosen from [1, periods[i]]; nothing if no assignment is
/// conflict-free.
std::optional<ReleaseSchedule> find_offsets(const Network& network, std::span<const int> periods,
                                            std::span<const int> rates,
                                            ConflictMode mode = ConflictMode::standard);

}  // namespace rampmeter
