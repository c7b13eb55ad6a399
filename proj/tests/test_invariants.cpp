#include "doctest.h"

#include "invariants.hpp"

TEST_CASE("randomized invariant sweep") {
  const auto report = testing::fuzz_invariants(2024, 200);
  CHECK(report.runs() == 200);
  for (const auto& e : report.examples) MESSAGE(e);
  CHECK(report.failures() == 0);
  MESSAGE("slot " << report.slot_runs << ", kinematic " << report.kinematic_runs << ", relaxation "
                  << report.relaxation_runs << "; slowest relaxation to free flow: " << report.t_free_emp << " s");
}
