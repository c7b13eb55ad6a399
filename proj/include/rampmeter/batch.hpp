#pragma once

#include <cstdint>
#include <vector>

#include "rampmeter/scenario.hpp"
#include "rampmeter/trace.hpp"

namespace rampmeter {

/// Seeds base_seed, base_seed + 1, ..., base_seed + count - 1.
std::vector<std::uint64_t> seed_range(std::uint64_t base_seed, int count);

/// Runs one independent simulation per seed on the OpenMP thread pool.
/// Results are returned in seed order; the first exception (by seed order)
/// is rethrown after all workers finish.
std::vector<RunResult> run_batch(const Scenario& scenario, std::int64_t horizon, const std::vector<std::uint64_t>& seeds,
                                 RunOptions options = {});

/// Reference implementation of run_batch: same results, one seed at a time.
std::vector<RunResult> run_batch_serial(const Scenario& scenario, std::int64_t horizon,
                                        const std::vector<std::uint64_t>& seeds, RunOptions options = {});

}  // namespace rampmeter
