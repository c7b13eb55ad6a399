#include "rampmeter/batch.hpp"

#include <exception>

#include "rampmeter/kinematic.hpp"

namespace rampmeter {

std::vector<std::uint64_t> seed_range(std::uint64_t base_seed, int count) {
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < count; ++k) seeds.push_back(base_seed + static_cast<std::uint64_t>(k));
  return seeds;
}

std::vector<RunResult> run_batch(const Scenario& scenario, std::int64_t horizon, const std::vector<std::uint64_t>& seeds,
                                 RunOptions options) {
  const auto n = static_cast<std::int64_t>(seeds.size());
  std::vector<RunResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      results[i] = run_scenario(scenario, horizon, seeds[i], options);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<RunResult> run_batch_serial(const Scenario& scenario, std::int64_t horizon,
                                        const std::vector<std::uint64_t>& seeds, RunOptions options) {
  std::vector<RunResult> results;
  results.reserve(seeds.size());
  for (auto seed : seeds) results.push_back(run_scenario(scenario, horizon, seed, options));
  return results;
}

}  // namespace rampmeter
