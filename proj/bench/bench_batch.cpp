// Wall-clock throughput of the slot and kinematic backends, serial against
// the OpenMP batch. Usage: bench_batch [scenario.json] [steps] [seeds]

#include <chrono>
#include <cstdio>
#include <string>

#include "rampmeter/batch.hpp"
#include "rampmeter/scenario.hpp"

using namespace rampmeter;

namespace {

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : "scenarios/fig3a.json";
  const auto s = load_scenario_or_throw(path);
  const std::int64_t steps = argc > 2 ? std::stoll(argv[2]) : s.experiment.horizon;
  const int count = argc > 3 ? std::stoi(argv[3]) : s.experiment.seeds;
  const auto seeds = seed_range(s.experiment.base_seed, count);
  RunOptions options;
  options.record_vehicles = false;

  const double serial = timed([&] { run_batch_serial(s, steps, seeds, options); });
  const double batch = timed([&] { run_batch(s, steps, seeds, options); });
  const double total = static_cast<double>(steps) * count;
  std::printf("%s: %d seeds x %lld steps\n", path.c_str(), count, static_cast<long long>(steps));
  std::printf("serial %.3f s (%.3g steps/s), batch %.3f s (%.3g steps/s), speedup %.2f\n", serial, total / serial, batch,
              total / batch, serial / batch);
}
