#include "invariants.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "paths.hpp"
#include "support.hpp"

#include "rampmeter/batch.hpp"
#include "rampmeter/errors.hpp"
#include "rampmeter/kinematic.hpp"
#include "rampmeter/slot_sim.hpp"

namespace testing {

using namespace rampmeter;

int FuzzReport::failures() const {
  int n = 0;
  for (const auto& [_, count] : violations) n += count;
  return n;
}

namespace {

class Recorder {
 public:
  Recorder(FuzzReport& report, std::string tag) : report_(report), tag_(std::move(tag)) {}
  ~Recorder() {
    for (const auto& [name, what] : failed_) {
      ++report_.violations[name];
      if (report_.examples.size() < 10) report_.examples.push_back(tag_ + ": " + name + ": " + what);
    }
  }
  void fail(const std::string& name, const std::string& what) { failed_.emplace(name, what); }
  bool ok() const { return failed_.empty(); }

 private:
  FuzzReport& report_;
  std::string tag_;
  std::map<std::string, std::string> failed_;
};

nlohmann::json random_policy_variant(std::mt19937_64& rng, double lambda_hi) {
  auto j = random_valid_scenario_json(rng, {1, 4, 4, 4, true});
  j["demand"]["lambda"] = std::uniform_real_distribution<double>(0.05, lambda_hi)(rng);
  j["policy"]["T"] = std::uniform_int_distribution<int>(1, 3)(rng);
  if (rng() % 2) j["policy"]["type"] = "drra_nonreactive";
  return j;
}

// Checks on the vehicle logs shared by both backends: FIFO per ramp, M1 and
// M2 given the queue lengths frozen at each cycle start.
void check_logs(const Scenario& s, const RunResult& r, const std::vector<std::vector<std::int64_t>>& quotas,
                Recorder& rec) {
  const auto& net = s.network;
  const int T = s.policy.cycle_steps;
  const bool nonreactive = s.policy.kind == PolicyKind::drra_nonreactive;
  std::vector<std::int64_t> last_release(static_cast<std::size_t>(net.ramp_count()), 0);
  std::vector<bool> pending(static_cast<std::size_t>(net.ramp_count()), false);
  std::map<std::pair<RampIndex, std::int64_t>, std::int64_t> per_cycle;
  for (const auto& v : r.vehicles) {  // id order = arrival order
    if (v.ramp == kNone) continue;
    const auto i = static_cast<std::size_t>(v.ramp);
    if (v.release_step < 0) {
      pending[i] = true;
      continue;
    }
    std::ostringstream where;
    where << "vehicle " << v.id << " ramp " << net.ramp(v.ramp).id << " step " << v.release_step;
    if (pending[i]) rec.fail("fifo", where.str() + " overtook an earlier arrival");
    if (v.release_step <= last_release[i]) rec.fail("fifo", where.str() + " released out of order");
    last_release[i] = v.release_step;
    if (v.release_step < v.arrival_step) rec.fail("causality", where.str());
    if (v.exit_step >= 0 && v.exit_step <= v.release_step) rec.fail("causality", where.str() + " exit");
    const bool waived = nonreactive && !route_contains_merge(net, v.route);
    if (!waived && !s.policy.schedule.ramps[i].releases_at(v.release_step)) rec.fail("m1", where.str());
    const auto cycle = (v.release_step - 1) / T;
    const auto n = ++per_cycle[{v.ramp, cycle}];
    if (cycle >= static_cast<std::int64_t>(quotas.size()) || n > quotas[static_cast<std::size_t>(cycle)][i]) {
      rec.fail("m2", where.str() + " exceeds the frozen quota");
    }
  }
}

template <class Sim>
std::vector<std::int64_t> queue_sizes(const Sim& sim, int ramps) {
  std::vector<std::int64_t> q;
  for (RampIndex i = 0; i < ramps; ++i) q.push_back(static_cast<std::int64_t>(sim.queue(i).size()));
  return q;
}

void slot_run(std::mt19937_64& rng, bool deep, FuzzReport& report) {
  const auto j = random_policy_variant(rng, 1.0);
  const auto s = load_json(j);
  const auto seed = rng();
  Recorder rec(report, "slot " + j.dump() + " seed " + std::to_string(seed));
  const int ramps = s.network.ramp_count();
  const int T = s.policy.cycle_steps;
  const std::int64_t horizon = 400;

  SlotSimulator sim(s, seed);
  std::vector<std::vector<std::int64_t>> quotas;
  try {
    for (std::int64_t k = 0; k < horizon; ++k) {
      if (sim.clock() % T == 0) quotas.push_back(queue_sizes(sim, ramps));
      sim.step();
      std::set<std::int64_t> seen;
      std::int64_t on_road = 0;
      for (EdgeIndex e = 0; e < static_cast<EdgeIndex>(s.network.edges().size()); ++e) {
        if (s.network.edge(e).kind != EdgeKind::segment) continue;
        for (auto id : sim.cells(e)) {
          if (id < 0) continue;
          ++on_road;
          if (!seen.insert(id).second) rec.fail("exclusivity", "vehicle " + std::to_string(id) + " in two cells");
        }
      }
      const auto& res = sim.result();
      std::int64_t queued = 0;
      for (auto q : queue_sizes(sim, ramps)) queued += q;
      if (on_road != sim.on_mainline() || res.arrived + res.initial_vehicles != queued + on_road + res.exited) {
        rec.fail("conservation", "step " + std::to_string(sim.clock()));
      }
      if (deep) {
        const auto d = sim.node_degrees();
        for (RampIndex i = 0; i < ramps; ++i) {
          if (d[static_cast<std::size_t>(i)] < static_cast<std::int64_t>(sim.queue(i).size())) rec.fail("degree", "");
        }
      }
    }
  } catch (const CollisionError& e) {
    rec.fail("collision", e.what());
    return;
  }
  const auto result = sim.take_result();
  check_logs(s, result, quotas, rec);

  if (deep) {
    const auto again = run_slot(s, horizon, seed);
    bool same = again.queue_lengths == result.queue_lengths && again.vehicles.size() == result.vehicles.size();
    for (std::size_t k = 0; same && k < again.vehicles.size(); ++k) {
      same = again.vehicles[k].release_step == result.vehicles[k].release_step &&
             again.vehicles[k].exit_step == result.vehicles[k].exit_step;
    }
    if (!same) rec.fail("determinism", "rerun differs");
    const auto seeds = seed_range(seed % 1000, 3);
    const auto par = run_batch(s, 200, seeds);
    const auto ser = run_batch_serial(s, 200, seeds);
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      if (par[k].queue_lengths != ser[k].queue_lengths || par[k].exited != ser[k].exited) {
        rec.fail("determinism", "batch differs from serial");
      }
    }
  }
}

void kinematic_run(std::mt19937_64& rng, FuzzReport& report) {
  auto j = random_policy_variant(rng, 0.6);
  j["experiment"]["backend"] = "kinematic";
  const auto s = load_json(j);
  const auto seed = rng();
  Recorder rec(report, "kinematic " + j.dump() + " seed " + std::to_string(seed));
  const int ramps = s.network.ramp_count();
  const int T = s.policy.cycle_steps;

  KinematicSimulator sim(s, seed);
  std::vector<std::vector<std::int64_t>> quotas;
  try {
    for (int k = 0; k < 150; ++k) {
      if (sim.clock() % T == 0) quotas.push_back(queue_sizes(sim, ramps));
      sim.step();
      const auto& res = sim.result();
      std::int64_t queued = 0;
      for (auto q : queue_sizes(sim, ramps)) queued += q;
      if (res.arrived + res.initial_vehicles !=
          queued + static_cast<std::int64_t>(sim.vehicles().size()) + res.exited) {
        rec.fail("conservation", "step " + std::to_string(sim.clock()));
      }
    }
  } catch (const CollisionError& e) {
    rec.fail("kinematic collision", e.what());
    return;
  }
  const auto r = sim.take_result();
  if (r.min_gap_m < 0.0) rec.fail("kinematic collision", "negative gap");
  check_logs(s, r, quotas, rec);

  // M4: consecutive releases at a ramp are at least g apart, g as of the release instant.
  auto g_at = [&](double t) {
    double g = 0.0;
    for (std::size_t k = 0; k < r.xf_times.size() && r.xf_times[k] < t - 1e-9; ++k) g = r.gap_g[k];
    return g;
  };
  std::vector<double> last(static_cast<std::size_t>(ramps), -1e18);
  for (const auto& v : r.vehicles) {
    if (v.ramp == kNone || v.release_step < 0) continue;
    auto& prev = last[static_cast<std::size_t>(v.ramp)];
    if (v.release_s - prev < g_at(v.release_s) - 1e-9) rec.fail("m4", "vehicle " + std::to_string(v.id));
    prev = v.release_s;
  }
}

void ring_relaxation(std::mt19937_64& rng, FuzzReport& report) {
  static const auto base = nlohmann::json::parse(std::ifstream(scenario_path("ring")));
  auto j = base;
  const auto c = load_json(j).constants;
  const double ring_m = 60 * c.slot_spacing;
  const int count = std::uniform_int_distribution<int>(5, static_cast<int>(ring_m / (c.length + c.s0)))(rng);
  const double gap = ring_m / count - c.length;
  // Fastest speed whose equal-speed safety distance fits the initial gap.
  const double v_max = std::clamp((gap - c.s0) / c.h, 0.0, c.vf);
  const double speed = std::uniform_real_distribution<double>(0.0, v_max)(rng);
  j["demand"]["lambda"] = 0.0;
  j["experiment"]["initial"] = {{"type", "uniform_mainline"}, {"count", count}, {"speed", speed}};
  const auto s = load_json(j);
  const auto seed = rng();
  std::ostringstream tag;
  tag << "ring count " << count << " speed " << speed << " seed " << seed;
  Recorder rec(report, tag.str());
  RunResult r;
  try {
    r = run_kinematic(s, 800, seed);
  } catch (const CollisionError& e) {
    rec.fail("kinematic collision", e.what());
    return;
  }
  if (r.min_gap_m < 0.0) rec.fail("kinematic collision", "negative gap");
  const auto first = std::find(r.xf1.begin(), r.xf1.end(), 0.0);
  if (first == r.xf1.end()) {
    rec.fail("vc2", "X_f1 never reached 0");
    return;
  }
  if (std::any_of(first, r.xf1.end(), [](double x) { return x != 0.0; })) rec.fail("vc2", "X_f1 left 0 again");
  report.t_free_emp = std::max(report.t_free_emp, r.xf_times[static_cast<std::size_t>(first - r.xf1.begin())]);
}

// A platoon with random safe spacings and speeds on a road long enough that
// nobody exits before free flow: X_f1 must reach 0 with every vehicle present.
void platoon_relaxation(std::mt19937_64& rng, FuzzReport& report) {
  auto j = line_json(300, 0.0);
  j["experiment"]["backend"] = "kinematic";
  const auto s = load_json(j);
  const auto& c = s.constants;
  const int n = std::uniform_int_distribution<int>(2, 80)(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Car {
    double x, v;
  };
  std::vector<Car> cars;  // front to back
  double x = 2500.0, v_lead = c.vf * unit(rng);
  cars.push_back({x, v_lead});
  for (int k = 1; k < n; ++k) {
    const double gap = c.s0 + 40.0 * unit(rng) * unit(rng);
    double v = c.vf * unit(rng);
    while (v > 0.0 && safety_distance(v, v_lead, c) > gap) v = std::max(0.0, v - 0.05);
    x -= gap + c.length;
    cars.push_back({x, v});
    v_lead = v;
  }
  std::ostringstream tag;
  tag << "platoon of " << n << " (rng state " << rng() << ")";
  Recorder rec(report, tag.str());
  KinematicSimulator sim(s, 1);
  for (auto it = cars.rbegin(); it != cars.rend(); ++it) sim.place_vehicle(0, 1, it->x, it->v);
  try {
    while (sim.result().exited == 0 && sim.clock() < 2000) sim.step();
  } catch (const CollisionError& e) {
    rec.fail("kinematic collision", e.what());
    return;
  }
  const auto& r = sim.result();
  if (r.min_gap_m < 0.0) rec.fail("kinematic collision", "negative gap");
  const auto first = std::find(r.xf1.begin(), r.xf1.end(), 0.0);
  if (first == r.xf1.end()) {
    rec.fail("vc2", "X_f1 never reached 0 before the first exit");
    return;
  }
  if (std::any_of(first, r.xf1.end(), [](double v) { return v != 0.0; })) rec.fail("vc2", "X_f1 left 0 again");
  report.t_free_emp = std::max(report.t_free_emp, r.xf_times[static_cast<std::size_t>(first - r.xf1.begin())]);
}

}  // namespace

FuzzReport fuzz_invariants(std::uint64_t seed, int runs) {
  std::mt19937_64 rng(seed);
  FuzzReport report;
  for (int k = 0; k < runs; ++k) {
    switch (k % 10) {
      case 9:
        if (k % 20 == 9) {
          ring_relaxation(rng, report);
        } else {
          platoon_relaxation(rng, report);
        }
        ++report.relaxation_runs;
        break;
      case 8:
        kinematic_run(rng, report);
        ++report.kinematic_runs;
        break;
      default:
        slot_run(rng, k % 10 == 0, report);
        ++report.slot_runs;
    }
  }
  return report;
}

}  // namespace testing
