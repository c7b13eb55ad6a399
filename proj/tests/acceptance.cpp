// Runs every acceptance criterion and prints one PASS/FAIL line each, with
// the measured values. Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "invariants.hpp"
#include "oracles.hpp"
#include "paths.hpp"

#include "rampmeter/analysis.hpp"
#include "rampmeter/batch.hpp"
#include "rampmeter/scenario.hpp"

using namespace rampmeter;
using testing::scenario_path;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

Outcome bounds() {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream out;
  bool pass = true;
  struct Case {
    const char* name;
    Rational inner, outer;
  };
  for (const auto& c : {Case{"fig3a", Rational(1, 2), Rational(5, 9)}, Case{"fig3b", Rational(1, 3), Rational(5, 9)}}) {
    const auto s = load_scenario_or_throw(scenario_path(c.name));
    const auto inner = inner_bound(s.network, s.demand.routing, s.policy.schedule);
    const auto outer = outer_bound(s.network, s.demand.routing);
    pass = pass && inner == c.inner && outer == c.outer;
    out << c.name << " inner " << to_string(inner) << " outer " << to_string(outer) << "; ";
  }
  const double t = seconds_since(t0);
  out << "runtime " << fixed(t) << " s";
  return {pass && t < 1.0, out.str()};
}

// Bisection over [0.3, 0.7] at the scenario's budget (8 seeds, 2e5 steps).
Outcome boundary(const char* name, double drra_target, double nonreactive_target) {
  const auto base = load_scenario_or_throw(scenario_path(name));
  std::ostringstream out;
  bool pass = true;
  for (auto [kind, target] : {std::pair{PolicyKind::drra, drra_target},
                              std::pair{PolicyKind::drra_nonreactive, nonreactive_target}}) {
    const auto s = with_policy(base, kind);
    const auto probe = stability_probe(s, s.experiment.horizon, s.experiment.seeds);
    const auto e = estimate_boundary(probe, 0.3, 0.7, 0.01);
    const bool ok = std::abs(e.lambda_star - target) <= 0.03;
    pass = pass && ok;
    out << to_string(kind) << " lambda* " << fixed(e.lambda_star) << " (target " << fixed(target) << " +- 0.03); ";
  }
  out << base.experiment.seeds << " seeds, " << base.experiment.horizon << " steps";
  return {pass, out.str()};
}

Outcome ufamily() {
  const auto s = load_scenario_or_throw(scenario_path("fig1"));
  const auto& net = s.network;
  const auto u = enumerate_U(net, *net.find_ramp("on4"));
  using Level = std::set<std::vector<std::string>>;
  const std::vector<Level> caption{{{"on4"}}, {{"on2", "on3"}}, {{"on1", "on1"}, {"on1", "on3"}, {"on1", "on2"}}};
  std::ostringstream out;
  bool pass = u.levels.size() >= caption.size();
  for (std::size_t k = 0; k < u.levels.size(); ++k) {
    Level got;
    out << "U^" << k << " = {";
    for (std::size_t m = 0; m < u.levels[k].size(); ++m) {
      std::vector<std::string> ids;
      for (auto r : u.levels[k][m]) ids.push_back(net.ramp(r).id);
      got.insert(ids);
      out << (m ? ", " : "") << "{";
      for (std::size_t x = 0; x < ids.size(); ++x) out << (x ? "," : "") << ids[x];
      out << "}";
    }
    out << "} ";
    if (k < caption.size()) pass = pass && got == caption[k] && got.size() == u.levels[k].size();
  }
  return {pass, out.str()};
}

// Mean of curve[lo, hi).
double window_mean(const std::vector<double>& curve, std::size_t lo, std::size_t hi) {
  return std::accumulate(curve.begin() + static_cast<std::ptrdiff_t>(lo), curve.begin() + static_cast<std::ptrdiff_t>(hi),
                         0.0) /
         static_cast<double>(hi - lo);
}

Outcome travel_time() {
  const auto ring = load_scenario_or_throw(scenario_path("ring"));
  const auto seeds = seed_range(ring.experiment.base_seed, ring.experiment.seeds);
  RunOptions options;
  options.record_queues = false;
  const auto drra = mean_ttt_curve(run_batch(with_policy(ring, PolicyKind::drra), ring.experiment.horizon, seeds, options));
  const auto alinea =
      mean_ttt_curve(run_batch(with_policy(ring, PolicyKind::safe_alinea), ring.experiment.horizon, seeds, options));
  const std::size_t n = std::min(drra.size(), alinea.size());
  if (n < 100) return {false, "only " + std::to_string(n) + " trips completed"};
  const std::size_t burn = n / 10;

  std::size_t below = 0;
  for (std::size_t k = burn; k < n; ++k) below += drra[k] < alinea[k] ? 1 : 0;

  // Deciles of the post-burn-in range: Safe-ALINEA must rise through every
  // one; DRRA must stay within 10% of its post-burn-in mean.
  std::vector<double> a_dec, d_dec;
  for (int q = 0; q < 9; ++q) {
    const std::size_t lo = burn + (n - burn) * static_cast<std::size_t>(q) / 9;
    const std::size_t hi = burn + (n - burn) * static_cast<std::size_t>(q + 1) / 9;
    a_dec.push_back(window_mean(alinea, lo, hi));
    d_dec.push_back(window_mean(drra, lo, hi));
  }
  const bool alinea_rises = std::is_sorted(a_dec.begin(), a_dec.end(), std::less_equal<>()) &&
                            alinea[n - 1] > 1.5 * alinea[burn];
  const double d_mean = window_mean(drra, burn, n);
  const auto [d_min, d_max] = std::minmax_element(drra.begin() + static_cast<std::ptrdiff_t>(burn), drra.begin() + static_cast<std::ptrdiff_t>(n));
  const double spread = (*d_max - *d_min) / d_mean;
  const bool drra_flat = spread <= 0.1;

  std::ostringstream out;
  out << "n = " << burn + 1 << ".." << n << " (burn-in " << burn << "): DRRA below at " << below << "/" << n - burn
      << "; Safe-ALINEA TTT " << fixed(alinea[burn], 1) << " -> " << fixed(alinea[n - 1], 1) << " s"
      << (alinea_rises ? " rising" : " not rising") << "; DRRA " << fixed(drra[burn], 1) << " -> " << fixed(drra[n - 1], 1)
      << " s, spread " << fixed(100.0 * spread, 1) << "% of mean " << fixed(d_mean, 1) << " s";
  return {below == n - burn && alinea_rises && drra_flat, out.str()};
}

Outcome recovery() {
  const auto ring = load_scenario_or_throw(scenario_path("ring"));
  const auto seeds = seed_range(ring.experiment.base_seed, ring.experiment.seeds);
  RunOptions options;
  options.record_vehicles = false;
  options.record_queues = false;
  const auto runs = run_batch(ring, ring.experiment.horizon, seeds, options);
  std::ostringstream out;
  bool pass = true;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    const auto n = run.xf_times.size();
    // Last update with X_f > 0 and last with g > 0; both must be followed by zeros.
    std::ptrdiff_t last_xf = -1, last_g = -1;
    for (std::size_t k = 0; k < n; ++k) {
      if (run.xf1[k] + run.xf2[k] > 0.0) last_xf = static_cast<std::ptrdiff_t>(k);
      if (run.gap_g[k] > 0.0) last_g = static_cast<std::ptrdiff_t>(k);
    }
    const bool started_congested = n > 0 && run.xf1.front() > 0.0;
    const bool settled = last_xf + 1 < static_cast<std::ptrdiff_t>(n) && last_g + 1 < static_cast<std::ptrdiff_t>(n);
    pass = pass && started_congested && settled;
    const auto at = [&](std::ptrdiff_t k) { return k + 1 < static_cast<std::ptrdiff_t>(n) ? run.xf_times[static_cast<std::size_t>(k + 1)] : -1.0; };
    out << "seed " << seeds[r] << ": X_f0 " << fixed(n ? run.xf1.front() : 0.0, 1) << ", X_f = 0 from " << fixed(at(last_xf), 1)
        << " s, g = 0 from " << fixed(at(last_g), 1) << " s; ";
  }
  out << "horizon " << fixed(static_cast<double>(ring.experiment.horizon) * ring.constants.tau, 0) << " s";
  return {pass, out.str()};
}

Outcome oracles() {
  std::ostringstream out;
  const auto sched = testing::check_schedule_verifier(20240611, 200);
  out << "(a) verifier vs monitor: " << sched.disagreements << " disagreements in " << sched.comparisons << " ("
      << sched.conflicts << " conflicting); ";
  bool pass = sched.disagreements == 0;
  out << "(b) chain TV at 1e6 steps:";
  for (int cycle : {1, 2}) {
    const double tv = testing::chain_tv(0.5, cycle, 1'000'000, 42);
    pass = pass && tv < 0.02;
    out << " T=" << cycle << " " << fixed(tv, 4);
  }
  const auto u = testing::check_u_families(11, 300, 5);
  out << "; (c) U families: " << u.mismatches << " mismatches over " << u.ramps_checked << " ramps";
  pass = pass && u.mismatches == 0;
  return {pass, out.str()};
}

Outcome invariants() {
  const auto r = testing::fuzz_invariants(2025, 1000);
  std::ostringstream out;
  out << r.runs() << " runs (slot " << r.slot_runs << ", kinematic " << r.kinematic_runs << ", relaxation "
      << r.relaxation_runs << "), " << r.failures() << " violations";
  for (const auto& [name, count] : r.violations) out << "; " << name << " " << count;
  for (const auto& e : r.examples) out << "; e.g. " << e;
  out << "; slowest relaxation " << fixed(r.t_free_emp, 1) << " s";
  return {r.runs() == 1000 && r.failures() == 0, out.str()};
}

DriftStats drift_at(const Scenario& base, double lambda) {
  const auto s = with_uniform_lambda(base, lambda);
  RunOptions options;
  options.record_vehicles = false;
  options.degree_every = s.policy.cycle_steps;
  const auto runs = run_batch(s, s.experiment.horizon, seed_range(s.experiment.base_seed, s.experiment.seeds), options);
  const auto families = all_families(s.network);
  std::vector<std::vector<double>> series;
  for (const auto& r : runs) series.push_back(lyapunov_series(r, families));
  return lyapunov_drift(series, std::nullopt, 0.9);
}

Outcome drift() {
  const auto base = load_scenario_or_throw(scenario_path("fig3a"));
  const auto low = drift_at(base, 0.45);
  const auto high = drift_at(base, 0.58);
  std::ostringstream out;
  for (auto [lambda, d] : {std::pair{0.45, &low}, std::pair{0.58, &high}}) {
    out << "lambda " << lambda << ": L " << d->threshold << ", " << d->samples << " samples, mean "
        << fixed(d->mean, 2) << ", 95% CI [" << fixed(d->ci_low, 2) << ", " << fixed(d->ci_high, 2) << "]; ";
  }
  const bool pass = !low.empty() && low.ci_high < 0.0 && !high.empty() && high.ci_high >= 0.0;
  return {pass, out.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, bounds},
      {2, [] { return boundary("fig3a", 0.50, 0.556); }},
      {3, [] { return boundary("fig3b", 0.40, 0.556); }},
      {4, ufamily},
      {5, travel_time},
      {6, recovery},
      {7, oracles},
      {8, invariants},
      {9, drift},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed;
}
