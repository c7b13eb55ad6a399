#include "rampmeter/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "rampmeter/batch.hpp"
#include "rampmeter/demand.hpp"
#include "rampmeter/errors.hpp"

namespace rampmeter {

Rational inner_bound(const Network& net, const std::vector<std::vector<double>>& routing,
                     const ReleaseSchedule& schedule) {
  const auto c = load_coefficients(net, routing);
  Rational best(1);
  for (RampIndex i = 0; i < net.ramp_count(); ++i) {
    const auto& load = c[static_cast<std::size_t>(net.ramp(i).node)];
    if (load.numerator() == 0) continue;
    const auto& rs = schedule.ramps.at(static_cast<std::size_t>(i));
    best = std::min(best, Rational(rs.allowed(), rs.period) / load);
  }
  return best;
}

Rational outer_bound(const Network& net, const std::vector<std::vector<double>>& routing) {
  const auto c = load_coefficients(net, routing);
  Rational top(0);
  for (const auto& load : c) top = std::max(top, load);
  if (top <= Rational(1)) return Rational(1);
  return Rational(1) / top;
}

UFamily enumerate_U(const Network& net, RampIndex ramp, int k_max) {
  if (!net.acyclic()) throw ValidationError("predecessor families need an acyclic network");
  if (ramp < 0 || ramp >= net.ramp_count()) throw ValidationError("unknown ramp index " + std::to_string(ramp));
  UFamily out;
  out.ramp = ramp;
  out.levels.push_back({Multiset{ramp}});
  if (k_max < 1) return out;
  Multiset first = net.predecessors(ramp);
  std::sort(first.begin(), first.end());
  out.levels.push_back({first});
  for (int k = 2; k <= k_max; ++k) {
    std::set<Multiset> next;
    for (const auto& base : out.levels.back()) {
      // Every element j independently becomes {j} or M_j^-.
      std::vector<Multiset> partial{{}};
      for (auto j : base) {
        std::vector<Multiset> grown;
        for (const auto& p : partial) {
          Multiset keep = p;
          keep.push_back(j);
          grown.push_back(std::move(keep));
          Multiset swap = p;
          const auto& pred = net.predecessors(j);
          swap.insert(swap.end(), pred.begin(), pred.end());
          grown.push_back(std::move(swap));
        }
        partial = std::move(grown);
      }
      for (auto& m : partial) {
        if (m.empty()) continue;
        std::sort(m.begin(), m.end());
        next.insert(std::move(m));
      }
    }
    for (const auto& prev : out.levels.back()) next.erase(prev);
    if (next.empty()) break;
    out.levels.emplace_back(next.begin(), next.end());
  }
  return out;
}

std::vector<Multiset> all_families(const Network& net, int k_max) {
  std::set<Multiset> all;
  for (RampIndex i = 0; i < net.ramp_count(); ++i) {
    for (const auto& level : enumerate_U(net, i, k_max).levels) all.insert(level.begin(), level.end());
  }
  return {all.begin(), all.end()};
}

std::int64_t family_degree(std::span<const std::int64_t> degrees, const std::vector<Multiset>& families) {
  std::int64_t best = 0;
  for (const auto& family : families) {
    std::int64_t sum = 0;
    for (auto j : family) sum += degrees[static_cast<std::size_t>(j)];
    best = std::max(best, sum);
  }
  return best;
}

std::vector<double> lyapunov_series(const RunResult& run, const std::vector<Multiset>& families, int stride) {
  std::vector<double> v;
  if (stride < 1) stride = 1;
  for (std::size_t k = 0; k < run.degrees.size(); k += static_cast<std::size_t>(stride)) {
    const auto d = static_cast<double>(family_degree(run.degrees[k], families));
    v.push_back(d * d);
  }
  return v;
}

DriftStats lyapunov_drift(const std::vector<std::vector<double>>& v_series, std::optional<double> level,
                          double quantile, int batches) {
  DriftStats out;
  double threshold = level.value_or(0.0);
  if (!level) {
    std::vector<double> all;
    for (const auto& s : v_series) all.insert(all.end(), s.begin(), s.end());
    if (all.empty()) return out;
    const auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(all.size())));
    const auto idx = std::min(all.size() - 1, rank == 0 ? 0 : rank - 1);
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(idx), all.end());
    threshold = all[idx];
  }
  out.threshold = threshold;
  std::vector<double> drift;
  for (const auto& s : v_series) {
    for (std::size_t n = 0; n + 1 < s.size(); ++n) {
      if (s[n] > threshold) drift.push_back(s[n + 1] - s[n]);
    }
  }
  out.samples = drift.size();
  if (drift.empty()) return out;
  out.mean = std::accumulate(drift.begin(), drift.end(), 0.0) / static_cast<double>(drift.size());
  const auto b = static_cast<std::size_t>(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(batches, 2)), 2,
                                                                  std::max<std::size_t>(drift.size(), 2)));
  if (drift.size() < 2 * b) {
    out.std_error = std::numeric_limits<double>::infinity();
    out.ci_low = -out.std_error;
    out.ci_high = out.std_error;
    return out;
  }
  std::vector<double> means;
  const std::size_t per = drift.size() / b;
  for (std::size_t k = 0; k < b; ++k) {
    const auto first = drift.begin() + static_cast<std::ptrdiff_t>(k * per);
    const auto last = k + 1 == b ? drift.end() : first + static_cast<std::ptrdiff_t>(per);
    means.push_back(std::accumulate(first, last, 0.0) / static_cast<double>(last - first));
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(b);
  double ss = 0.0;
  for (double x : means) ss += (x - m) * (x - m);
  out.std_error = std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
  const boost::math::students_t dist(static_cast<double>(b - 1));
  const double t = boost::math::quantile(dist, 0.975);
  out.ci_low = out.mean - t * out.std_error;
  out.ci_high = out.mean + t * out.std_error;
  return out;
}

double trailing_slope(std::span<const std::int64_t> total_queue) {
  const std::size_t n = total_queue.size();
  if (n < 4) return 0.0;
  const std::size_t start = n / 2;
  const double count = static_cast<double>(n - start);
  const double x_mean = (static_cast<double>(start) + static_cast<double>(n - 1)) / 2.0;
  double y_mean = 0.0;
  for (std::size_t k = start; k < n; ++k) y_mean += static_cast<double>(total_queue[k]);
  y_mean /= count;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = start; k < n; ++k) {
    const double dx = static_cast<double>(k) - x_mean;
    sxy += dx * (static_cast<double>(total_queue[k]) - y_mean);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

StabilityVerdict stability_verdict(double lambda, std::span<const std::uint64_t> seeds, std::span<const double> slopes,
                                   double tolerance) {
  StabilityVerdict v;
  v.lambda = lambda;
  v.seeds.assign(seeds.begin(), seeds.end());
  v.slopes.assign(slopes.begin(), slopes.end());
  const auto flat = std::count_if(slopes.begin(), slopes.end(), [&](double s) { return s <= tolerance; });
  v.stable = 2 * static_cast<std::size_t>(flat) > slopes.size();
  return v;
}

BoundaryEstimate estimate_boundary(const StabilityProbe& probe, double lo, double hi, double resolution) {
  if (!(lo >= 0.0 && hi <= 1.0 && lo < hi)) {
    throw ValidationError("boundary bracket [" + std::to_string(lo) + ", " + std::to_string(hi) + "] is degenerate");
  }
  if (!(resolution > 0.0)) throw ValidationError("resolution must be positive");
  BoundaryEstimate out;
  auto low = probe(lo);
  out.evaluations.push_back(low);
  if (!low.stable) throw ValidationError("lower bracket lambda = " + std::to_string(lo) + " is not stable");
  auto high = probe(hi);
  out.evaluations.push_back(high);
  if (high.stable) throw ValidationError("upper bracket lambda = " + std::to_string(hi) + " is not saturated");
  while (hi - lo > resolution + 1e-12) {
    const double mid = 0.5 * (lo + hi);
    auto verdict = probe(mid);
    out.evaluations.push_back(verdict);
    (verdict.stable ? lo : hi) = mid;
  }
  out.lo = lo;
  out.hi = hi;
  out.lambda_star = 0.5 * (lo + hi);
  return out;
}

StabilityProbe stability_probe(const Scenario& scenario, std::int64_t horizon, int seeds, double tolerance) {
  return [scenario, horizon, seeds, tolerance](double lambda) {
    const auto s = with_uniform_lambda(scenario, lambda);
    const auto seed_list = seed_range(scenario.experiment.base_seed, seeds);
    RunOptions options;
    options.record_vehicles = false;
    options.record_queues = false;
    const auto runs = run_batch(s, horizon, seed_list, options);
    std::vector<double> slopes;
    for (const auto& r : runs) slopes.push_back(trailing_slope(r.total_queue));
    return stability_verdict(lambda, seed_list, slopes, tolerance);
  };
}

namespace {

std::vector<const VehicleLog*> completed_in_exit_order(std::span<const VehicleLog> logs) {
  std::vector<const VehicleLog*> done;
  for (const auto& v : logs) {
    if (v.ramp != kNone && !std::isnan(v.exit_s)) done.push_back(&v);
  }
  std::sort(done.begin(), done.end(), [](const VehicleLog* a, const VehicleLog* b) {
    if (a->exit_s != b->exit_s) return a->exit_s < b->exit_s;
    return a->id < b->id;
  });
  return done;
}

}  // namespace

double ttt(std::span<const VehicleLog> logs, std::size_t n) {
  if (n == 0) throw ValidationError("TTT_n needs n >= 1");
  const auto done = completed_in_exit_order(logs);
  if (done.size() < n) {
    throw ValidationError("only " + std::to_string(done.size()) + " trips completed, TTT_" + std::to_string(n) +
                          " needs " + std::to_string(n));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += done[k]->exit_s - done[k]->arrival_s;
  return sum / static_cast<double>(n);
}

std::vector<double> ttt_curve(std::span<const VehicleLog> logs) {
  const auto done = completed_in_exit_order(logs);
  std::vector<double> curve;
  curve.reserve(done.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < done.size(); ++k) {
    sum += done[k]->exit_s - done[k]->arrival_s;
    curve.push_back(sum / static_cast<double>(k + 1));
  }
  return curve;
}

std::vector<double> mean_ttt_curve(const std::vector<RunResult>& runs) {
  std::vector<double> mean;
  if (runs.empty()) return mean;
  std::vector<std::vector<double>> curves;
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& r : runs) {
    curves.push_back(ttt_curve(r.vehicles));
    n = std::min(n, curves.back().size());
  }
  mean.assign(n, 0.0);
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < n; ++k) mean[k] += c[k];
  }
  for (auto& x : mean) x /= static_cast<double>(curves.size());
  return mean;
}

}  // namespace rampmeter
