#include "rampmeter/schedule.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <string>

#include "rampmeter/errors.hpp"

namespace rampmeter {

bool RampSchedule::releases_at(std::int64_t step) const {
  if (step < 1 || period < 1) return false;
  const auto n = static_cast<int>((step - 1) % period) + 1;
  return std::find(offsets.begin(), offsets.end(), n) != offsets.end();
}

ValidationReport validate_schedule(const Network& net, const ReleaseSchedule& schedule, const std::string& pointer) {
  ValidationReport report;
  if (schedule.ramps.size() != static_cast<std::size_t>(net.ramp_count())) {
    report.add(pointer, "expected one schedule entry per ramp");
    return report;
  }
  for (std::size_t i = 0; i < schedule.ramps.size(); ++i) {
    const auto& rs = schedule.ramps[i];
    const std::string where = pointer + "/" + net.ramp(static_cast<int>(i)).id;
    if (rs.period < 1) {
      report.add(where + "/b", "period must be a positive integer");
      continue;
    }
    if (rs.offsets.empty()) report.add(where + "/offsets", "at least one offset is required");
    std::set<int> seen;
    for (int n : rs.offsets) {
      if (n < 1 || n > rs.period) report.add(where + "/offsets", "offset " + std::to_string(n) + " outside [1, b]");
      if (!seen.insert(n).second) report.add(where + "/offsets", "duplicate offset " + std::to_string(n));
    }
  }
  return report;
}

std::int64_t hyperperiod(const ReleaseSchedule& schedule) {
  std::int64_t h = 1;
  for (const auto& rs : schedule.ramps) {
    if (rs.period < 1) throw ValidationError("schedule period must be positive");
    h = std::lcm(h, static_cast<std::int64_t>(rs.period));
    if (h > kMaxHyperperiod) {
      throw ConfigError("hyperperiod exceeds " + std::to_string(kMaxHyperperiod) + "; choose smaller periods");
    }
  }
  return h;
}

namespace {

struct NodeEvents {
  NodeIndex node;
  std::vector<ReleaseEvent> events;
};

std::vector<NodeEvents> collect_events(const Network& net, const ReleaseSchedule& schedule, int ramp_limit) {
  std::vector<NodeEvents> out;
  for (NodeIndex v = 0; v < static_cast<NodeIndex>(net.nodes().size()); ++v) {
    if (!net.is_joining(v)) continue;
    NodeEvents ne{v, {}};
    for (RampIndex i = 0; i < ramp_limit; ++i) {
      auto offsets = schedule.ramps[static_cast<std::size_t>(i)].offsets;
      std::sort(offsets.begin(), offsets.end());
      for (int n : offsets) {
        for (RouteIndex p : net.routes_from(i)) {
          for (const auto& visit : net.route(p).visits) {
            if (visit.node == v) ne.events.push_back({i, n, p, visit.steps, visit.via});
          }
        }
      }
    }
    if (ne.events.size() > 1) out.push_back(std::move(ne));
  }
  return out;
}

// Earliest step t >= both arrival starts with t = n_a + c_a (mod b_a) and
// t = n_b + c_b (mod b_b); nothing if the residue classes are disjoint.
std::optional<std::int64_t> first_common_step(std::int64_t start_a, std::int64_t period_a, std::int64_t start_b,
                                              std::int64_t period_b) {
  const auto g = std::gcd(period_a, period_b);
  const auto diff = start_a - start_b;
  if (((diff % g) + g) % g != 0) return std::nullopt;
  const auto lcm = period_a / g * period_b;
  std::int64_t t = start_a;
  while (t < start_b) t += period_a;
  for (std::int64_t k = 0; k <= lcm / period_a; ++k, t += period_a) {
    if ((t - start_b) % period_b == 0) return t;
  }
  return std::nullopt;
}

bool colocated(const Network& net, const ReleaseEvent& e) {
  return net.edge(e.via).kind == EdgeKind::on_ramp;
}

std::optional<ConflictWitness> first_conflict(const Network& net, const ReleaseSchedule& schedule, ConflictMode mode,
                                              int ramp_limit, std::int64_t hyper) {
  for (const auto& ne : collect_events(net, schedule, ramp_limit)) {
    const auto& ev = ne.events;
    for (std::size_t a = 0; a < ev.size(); ++a) {
      for (std::size_t b = a + 1; b < ev.size(); ++b) {
        const auto& x = ev[a];
        const auto& y = ev[b];
        if (x.via == y.via) continue;
        if (mode == ConflictMode::standard && (colocated(net, x) || colocated(net, y))) continue;
        // Identical release stream and timing: the same vehicle on two route options.
        if (x.ramp == y.ramp && x.offset == y.offset && x.steps == y.steps) continue;
        const auto bx = schedule.ramps[static_cast<std::size_t>(x.ramp)].period;
        const auto by = schedule.ramps[static_cast<std::size_t>(y.ramp)].period;
        auto t = first_common_step(x.offset + x.steps, bx, y.offset + y.steps, by);
        if (!t) continue;
        return ConflictWitness{ne.node, x, y, *t % hyper, *t, hyper};
      }
    }
  }
  return std::nullopt;
}

void next_combination_search(const Network& net, std::span<const int> periods, std::span<const int> rates,
                             ConflictMode mode, std::int64_t hyper, ReleaseSchedule& current, int ramp,
                             std::optional<ReleaseSchedule>& found);

// Enumerates `rate`-subsets of [1, period] in lexicographic order.
bool for_each_subset(int period, int rate, const std::function<bool(const std::vector<int>&)>& visit) {
  std::vector<int> pick(static_cast<std::size_t>(rate));
  std::iota(pick.begin(), pick.end(), 1);
  while (true) {
    if (visit(pick)) return true;
    int k = rate - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == period - rate + k + 1) --k;
    if (k < 0) return false;
    ++pick[static_cast<std::size_t>(k)];
    for (int j = k + 1; j < rate; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
}

void next_combination_search(const Network& net, std::span<const int> periods, std::span<const int> rates,
                             ConflictMode mode, std::int64_t hyper, ReleaseSchedule& current, int ramp,
                             std::optional<ReleaseSchedule>& found) {
  if (ramp == net.ramp_count()) {
    found = current;
    return;
  }
  const auto i = static_cast<std::size_t>(ramp);
  for_each_subset(periods[i], rates[i], [&](const std::vector<int>& offsets) {
    current.ramps[i].offsets = offsets;
    if (!first_conflict(net, current, mode, ramp + 1, hyper)) {
      next_combination_search(net, periods, rates, mode, hyper, current, ramp + 1, found);
    }
    return found.has_value();
  });
}

}  // namespace

std::optional<ConflictWitness> verify_conflict_free(const Network& net, const ReleaseSchedule& schedule,
                                                    ConflictMode mode) {
  auto report = validate_schedule(net, schedule);
  if (!report.ok()) throw ValidationError(report.issues.front().where + ": " + report.issues.front().message);
  const auto hyper = hyperperiod(schedule);
  return first_conflict(net, schedule, mode, net.ramp_count(), hyper);
}

std::optional<ReleaseSchedule> find_offsets(const Network& net, std::span<const int> periods,
                                            std::span<const int> rates, ConflictMode mode) {
  const auto n = static_cast<std::size_t>(net.ramp_count());
  if (periods.size() != n || rates.size() != n) throw ValidationError("need one period and one rate per ramp");
  ReleaseSchedule current;
  for (std::size_t i = 0; i < n; ++i) {
    if (periods[i] < 1 || rates[i] < 1 || rates[i] > periods[i]) {
      throw ValidationError("ramp " + net.ramp(static_cast<int>(i)).id + ": need 1 <= a <= b");
    }
    current.ramps.push_back({periods[i], {}});
  }
  const auto hyper = hyperperiod(current);
  std::optional<ReleaseSchedule> found;
  next_combination_search(net, periods, rates, mode, hyper, current, 0, found);
  return found;
}

}  // namespace rampmeter
