#include "rampmeter/slot_sim.hpp"

#include <algorithm>
#include <string>

#include "rampmeter/errors.hpp"

namespace rampmeter {

double crossing_rate(const RunResult& result, std::size_t probe) {
  if (probe >= result.probe_counts.size()) throw ValidationError("unknown probe " + std::to_string(probe));
  if (result.horizon == 0) return 0.0;
  return static_cast<double>(result.probe_counts[probe]) / static_cast<double>(result.horizon);
}

SlotSimulator::SlotSimulator(const Scenario& scenario, std::uint64_t seed, RunOptions options)
    : scenario_(&scenario),
      options_(options),
      drra_(scenario.network.ramp_count(), scenario.policy.cycle_steps),
      gap_(initial_gap_state(scenario.policy.gap, 0.0)) {
  const auto& net = scenario.network;
  const auto n_edges = net.edges().size();
  const auto n_ramps = static_cast<std::size_t>(net.ramp_count());
  cells_.resize(n_edges);
  for (std::size_t e = 0; e < n_edges; ++e) {
    if (net.edges()[e].kind == EdgeKind::segment) cells_[e].assign(static_cast<std::size_t>(net.edges()[e].slot_count), -1);
  }
  incoming_.assign(n_edges, -1);
  queues_.resize(n_ramps);
  queued_on_route_.assign(static_cast<std::size_t>(net.route_count()), 0);
  for (std::size_t i = 0; i < n_ramps; ++i) {
    arrival_rng_.push_back(RngStream::derive(seed, i, StreamPurpose::arrival));
    route_rng_.push_back(RngStream::derive(seed, i, StreamPurpose::route));
  }
  for (RouteIndex r = 0; r < net.route_count(); ++r) route_has_merge_.push_back(route_contains_merge(net, r) ? 1 : 0);
  remaining_ramps_ = remaining_ramp_crossings(net);
  alinea_.assign(n_ramps, AlineaState{scenario.policy.alinea.r_init, 0.0});
  occupancy_accum_.assign(n_ramps, 0.0);
  next_alinea_s_ = scenario.policy.alinea.period_s;

  result_.ramps = static_cast<int>(n_ramps);
  result_.tau = scenario.constants.tau;
  result_.seed = seed;
  result_.probe_counts.assign(scenario.experiment.probes.size(), 0);
  result_.holds.assign(n_ramps, {});

  if (scenario.experiment.initial.kind == InitialKind::slot_preload) {
    RngStream init = RngStream::derive(seed, 0, StreamPurpose::init);
    for (EdgeIndex e = 0; e < static_cast<EdgeIndex>(n_edges); ++e) {
      if (net.edge(e).kind != EdgeKind::segment) continue;
      // Candidate (route, position) pairs that pass through this segment.
      std::vector<std::pair<RouteIndex, int>> through;
      for (RouteIndex r = 0; r < net.route_count(); ++r) {
        const auto& edges = net.route(r).edges;
        for (std::size_t k = 0; k < edges.size(); ++k) {
          if (edges[k] == e) through.emplace_back(r, static_cast<int>(k));
        }
      }
      if (through.empty()) continue;
      for (int c = 0; c < net.edge(e).slot_count; ++c) {
        if (init.uniform() >= scenario.experiment.initial.occupancy) continue;
        const auto pick = through[static_cast<std::size_t>(init.next_u64() % through.size())];
        place_vehicle(pick.first, pick.second, c);
      }
    }
    result_.initial_vehicles = on_mainline_;
  } else if (scenario.experiment.initial.kind == InitialKind::uniform_mainline) {
    throw ConfigError("uniform_mainline initial condition needs the kinematic backend");
  }
}

std::int64_t SlotSimulator::new_vehicle(RampIndex ramp, RouteIndex route) {
  const auto id = static_cast<std::int64_t>(live_.size());
  live_.push_back({route, 0});
  VehicleLog log;
  log.id = id;
  log.ramp = ramp;
  log.route = route;
  log.arrival_step = clock_;
  log.arrival_s = static_cast<double>(clock_) * scenario_->constants.tau;
  result_.vehicles.push_back(log);
  return id;
}

std::int64_t SlotSimulator::place_vehicle(RouteIndex route, int edge_pos, int cell) {
  const auto& r = scenario_->network.route(route);
  const auto e = r.edges.at(static_cast<std::size_t>(edge_pos));
  auto& cells = cells_.at(static_cast<std::size_t>(e));
  if (cell < 0 || cell >= static_cast<int>(cells.size())) throw ContractViolation("cell out of range");
  if (cells[static_cast<std::size_t>(cell)] != -1) throw ContractViolation("cell already occupied");
  const auto id = new_vehicle(kNone, route);
  live_[static_cast<std::size_t>(id)].edge_pos = edge_pos;
  cells[static_cast<std::size_t>(cell)] = id;
  ++on_mainline_;
  return id;
}

std::int64_t SlotSimulator::enqueue(RampIndex ramp, RouteIndex route) {
  const auto id = new_vehicle(ramp, route);
  queues_.at(static_cast<std::size_t>(ramp)).push_back({id, route});
  ++queued_on_route_[static_cast<std::size_t>(route)];
  ++result_.arrived;
  return id;
}

void SlotSimulator::advance() {
  const auto& net = scenario_->network;
  const double t_s = static_cast<double>(clock_) * scenario_->constants.tau;
  std::fill(incoming_.begin(), incoming_.end(), -1);
  for (std::size_t e = 0; e < cells_.size(); ++e) {
    auto& cells = cells_[e];
    if (cells.empty() || cells.back() == -1) continue;
    const auto id = cells.back();
    auto& v = live_[static_cast<std::size_t>(id)];
    const auto& route = net.route(v.route);
    const auto next = route.edges[static_cast<std::size_t>(v.edge_pos + 1)];
    if (net.edge(next).kind == EdgeKind::off_ramp) {
      auto& log = result_.vehicles[static_cast<std::size_t>(id)];
      log.exit_step = clock_;
      log.exit_s = t_s;
      ++result_.exited;
      --on_mainline_;
      continue;
    }
    auto& slot = incoming_[static_cast<std::size_t>(next)];
    if (slot != -1) {
      throw CollisionError("collision entering segment '" + net.edge(next).id + "' at step " + std::to_string(clock_),
                           slot, id);
    }
    slot = id;
    ++v.edge_pos;
  }
  for (std::size_t e = 0; e < cells_.size(); ++e) {
    auto& cells = cells_[e];
    if (cells.empty()) continue;
    std::move_backward(cells.begin(), cells.end() - 1, cells.end());
    cells.front() = incoming_[e];
  }
}

void SlotSimulator::arrivals() {
  const auto& demand = scenario_->demand;
  for (std::size_t i = 0; i < queues_.size(); ++i) {
    if (sample_arrival(arrival_rng_[i], demand.lambda[i]) == 0) continue;
    const auto route = sample_route(route_rng_[i], demand.routing[i]);
    enqueue(static_cast<RampIndex>(i), route);
  }
}

bool SlotSimulator::target_free(RouteIndex route) const {
  const auto target = scenario_->network.route(route).edges.at(1);
  return cells_[static_cast<std::size_t>(target)].front() == -1;
}

double SlotSimulator::detector_occupancy(RampIndex ramp) const {
  const auto& net = scenario_->network;
  const auto& c = scenario_->constants;
  const auto node = net.ramp(ramp).node;
  for (auto e : net.out_edges(node)) {
    if (net.edge(e).kind != EdgeKind::segment) continue;
    const auto& cells = cells_[static_cast<std::size_t>(e)];
    const auto zone = std::max<std::size_t>(
        1, std::min(cells.size(), static_cast<std::size_t>(scenario_->policy.alinea.detector_length_m / c.slot_spacing + 0.5)));
    std::size_t occupied = 0;
    for (std::size_t k = 0; k < zone; ++k) occupied += cells[k] != -1 ? 1 : 0;
    return 100.0 * static_cast<double>(occupied) * c.length / (static_cast<double>(zone) * c.slot_spacing);
  }
  return 0.0;
}

void SlotSimulator::releases() {
  const auto& net = scenario_->network;
  const auto& policy = scenario_->policy;
  const double t_s = static_cast<double>(clock_) * scenario_->constants.tau;
  for (RampIndex i = 0; i < net.ramp_count(); ++i) {
    auto& queue = queues_[static_cast<std::size_t>(i)];
    LocalView view;
    view.queue_nonempty = !queue.empty();
    if (view.queue_nonempty) {
      view.target_safe = target_free(queue.front().route);
      view.head_route_has_merge = route_has_merge_[static_cast<std::size_t>(queue.front().route)] != 0;
    }
    Decision d;
    if (policy.kind == PolicyKind::safe_alinea) {
      d = alinea_decide(alinea_[static_cast<std::size_t>(i)], view);
    } else {
      d = drra_decide(i, clock_, t_s, drra_, policy.schedule, gap_.g, view,
                      policy.kind == PolicyKind::drra_nonreactive);
    }
    ++result_.holds[static_cast<std::size_t>(i)][static_cast<std::size_t>(d.reason)];
    if (!d.release) continue;

    const auto head = queue.front();
    queue.pop_front();
    --queued_on_route_[static_cast<std::size_t>(head.route)];
    const auto target = net.route(head.route).edges[1];
    cells_[static_cast<std::size_t>(target)].front() = head.vehicle;
    live_[static_cast<std::size_t>(head.vehicle)].edge_pos = 1;
    auto& log = result_.vehicles[static_cast<std::size_t>(head.vehicle)];
    log.release_step = clock_;
    log.release_s = t_s;
    ++on_mainline_;
    ++result_.released;
    if (policy.kind == PolicyKind::safe_alinea) {
      alinea_[static_cast<std::size_t>(i)].credit -= 1.0;
    } else {
      drra_record_release(drra_, i, t_s);
    }
  }
}

std::vector<std::int64_t> SlotSimulator::node_degrees() const {
  std::vector<std::int64_t> d(static_cast<std::size_t>(scenario_->network.ramp_count()), 0);
  auto count = [&](RouteIndex route, int pos, std::int64_t n) {
    for (auto ramp : remaining_ramps_[static_cast<std::size_t>(route)][static_cast<std::size_t>(pos)]) {
      d[static_cast<std::size_t>(ramp)] += n;
    }
  };
  for (std::size_t r = 0; r < queued_on_route_.size(); ++r) {
    if (queued_on_route_[r] > 0) count(static_cast<RouteIndex>(r), 0, queued_on_route_[r]);
  }
  for (const auto& cells : cells_) {
    for (auto id : cells) {
      if (id == -1) continue;
      const auto& v = live_[static_cast<std::size_t>(id)];
      count(v.route, v.edge_pos, 1);
    }
  }
  return d;
}

void SlotSimulator::record() {
  std::int64_t total = 0;
  for (const auto& q : queues_) {
    total += static_cast<std::int64_t>(q.size());
    if (options_.record_queues) result_.queue_lengths.push_back(static_cast<std::int32_t>(q.size()));
  }
  result_.total_queue.push_back(total);
  const auto& probes = scenario_->experiment.probes;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    if (cells_[static_cast<std::size_t>(probes[p].segment)][static_cast<std::size_t>(probes[p].cell)] != -1) {
      ++result_.probe_counts[p];
    }
  }
  if (options_.degree_every > 0 && clock_ % options_.degree_every == 0) {
    result_.degree_steps.push_back(clock_);
    result_.degrees.push_back(node_degrees());
  }
}

void SlotSimulator::step() {
  const auto& policy = scenario_->policy;
  const bool drra = policy.kind != PolicyKind::safe_alinea;
  ++clock_;
  const double t_s = static_cast<double>(clock_) * scenario_->constants.tau;

  auto begin_cycle = [&] {
    std::vector<std::int64_t> sizes;
    sizes.reserve(queues_.size());
    for (const auto& q : queues_) sizes.push_back(static_cast<std::int64_t>(q.size()));
    drra_begin_cycle(drra_, clock_, sizes);
  };
  const bool boundary = drra && is_cycle_boundary(drra_, clock_);
  if (boundary && !policy.quota_includes_boundary_arrivals) begin_cycle();

  advance();
  arrivals();
  if (boundary && policy.quota_includes_boundary_arrivals) begin_cycle();

  if (!drra) {
    for (std::size_t i = 0; i < alinea_.size(); ++i) {
      occupancy_accum_[i] += detector_occupancy(static_cast<RampIndex>(i));
      alinea_accrue(alinea_[i], policy.alinea, scenario_->constants.tau);
    }
    ++occupancy_samples_;
  }
  releases();

  if (drra && clock_ % policy.gap_period_steps == 0) {
    // Slot-aligned free flow: every deviation state is zero, so X_f = 0.
    gap_ = gap_update(gap_, policy.gap, 0.0);
  }
  if (!drra && t_s + 1e-9 >= next_alinea_s_) {
    for (std::size_t i = 0; i < alinea_.size(); ++i) {
      const double occ = occupancy_samples_ > 0 ? occupancy_accum_[i] / static_cast<double>(occupancy_samples_) : 0.0;
      alinea_[i] = alinea_update(alinea_[i], policy.alinea, occ);
      occupancy_accum_[i] = 0.0;
    }
    occupancy_samples_ = 0;
    next_alinea_s_ += policy.alinea.period_s;
  }
  record();
}

void SlotSimulator::run(std::int64_t steps) {
  for (std::int64_t k = 0; k < steps; ++k) step();
}

RunResult SlotSimulator::take_result() {
  result_.horizon = clock_;
  if (!options_.record_vehicles) result_.vehicles.clear();
  return std::move(result_);
}

RunResult run_slot(const Scenario& scenario, std::int64_t horizon, std::uint64_t seed, RunOptions options) {
  SlotSimulator sim(scenario, seed, options);
  sim.run(horizon);
  return sim.take_result();
}

}  // namespace rampmeter
