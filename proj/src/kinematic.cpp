#include "rampmeter/kinematic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rampmeter/errors.hpp"
#include "rampmeter/slot_sim.hpp"

namespace rampmeter {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNoVehicle = std::numeric_limits<std::size_t>::max();
// Overlap tolerated before a collision is declared (floating-point noise).
constexpr double kCollisionTolerance = 1e-9;

double tracking_accel(double v, const SimConstants& c) {
  return std::clamp(c.gains.k_speed * (c.vf - v), c.a_min, c.a_max);
}

// Constant-acceleration update over dt that stops at v = 0 instead of reversing.
void advance(double& s, double& v, double a, double dt) {
  const double v_end = v + a * dt;
  if (v_end < 0.0) {
    s += a < 0.0 ? -v * v / (2.0 * a) : 0.0;
    v = 0.0;
    return;
  }
  s += v * dt + 0.5 * a * dt * dt;
  v = v_end;
}

}  // namespace

double safety_distance(double v_ego, double v_leader, const SimConstants& c) {
  return c.h * v_ego + c.s0 + (v_ego * v_ego - v_leader * v_leader) / (2.0 * std::fabs(c.a_min));
}

ControlOutput controller_accel(double v_ego, bool was_safety, const LeaderView& leader, const SimConstants& c) {
  const double track = tracking_accel(v_ego, c);
  if (!leader.present) return {track, false};
  const auto& g = c.gains;
  const double se = safety_distance(v_ego, leader.speed, c);
  const double threshold = se + g.margin + (was_safety ? g.hysteresis : 0.0);
  if (leader.gap >= threshold) return {track, false};
  const double safe = g.k_gap * (leader.gap - se) + g.k_rel_speed * (leader.speed - v_ego);
  return {std::clamp(std::min(track, safe), c.a_min, c.a_max), true};
}

MergePrediction predict_merge(const MergeParty& ego, const MergeParty& leader, const SimConstants& c, double dt,
                              double horizon_s) {
  MergePrediction out;
  double s_e = 0.0, v_e = ego.speed;
  double s_l = 0.0, v_l = leader.speed;
  double t = 0.0;
  auto accel = [&](const MergeParty& p, double v) { return p.safety_mode ? 0.0 : tracking_accel(v, c); };
  while (s_e < ego.distance_to_node) {
    if (t >= horizon_s) return out;
    const double s_prev = s_e, v_prev = v_e;
    const double a_e = accel(ego, v_e);
    advance(s_e, v_e, a_e, dt);
    advance(s_l, v_l, accel(leader, v_l), dt);
    if (s_e == s_prev) return out;  // stopped short of the node
    if (s_e >= ego.distance_to_node) {
      // Land exactly on the node: rewind the fraction of the step past it.
      const double frac = (ego.distance_to_node - s_prev) / (s_e - s_prev);
      const double over = (1.0 - frac) * dt;
      s_l -= v_l * over;
      v_e = v_prev + a_e * frac * dt;
      t += frac * dt;
      break;
    }
    t += dt;
  }
  out.applicable = true;
  out.t_m = t;
  out.y_hat = (s_l - leader.distance_to_node) - c.length;
  out.s_hat = safety_distance(v_e, v_l, c);
  out.violation = std::max(out.s_hat - out.y_hat, 0.0);
  return out;
}

CongestionMeasure compute_xf(std::span<const Deviation> deviations, std::span<const double> window_violations,
                             XfNorm norm) {
  CongestionMeasure m;
  if (norm == XfNorm::euclidean) {
    double sum = 0.0;
    for (const auto& d : deviations) {
      sum += d.gap_shortfall * d.gap_shortfall + d.speed_error * d.speed_error + d.accel * d.accel;
    }
    m.xf1 = std::sqrt(sum);
  } else {
    for (const auto& d : deviations) {
      m.xf1 = std::max({m.xf1, std::fabs(d.gap_shortfall), std::fabs(d.speed_error), std::fabs(d.accel)});
    }
  }
  for (double v : window_violations) m.xf2 += v;
  m.xf = m.xf1 + m.xf2;
  return m;
}

KinematicSimulator::KinematicSimulator(const Scenario& scenario, std::uint64_t seed, RunOptions options)
    : scenario_(&scenario), options_(options), drra_(scenario.network.ramp_count(), scenario.policy.cycle_steps) {
  const auto& net = scenario.network;
  const auto& c = scenario.constants;
  const auto n_edges = net.edges().size();
  const auto n_ramps = static_cast<std::size_t>(net.ramp_count());
  dt_ = c.tau / scenario.experiment.substeps;
  for (const auto& e : net.edges()) {
    lengths_.push_back(e.kind == EdgeKind::segment ? e.slot_count * c.slot_spacing : 0.0);
  }
  on_edge_.resize(n_edges);
  queues_.resize(n_ramps);
  for (std::size_t i = 0; i < n_ramps; ++i) {
    arrival_rng_.push_back(RngStream::derive(seed, i, StreamPurpose::arrival));
    route_rng_.push_back(RngStream::derive(seed, i, StreamPurpose::route));
  }
  for (RouteIndex r = 0; r < net.route_count(); ++r) route_has_merge_.push_back(route_contains_merge(net, r) ? 1 : 0);
  remaining_ramps_ = remaining_ramp_crossings(net);
  vicinity_.assign(n_ramps, std::vector<char>(n_edges, 0));
  for (std::size_t i = 0; i < n_ramps; ++i) {
    const auto node = net.ramp(static_cast<RampIndex>(i)).node;
    for (auto e : net.in_edges(node)) vicinity_[i][static_cast<std::size_t>(e)] = 1;
    for (auto e : net.out_edges(node)) vicinity_[i][static_cast<std::size_t>(e)] = 1;
  }
  alinea_.assign(n_ramps, AlineaState{scenario.policy.alinea.r_init, 0.0});
  occupancy_accum_.assign(n_ramps, 0.0);
  next_alinea_s_ = scenario.policy.alinea.period_s;

  result_.ramps = static_cast<int>(n_ramps);
  result_.tau = c.tau;
  result_.seed = seed;
  result_.probe_counts.assign(scenario.experiment.probes.size(), 0);
  result_.holds.assign(n_ramps, {});

  switch (scenario.experiment.initial.kind) {
    case InitialKind::empty:
      break;
    case InitialKind::uniform_mainline:
      init_uniform_mainline(seed);
      break;
    case InitialKind::slot_preload: {
      RngStream init = RngStream::derive(seed, 0, StreamPurpose::init);
      for (EdgeIndex e = 0; e < static_cast<EdgeIndex>(n_edges); ++e) {
        if (net.edge(e).kind != EdgeKind::segment) continue;
        std::vector<std::pair<RouteIndex, int>> through;
        for (RouteIndex r = 0; r < net.route_count(); ++r) {
          const auto& edges = net.route(r).edges;
          for (std::size_t k = 0; k < edges.size(); ++k) {
            if (edges[k] == e) through.emplace_back(r, static_cast<int>(k));
          }
        }
        if (through.empty()) continue;
        for (int cell = 0; cell < net.edge(e).slot_count; ++cell) {
          if (init.uniform() >= scenario.experiment.initial.occupancy) continue;
          const auto pick = through[static_cast<std::size_t>(init.next_u64() % through.size())];
          place_vehicle(pick.first, pick.second, cell * c.slot_spacing, c.vf);
        }
      }
      break;
    }
  }
  result_.initial_vehicles = static_cast<std::int64_t>(vehicles_.size());
  rebuild_index();

  const double xf0 = congestion().xf;
  const std::size_t n_gaps = scenario.policy.per_ramp_gap ? n_ramps : 1;
  for (std::size_t i = 0; i < n_gaps; ++i) {
    double x0 = xf0;
    if (scenario.policy.per_ramp_gap) {
      x0 = compute_xf(deviations(&vicinity_[i]), violations(&vicinity_[i]), scenario.experiment.xf_norm).xf;
    }
    gaps_.push_back(initial_gap_state(scenario.policy.gap, x0));
  }
}

void KinematicSimulator::init_uniform_mainline(std::uint64_t seed) {
  const auto& net = scenario_->network;
  const auto& init = scenario_->experiment.initial;
  if (init.count <= 0) return;
  std::vector<EdgeIndex> segments;
  double total = 0.0;
  for (EdgeIndex e = 0; e < static_cast<EdgeIndex>(lengths_.size()); ++e) {
    if (net.edge(e).kind != EdgeKind::segment) continue;
    segments.push_back(e);
    total += lengths_[static_cast<std::size_t>(e)];
  }
  const double spacing = total / init.count;
  if (spacing < scenario_->constants.length) throw ConfigError("initial vehicles do not fit on the mainline");
  RngStream rng = RngStream::derive(seed, 0, StreamPurpose::init);
  std::size_t seg = 0;
  double seg_start = 0.0;
  for (int k = 0; k < init.count; ++k) {
    // Fronts at (k + 1) * spacing so the last vehicle sits exactly at the end of the chain.
    double s = (k + 1) * spacing;
    while (seg + 1 < segments.size() && s > seg_start + lengths_[static_cast<std::size_t>(segments[seg])]) {
      seg_start += lengths_[static_cast<std::size_t>(segments[seg])];
      ++seg;
    }
    const auto e = segments[seg];
    double x = std::min(s - seg_start, lengths_[static_cast<std::size_t>(e)]);
    if (x >= lengths_[static_cast<std::size_t>(e)]) x = std::nextafter(lengths_[static_cast<std::size_t>(e)], 0.0);
    std::vector<std::pair<RouteIndex, int>> through;
    for (RouteIndex r = 0; r < net.route_count(); ++r) {
      const auto& edges = net.route(r).edges;
      for (std::size_t i = 0; i < edges.size(); ++i) {
        if (edges[i] == e) through.emplace_back(r, static_cast<int>(i));
      }
    }
    if (through.empty()) continue;
    const auto pick = through[static_cast<std::size_t>(rng.next_u64() % through.size())];
    place_vehicle(pick.first, pick.second, x, init.speed);
  }
}

EdgeIndex KinematicSimulator::edge_of(const Vehicle& v) const {
  return scenario_->network.route(v.route).edges[static_cast<std::size_t>(v.edge_pos)];
}

void KinematicSimulator::rebuild_index() {
  for (auto& list : on_edge_) list.clear();
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    on_edge_[static_cast<std::size_t>(edge_of(vehicles_[i]))].push_back({i, vehicles_[i].x});
  }
  for (auto& list : on_edge_) {
    std::sort(list.begin(), list.end(), [&](const Slot& a, const Slot& b) {
      if (a.x != b.x) return a.x < b.x;
      return vehicles_[a.vehicle].id < vehicles_[b.vehicle].id;
    });
  }
}

std::int64_t KinematicSimulator::new_vehicle(RampIndex ramp, RouteIndex route) {
  VehicleLog log;
  log.id = static_cast<std::int64_t>(result_.vehicles.size());
  log.ramp = ramp;
  log.route = route;
  log.arrival_step = clock_;
  log.arrival_s = time_s_;
  result_.vehicles.push_back(log);
  return log.id;
}

std::int64_t KinematicSimulator::place_vehicle(RouteIndex route, int edge_pos, double x, double v) {
  const auto& r = scenario_->network.route(route);
  if (edge_pos < 1 || edge_pos + 1 >= static_cast<int>(r.edges.size())) throw ContractViolation("edge_pos is not a segment");
  const auto e = r.edges[static_cast<std::size_t>(edge_pos)];
  if (x < 0.0 || x >= lengths_[static_cast<std::size_t>(e)]) throw ContractViolation("position outside the segment");
  const auto id = new_vehicle(kNone, route);
  Vehicle veh;
  veh.id = id;
  veh.route = route;
  veh.edge_pos = edge_pos;
  veh.x = x;
  veh.v = v;
  vehicles_.push_back(veh);
  rebuild_index();
  return id;
}

std::int64_t KinematicSimulator::enqueue(RampIndex ramp, RouteIndex route) {
  const auto id = new_vehicle(ramp, route);
  queues_.at(static_cast<std::size_t>(ramp)).push_back({id, route});
  ++result_.arrived;
  return id;
}

const GapState& KinematicSimulator::gap_state(RampIndex ramp) const {
  return scenario_->policy.per_ramp_gap ? gaps_.at(static_cast<std::size_t>(ramp)) : gaps_.front();
}

const KinematicSimulator::Vehicle* KinematicSimulator::first_ahead(RouteIndex route, int pos, double x, double limit,
                                                                   std::size_t exclude, double& front_distance) const {
  const auto& net = scenario_->network;
  const auto& edges = net.route(route).edges;
  double base = -x;  // distance from the ego front to the tail of the edge being scanned
  for (auto k = static_cast<std::size_t>(pos); k + 1 < edges.size(); ++k) {
    const auto& list = on_edge_[static_cast<std::size_t>(edges[k])];
    const double from = k == static_cast<std::size_t>(pos) ? x : 0.0;
    auto it = std::lower_bound(list.begin(), list.end(), from, [](const Slot& s, double v) { return s.x < v; });
    for (; it != list.end(); ++it) {
      if (it->vehicle == exclude) continue;
      front_distance = base + it->x;
      return &vehicles_[it->vehicle];
    }
    base += lengths_[static_cast<std::size_t>(edges[k])];
    if (base > limit) break;
  }
  return nullptr;
}

const KinematicSimulator::Vehicle* KinematicSimulator::nearest_upstream(NodeIndex node, double limit,
                                                                        double& distance) const {
  const auto& net = scenario_->network;
  const Vehicle* best = nullptr;
  distance = kInf;
  std::vector<std::pair<NodeIndex, double>> frontier{{node, 0.0}};
  std::vector<char> seen(net.nodes().size(), 0);
  seen[static_cast<std::size_t>(node)] = 1;
  while (!frontier.empty()) {
    const auto [n, base] = frontier.back();
    frontier.pop_back();
    for (auto e : net.in_edges(n)) {
      if (net.edge(e).kind != EdgeKind::segment) continue;
      const auto& list = on_edge_[static_cast<std::size_t>(e)];
      const double len = lengths_[static_cast<std::size_t>(e)];
      if (!list.empty()) {
        const double d = base + len - list.back().x;
        if (d < distance) {
          distance = d;
          best = &vehicles_[list.back().vehicle];
        }
        continue;
      }
      const auto tail = net.edge_tail(e);
      if (base + len < limit && !seen[static_cast<std::size_t>(tail)]) {
        seen[static_cast<std::size_t>(tail)] = 1;
        frontier.emplace_back(tail, base + len);
      }
    }
  }
  return best;
}

bool KinematicSimulator::leaves_route(const Vehicle& other, RouteIndex route, std::size_t k, double within) const {
  const auto& net = scenario_->network;
  const auto& mine = net.route(route).edges;
  const auto& theirs = net.route(other.route).edges;
  double dist = lengths_[static_cast<std::size_t>(mine[k])];
  for (std::size_t m = 1;; ++m) {
    const auto a = k + m;
    const auto b = static_cast<std::size_t>(other.edge_pos) + m;
    if (a >= mine.size() || b >= theirs.size()) return false;
    if (mine[a] != theirs[b]) return dist <= within;
    if (net.edge(mine[a]).kind != EdgeKind::segment) return false;  // same off-ramp
    dist += lengths_[static_cast<std::size_t>(mine[a])];
    if (dist > within) return false;
  }
}

LeaderView KinematicSimulator::leader_of(std::size_t index) const {
  const auto& net = scenario_->network;
  const auto& c = scenario_->constants;
  const auto& ego = vehicles_[index];
  const auto& edges = net.route(ego.route).edges;
  const double lookahead = scenario_->experiment.lookahead_m;
  LeaderView best;
  double best_margin = kInf;
  // The most constraining candidate wins: smallest gap - S_e.
  auto offer = [&](const Vehicle& other, double gap, bool is_virtual) {
    const double margin = gap - safety_distance(ego.v, other.v, c);
    if (best.present && (margin > best_margin || (margin == best_margin && gap >= best.gap))) return;
    best_margin = margin;
    best.present = true;
    best.gap = gap;
    best.speed = other.v;
    best.accel = other.a;
    best.safety_mode = other.safety_mode;
    best.id = other.id;
    best.virtual_leader = is_virtual;
  };
  // Vehicles ahead on the ego's route. One that turns off the route within
  // the lookahead still leads for now, but it hides whoever is queued behind
  // its exit, so the scan continues past it.
  double base = -ego.x;
  bool done = false;
  for (auto k = static_cast<std::size_t>(ego.edge_pos); !done && k + 1 < edges.size(); ++k) {
    const auto& list = on_edge_[static_cast<std::size_t>(edges[k])];
    auto it = list.begin();
    if (k == static_cast<std::size_t>(ego.edge_pos)) {
      it = std::lower_bound(list.begin(), list.end(), ego.x, [](const Slot& s, double v) { return s.x < v; });
    }
    for (; it != list.end(); ++it) {
      if (it->vehicle == index) continue;
      const auto& other = vehicles_[it->vehicle];
      const double front = base + it->x;
      offer(other, front - c.length, false);
      if (!leaves_route(other, ego.route, k, lookahead - base)) {
        done = true;
        break;
      }
    }
    base += lengths_[static_cast<std::size_t>(edges[k])];
    if (base > lookahead) break;
  }
  // Vehicles on other branches that reach a merge node ahead before the ego.
  double dist = lengths_[static_cast<std::size_t>(edges[static_cast<std::size_t>(ego.edge_pos)])] - ego.x;
  for (auto k = static_cast<std::size_t>(ego.edge_pos); k + 1 < edges.size(); ++k) {
    if (dist > scenario_->experiment.merge_zone_m) break;
    const auto node = net.edge_head(edges[k]);
    if (net.node(node).kind == NodeKind::merge_node) {
      const Vehicle* candidate = nullptr;
      double cand_d = -kInf;
      for (auto e : net.in_edges(node)) {
        if (e == edges[k] || net.edge(e).kind != EdgeKind::segment) continue;
        const double len = lengths_[static_cast<std::size_t>(e)];
        for (const auto& slot : on_edge_[static_cast<std::size_t>(e)]) {
          const auto& other = vehicles_[slot.vehicle];
          const double d = len - slot.x;
          const bool ahead = d < dist || (d == dist && other.id < ego.id);
          if (!ahead) continue;
          if (d > cand_d || (d == cand_d && candidate && other.id < candidate->id)) {
            cand_d = d;
            candidate = &other;
          }
        }
      }
      if (candidate) offer(*candidate, dist - cand_d - scenario_->constants.length, true);
    }
    if (net.edge(edges[k + 1]).kind != EdgeKind::segment) break;
    dist += lengths_[static_cast<std::size_t>(edges[k + 1])];
  }
  return best;
}

bool KinematicSimulator::release_safe(RouteIndex route) const {
  const auto& net = scenario_->network;
  const auto& c = scenario_->constants;
  const double lookahead = scenario_->experiment.lookahead_m;
  double front = 0.0;
  if (const auto* leader = first_ahead(route, 1, 0.0, lookahead, kNoVehicle, front)) {
    if (front - c.length < safety_distance(c.vf, leader->v, c) - kGapTolerance) return false;
  }
  const auto node = net.edge_tail(net.route(route).edges[1]);
  double behind = 0.0;
  if (const auto* follower = nearest_upstream(node, lookahead, behind)) {
    if (behind - c.length < safety_distance(follower->v, c.vf, c) - kGapTolerance) return false;
  }
  return true;
}

void KinematicSimulator::check_collisions() {
  const double lookahead = scenario_->experiment.lookahead_m;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    double front = 0.0;
    const auto* leader = first_ahead(v.route, v.edge_pos, v.x, lookahead, i, front);
    if (!leader) continue;
    const double gap = front - scenario_->constants.length;
    result_.min_gap_m = std::min(result_.min_gap_m, gap);
    if (gap < -kCollisionTolerance) {
      throw CollisionError("vehicles " + std::to_string(leader->id) + " and " + std::to_string(v.id) +
                               " overlap at t = " + std::to_string(time_s_) + " s",
                           leader->id, v.id);
    }
  }
}

void KinematicSimulator::integrate(double dt) {
  const auto& net = scenario_->network;
  const auto& c = scenario_->constants;
  const auto& probes = scenario_->experiment.probes;

  std::vector<ControlOutput> control(vehicles_.size());
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    auto& v = vehicles_[i];
    const auto leader = leader_of(i);
    control[i] = controller_accel(v.v, v.safety_mode, leader, c);
    // Free-flow lock: at Vf behind a free-flowing leader at a safe gap, hold exactly (Vf, 0).
    const bool leader_free = !leader.present || (leader.speed >= c.vf - kSpeedTolerance &&
                                                 leader.gap >= safety_distance(c.vf, leader.speed, c) - kGapTolerance);
    // The safety law may ask for a sliver of braking when gap and speed sit inside tolerance.
    const double lock_floor = -(c.gains.k_gap * kGapTolerance + c.gains.k_rel_speed * kSpeedTolerance);
    if (std::fabs(v.v - c.vf) <= kSpeedTolerance && leader_free && control[i].accel >= lock_floor) {
      v.v = c.vf;
      control[i].accel = 0.0;
    }
  }

  const double t0 = time_s_;
  std::vector<std::size_t> exited;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    auto& v = vehicles_[i];
    v.a = control[i].accel;
    v.safety_mode = control[i].safety_mode;
    const EdgeIndex start_edge = edge_of(v);
    const double x_old = v.x;
    advance(v.x, v.v, v.a, dt);
    const double len = lengths_[static_cast<std::size_t>(start_edge)];
    for (std::size_t p = 0; p < probes.size(); ++p) {
      if (probes[p].segment != start_edge) continue;
      const double at = probes[p].cell * c.slot_spacing;
      if (at > 0.0 && x_old < at && v.x >= at) ++result_.probe_counts[p];
    }
    if (v.x < len) continue;
    const auto& edges = net.route(v.route).edges;
    const auto next = edges[static_cast<std::size_t>(v.edge_pos + 1)];
    if (net.edge(next).kind == EdgeKind::off_ramp) {
      auto& log = result_.vehicles[static_cast<std::size_t>(v.id)];
      const double frac = v.x > x_old ? (len - x_old) / (v.x - x_old) : 1.0;
      log.exit_s = t0 + frac * dt;
      log.exit_step = clock_ + 1;  // substeps belong to the step in progress
      ++result_.exited;
      exited.push_back(i);
      continue;
    }
    v.x -= len;
    ++v.edge_pos;
    for (std::size_t p = 0; p < probes.size(); ++p) {
      if (probes[p].segment == next && probes[p].cell == 0) ++result_.probe_counts[p];
    }
  }
  for (auto it = exited.rbegin(); it != exited.rend(); ++it) {
    vehicles_.erase(vehicles_.begin() + static_cast<std::ptrdiff_t>(*it));
  }
  time_s_ = t0 + dt;
  rebuild_index();
  check_collisions();
  if (scenario_->policy.kind == PolicyKind::safe_alinea) {
    for (std::size_t i = 0; i < occupancy_accum_.size(); ++i) {
      occupancy_accum_[i] += detector_occupancy(static_cast<RampIndex>(i));
    }
    ++occupancy_samples_;
  }
}

void KinematicSimulator::substep() { integrate(dt_); }

double KinematicSimulator::detector_occupancy(RampIndex ramp) const {
  const auto& net = scenario_->network;
  const auto& c = scenario_->constants;
  for (auto e : net.out_edges(net.ramp(ramp).node)) {
    if (net.edge(e).kind != EdgeKind::segment) continue;
    const double zone = std::min(scenario_->policy.alinea.detector_length_m, lengths_[static_cast<std::size_t>(e)]);
    double covered = 0.0;
    for (const auto& slot : on_edge_[static_cast<std::size_t>(e)]) {
      const double lo = std::max(slot.x - c.length, 0.0);
      const double hi = std::min(slot.x, zone);
      if (hi > lo) covered += hi - lo;
    }
    return 100.0 * std::min(covered / zone, 1.0);
  }
  return 0.0;
}

void KinematicSimulator::arrivals() {
  const auto& demand = scenario_->demand;
  for (std::size_t i = 0; i < queues_.size(); ++i) {
    if (sample_arrival(arrival_rng_[i], demand.lambda[i]) == 0) continue;
    enqueue(static_cast<RampIndex>(i), sample_route(route_rng_[i], demand.routing[i]));
  }
}

void KinematicSimulator::releases() {
  const auto& net = scenario_->network;
  const auto& policy = scenario_->policy;
  const auto& c = scenario_->constants;
  const auto& probes = scenario_->experiment.probes;
  for (RampIndex i = 0; i < net.ramp_count(); ++i) {
    auto& queue = queues_[static_cast<std::size_t>(i)];
    LocalView view;
    view.queue_nonempty = !queue.empty();
    if (view.queue_nonempty) {
      view.target_safe = release_safe(queue.front().route);
      view.head_route_has_merge = route_has_merge_[static_cast<std::size_t>(queue.front().route)] != 0;
    }
    Decision d;
    if (policy.kind == PolicyKind::safe_alinea) {
      d = alinea_decide(alinea_[static_cast<std::size_t>(i)], view);
    } else {
      d = drra_decide(i, clock_, time_s_, drra_, policy.schedule, gap_state(i).g, view,
                      policy.kind == PolicyKind::drra_nonreactive);
    }
    ++result_.holds[static_cast<std::size_t>(i)][static_cast<std::size_t>(d.reason)];
    if (!d.release) continue;

    const auto head = queue.front();
    queue.pop_front();
    Vehicle v;
    v.id = head.vehicle;
    v.route = head.route;
    v.edge_pos = 1;
    v.x = 0.0;
    v.v = c.vf;
    vehicles_.push_back(v);
    rebuild_index();
    const auto target = net.route(head.route).edges[1];
    for (std::size_t p = 0; p < probes.size(); ++p) {
      if (probes[p].segment == target && probes[p].cell == 0) ++result_.probe_counts[p];
    }
    auto& log = result_.vehicles[static_cast<std::size_t>(head.vehicle)];
    log.release_step = clock_;
    log.release_s = time_s_;
    ++result_.released;
    if (policy.kind == PolicyKind::safe_alinea) {
      alinea_[static_cast<std::size_t>(i)].credit -= 1.0;
    } else {
      drra_record_release(drra_, i, time_s_);
    }
  }
}

void KinematicSimulator::record_predictions() {
  const auto& net = scenario_->network;
  const auto& c = scenario_->constants;
  const double zone = scenario_->experiment.merge_zone_m;
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    const auto& edges = net.route(v.route).edges;
    // Distance to the first merge node ahead, if it lies inside the zone.
    double dist = lengths_[static_cast<std::size_t>(edges[static_cast<std::size_t>(v.edge_pos)])] - v.x;
    bool found = false;
    for (auto k = static_cast<std::size_t>(v.edge_pos); k + 1 < edges.size() && dist <= zone; ++k) {
      if (net.node(net.edge_head(edges[k])).kind == NodeKind::merge_node) {
        found = true;
        break;
      }
      if (net.edge(edges[k + 1]).kind != EdgeKind::segment) break;
      dist += lengths_[static_cast<std::size_t>(edges[k + 1])];
    }
    if (!found || dist > zone) continue;
    const auto leader = leader_of(i);
    if (!leader.present) continue;
    const MergeParty ego{dist, v.v, v.safety_mode};
    const MergeParty lead{dist - (leader.gap + c.length), leader.speed, leader.safety_mode};
    const auto pred = predict_merge(ego, lead, c, dt_);
    if (!pred.applicable || pred.violation <= kGapTolerance) continue;
    auto& entry = window_violations_[v.id];
    if (pred.violation > entry.violation) entry = {pred.violation, edge_of(v)};
  }
}

std::vector<Deviation> KinematicSimulator::deviations(const std::vector<char>* edge_mask) const {
  const auto& c = scenario_->constants;
  std::vector<Deviation> out;
  out.reserve(vehicles_.size());
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    const auto& v = vehicles_[i];
    if (edge_mask && !(*edge_mask)[static_cast<std::size_t>(edge_of(v))]) continue;
    Deviation d;
    const auto leader = leader_of(i);
    if (leader.present) {
      const double se = safety_distance(v.v, leader.speed, c);
      if (leader.gap < se - kGapTolerance) d.gap_shortfall = leader.gap - se;
    }
    d.speed_error = v.v - c.vf;
    d.accel = v.a;
    out.push_back(d);
  }
  return out;
}

std::vector<double> KinematicSimulator::violations(const std::vector<char>* edge_mask) const {
  std::vector<double> out;
  for (const auto& [id, entry] : window_violations_) {
    if (edge_mask && !(*edge_mask)[static_cast<std::size_t>(entry.edge)]) continue;
    out.push_back(entry.violation);
  }
  return out;
}

CongestionMeasure KinematicSimulator::congestion() const {
  return compute_xf(deviations(nullptr), violations(nullptr), scenario_->experiment.xf_norm);
}

void KinematicSimulator::update_gaps() {
  const auto& policy = scenario_->policy;
  const auto norm = scenario_->experiment.xf_norm;
  CongestionMeasure shown;
  if (policy.per_ramp_gap) {
    for (std::size_t i = 0; i < gaps_.size(); ++i) {
      const auto m = compute_xf(deviations(&vicinity_[i]), violations(&vicinity_[i]), norm);
      gaps_[i] = gap_update(gaps_[i], policy.gap, m.xf);
    }
    shown = congestion();
  } else {
    shown = congestion();
    gaps_.front() = gap_update(gaps_.front(), policy.gap, shown.xf);
  }
  window_violations_.clear();
  result_.xf_times.push_back(time_s_);
  result_.xf1.push_back(shown.xf1);
  result_.xf2.push_back(shown.xf2);
  result_.gap_g.push_back(gaps_.front().g);
  result_.gap_theta.push_back(gaps_.front().theta);
}

std::vector<std::int64_t> KinematicSimulator::node_degrees() const {
  std::vector<std::int64_t> d(static_cast<std::size_t>(scenario_->network.ramp_count()), 0);
  auto count = [&](RouteIndex route, int pos) {
    for (auto ramp : remaining_ramps_[static_cast<std::size_t>(route)][static_cast<std::size_t>(pos)]) {
      ++d[static_cast<std::size_t>(ramp)];
    }
  };
  for (const auto& q : queues_) {
    for (const auto& item : q) count(item.route, 0);
  }
  for (const auto& v : vehicles_) count(v.route, v.edge_pos);
  return d;
}

void KinematicSimulator::record() {
  std::int64_t total = 0;
  for (const auto& q : queues_) {
    total += static_cast<std::int64_t>(q.size());
    if (options_.record_queues) result_.queue_lengths.push_back(static_cast<std::int32_t>(q.size()));
  }
  result_.total_queue.push_back(total);
  if (options_.degree_every > 0 && clock_ % options_.degree_every == 0) {
    result_.degree_steps.push_back(clock_);
    result_.degrees.push_back(node_degrees());
  }
  if (options_.trajectory_every > 0 && clock_ % options_.trajectory_every == 0) {
    for (const auto& v : vehicles_) {
      result_.trajectory.push_back({time_s_, v.id, edge_of(v), v.x, v.v, v.a, v.safety_mode});
    }
  }
}

void KinematicSimulator::step() {
  const auto& policy = scenario_->policy;
  const bool drra = policy.kind != PolicyKind::safe_alinea;
  for (int k = 0; k < scenario_->experiment.substeps; ++k) integrate(dt_);
  ++clock_;
  time_s_ = static_cast<double>(clock_) * scenario_->constants.tau;

  auto begin_cycle = [&] {
    std::vector<std::int64_t> sizes;
    sizes.reserve(queues_.size());
    for (const auto& q : queues_) sizes.push_back(static_cast<std::int64_t>(q.size()));
    drra_begin_cycle(drra_, clock_, sizes);
  };
  const bool boundary = drra && is_cycle_boundary(drra_, clock_);
  if (boundary && !policy.quota_includes_boundary_arrivals) begin_cycle();
  arrivals();
  if (boundary && policy.quota_includes_boundary_arrivals) begin_cycle();

  if (drra) {
    record_predictions();
  } else {
    for (auto& a : alinea_) alinea_accrue(a, policy.alinea, scenario_->constants.tau);
  }
  releases();

  if (drra && clock_ % policy.gap_period_steps == 0) update_gaps();
  if (!drra && time_s_ + 1e-9 >= next_alinea_s_) {
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

void KinematicSimulator::run(std::int64_t steps) {
  for (std::int64_t k = 0; k < steps; ++k) step();
}

RunResult KinematicSimulator::take_result() {
  result_.horizon = clock_;
  if (!options_.record_vehicles) result_.vehicles.clear();
  return std::move(result_);
}

RunResult run_kinematic(const Scenario& scenario, std::int64_t horizon, std::uint64_t seed, RunOptions options) {
  KinematicSimulator sim(scenario, seed, options);
  sim.run(horizon);
  return sim.take_result();
}

RunResult run_scenario(const Scenario& scenario, std::int64_t horizon, std::uint64_t seed, RunOptions options) {
  if (scenario.experiment.backend == Backend::kinematic) return run_kinematic(scenario, horizon, seed, options);
  return run_slot(scenario, horizon, seed, options);
}

}  // namespace rampmeter
