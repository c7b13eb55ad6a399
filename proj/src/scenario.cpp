#include "rampmeter/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "rampmeter/errors.hpp"

namespace rampmeter {

using nlohmann::json;

namespace {

// Schema problems carry the JSON pointer of the offending value.
[[noreturn]] void schema_error(const std::string& pointer, const std::string& message) {
  throw ValidationError(pointer + ": " + message);
}

const json& member(const json& obj, const std::string& pointer, const char* key) {
  if (!obj.is_object()) schema_error(pointer, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(pointer + "/" + key, "missing required field");
  return *it;
}

const json* optional_member(const json& obj, const std::string& pointer, const char* key) {
  if (!obj.is_object()) schema_error(pointer, "expected an object");
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& v, const std::string& pointer) {
  if (!v.is_number()) schema_error(pointer, "expected a number");
  return v.get<double>();
}

std::int64_t integer(const json& v, const std::string& pointer) {
  if (!v.is_number_integer()) schema_error(pointer, "expected an integer");
  return v.get<std::int64_t>();
}

std::string string(const json& v, const std::string& pointer) {
  if (!v.is_string()) schema_error(pointer, "expected a string");
  return v.get<std::string>();
}

bool boolean(const json& v, const std::string& pointer) {
  if (!v.is_boolean()) schema_error(pointer, "expected a boolean");
  return v.get<bool>();
}

double number_or(const json& obj, const std::string& pointer, const char* key, double fallback) {
  const auto* v = optional_member(obj, pointer, key);
  return v ? number(*v, pointer + "/" + key) : fallback;
}

std::int64_t integer_or(const json& obj, const std::string& pointer, const char* key, std::int64_t fallback) {
  const auto* v = optional_member(obj, pointer, key);
  return v ? integer(*v, pointer + "/" + key) : fallback;
}

bool boolean_or(const json& obj, const std::string& pointer, const char* key, bool fallback) {
  const auto* v = optional_member(obj, pointer, key);
  return v ? boolean(*v, pointer + "/" + key) : fallback;
}

SimConstants parse_constants(const json& j) {
  const std::string p = "/constants";
  const auto& c = member(j, "", "constants");
  SimConstants out;
  try {
    out = derive_constants(number(member(c, p, "h"), p + "/h"), number(member(c, p, "S0"), p + "/S0"),
                           number(member(c, p, "L"), p + "/L"), number(member(c, p, "Vf"), p + "/Vf"),
                           number_or(c, p, "a_min", kDefaultAMin), number_or(c, p, "a_max", kDefaultAMax));
  } catch (const ValidationError& e) {
    if (std::string(e.what()).rfind(p, 0) == 0) throw;
    schema_error(p, e.what());
  }
  if (const auto* g = optional_member(c, p, "gains")) {
    const std::string gp = p + "/gains";
    out.gains.k_speed = number_or(*g, gp, "K_v", out.gains.k_speed);
    out.gains.k_gap = number_or(*g, gp, "K_g", out.gains.k_gap);
    out.gains.k_rel_speed = number_or(*g, gp, "K_l", out.gains.k_rel_speed);
    out.gains.margin = number_or(*g, gp, "margin", out.gains.margin);
    out.gains.hysteresis = number_or(*g, gp, "hysteresis", out.gains.hysteresis);
  }
  return out;
}

Network parse_network(const json& j) {
  const std::string p = "/network";
  const auto& n = member(j, "", "network");
  std::vector<NodeSpec> nodes;
  const auto& jn = member(n, p, "nodes");
  if (!jn.is_array()) schema_error(p + "/nodes", "expected an array");
  for (std::size_t i = 0; i < jn.size(); ++i) {
    const std::string ip = p + "/nodes/" + std::to_string(i);
    NodeSpec spec;
    spec.id = string(member(jn[i], ip, "id"), ip + "/id");
    const auto kind = string(member(jn[i], ip, "kind"), ip + "/kind");
    auto k = parse_node_kind(kind);
    if (!k) schema_error(ip + "/kind", "unknown node kind '" + kind + "'");
    spec.kind = *k;
    nodes.push_back(spec);
  }
  std::vector<EdgeSpec> edges;
  const auto& je = member(n, p, "edges");
  if (!je.is_array()) schema_error(p + "/edges", "expected an array");
  for (std::size_t i = 0; i < je.size(); ++i) {
    const std::string ip = p + "/edges/" + std::to_string(i);
    EdgeSpec spec;
    spec.id = string(member(je[i], ip, "id"), ip + "/id");
    spec.tail = string(member(je[i], ip, "tail"), ip + "/tail");
    spec.head = string(member(je[i], ip, "head"), ip + "/head");
    const auto kind = string(member(je[i], ip, "kind"), ip + "/kind");
    auto k = parse_edge_kind(kind);
    if (!k) schema_error(ip + "/kind", "unknown edge kind '" + kind + "'");
    spec.kind = *k;
    if (spec.kind == EdgeKind::segment) {
      spec.slot_count = static_cast<int>(integer(member(je[i], ip, "slot_count"), ip + "/slot_count"));
    }
    if (const auto* len = optional_member(je[i], ip, "length_m")) spec.length_m = number(*len, ip + "/length_m");
    edges.push_back(spec);
  }
  std::vector<RouteSpec> routes;
  const auto& jr = member(n, p, "routes");
  if (!jr.is_array()) schema_error(p + "/routes", "expected an array");
  for (std::size_t i = 0; i < jr.size(); ++i) {
    const std::string ip = p + "/routes/" + std::to_string(i);
    RouteSpec spec;
    spec.id = string(member(jr[i], ip, "id"), ip + "/id");
    const auto& list = member(jr[i], ip, "edges");
    if (!list.is_array()) schema_error(ip + "/edges", "expected an array");
    for (std::size_t k = 0; k < list.size(); ++k) spec.edges.push_back(string(list[k], ip + "/edges/" + std::to_string(k)));
    routes.push_back(spec);
  }
  return Network(std::move(nodes), std::move(edges), std::move(routes));
}

DemandSpec parse_demand(const json& j, const Network& net) {
  const std::string p = "/demand";
  const auto& d = member(j, "", "demand");
  DemandSpec out;
  const auto n_ramps = static_cast<std::size_t>(net.ramp_count());
  const auto& lam = member(d, p, "lambda");
  if (lam.is_number()) {
    out.lambda.assign(n_ramps, number(lam, p + "/lambda"));
  } else if (lam.is_array()) {
    for (std::size_t i = 0; i < lam.size(); ++i) out.lambda.push_back(number(lam[i], p + "/lambda/" + std::to_string(i)));
  } else if (lam.is_object()) {
    out.lambda.assign(n_ramps, 0.0);
    for (const auto& [key, value] : lam.items()) {
      auto r = net.find_ramp(key);
      if (!r) schema_error(p + "/lambda/" + key, "unknown ramp");
      out.lambda[static_cast<std::size_t>(*r)] = number(value, p + "/lambda/" + key);
    }
  } else {
    schema_error(p + "/lambda", "expected a number, array or object");
  }
  const auto& routing = member(d, p, "routing");
  if (!routing.is_object()) schema_error(p + "/routing", "expected an object keyed by ramp id");
  out.routing.assign(n_ramps, std::vector<double>(static_cast<std::size_t>(net.route_count()), 0.0));
  for (const auto& [ramp_id, row] : routing.items()) {
    const std::string rp = p + "/routing/" + ramp_id;
    auto r = net.find_ramp(ramp_id);
    if (!r) schema_error(rp, "unknown ramp");
    if (!row.is_object()) schema_error(rp, "expected an object keyed by route id");
    for (const auto& [route_id, prob] : row.items()) {
      auto q = net.find_route(route_id);
      if (!q) schema_error(rp + "/" + route_id, "unknown route");
      out.routing[static_cast<std::size_t>(*r)][static_cast<std::size_t>(*q)] = number(prob, rp + "/" + route_id);
    }
  }
  return out;
}

PolicyConfig parse_policy(const json& j, const Network& net, const SimConstants& constants) {
  const std::string p = "/policy";
  const auto& pj = member(j, "", "policy");
  PolicyConfig out;
  const auto type = string(member(pj, p, "type"), p + "/type");
  if (type == "drra") {
    out.kind = PolicyKind::drra;
  } else if (type == "drra_nonreactive") {
    out.kind = PolicyKind::drra_nonreactive;
  } else if (type == "safe_alinea") {
    out.kind = PolicyKind::safe_alinea;
  } else {
    schema_error(p + "/type", "unknown policy '" + type + "'");
  }
  out.cycle_steps = static_cast<int>(integer_or(pj, p, "T", 1));
  if (out.cycle_steps < 1) schema_error(p + "/T", "must be a positive integer");
  out.gap_period_steps = static_cast<int>(integer_or(pj, p, "T_per_steps", 2));
  if (out.gap_period_steps < 1) schema_error(p + "/T_per_steps", "must be a positive integer");
  out.gap.period_s = out.gap_period_steps * constants.tau;
  out.gap.gamma1 = number_or(pj, p, "gamma_1", out.gap.gamma1);
  out.gap.gamma2 = number_or(pj, p, "gamma_2", out.gap.gamma2);
  out.gap.theta0 = number_or(pj, p, "theta_0", out.gap.theta0);
  out.gap.beta = number_or(pj, p, "beta", out.gap.beta);
  if (!(out.gap.gamma1 > 0)) schema_error(p + "/gamma_1", "must be positive");
  if (!(out.gap.gamma2 > 0)) schema_error(p + "/gamma_2", "must be positive");
  if (!(out.gap.theta0 > 0)) schema_error(p + "/theta_0", "must be positive");
  if (!(out.gap.beta > 1)) schema_error(p + "/beta", "must exceed 1");
  out.per_ramp_gap = boolean_or(pj, p, "per_ramp_gap", false);
  out.quota_includes_boundary_arrivals = boolean_or(pj, p, "quota_includes_boundary_arrivals", false);

  out.schedule.ramps.assign(static_cast<std::size_t>(net.ramp_count()), RampSchedule{1, {1}});
  if (const auto* sched = optional_member(pj, p, "schedule")) {
    const std::string sp = p + "/schedule";
    if (!sched->is_object()) schema_error(sp, "expected an object keyed by ramp id");
    for (const auto& [ramp_id, entry] : sched->items()) {
      const std::string rp = sp + "/" + ramp_id;
      auto r = net.find_ramp(ramp_id);
      if (!r) schema_error(rp, "unknown ramp");
      RampSchedule rs;
      rs.period = static_cast<int>(integer(member(entry, rp, "b"), rp + "/b"));
      rs.offsets.clear();
      const auto& offs = member(entry, rp, "offsets");
      if (!offs.is_array()) schema_error(rp + "/offsets", "expected an array");
      for (std::size_t k = 0; k < offs.size(); ++k) {
        rs.offsets.push_back(static_cast<int>(integer(offs[k], rp + "/offsets/" + std::to_string(k))));
      }
      out.schedule.ramps[static_cast<std::size_t>(*r)] = rs;
    }
  }
  if (const auto* a = optional_member(pj, p, "alinea")) {
    const std::string ap = p + "/alinea";
    out.alinea.k_r = number_or(*a, ap, "K_r", out.alinea.k_r);
    out.alinea.o_hat = number_or(*a, ap, "o_hat", out.alinea.o_hat);
    out.alinea.period_s = number_or(*a, ap, "period_s", out.alinea.period_s);
    out.alinea.r_min = number_or(*a, ap, "r_min", out.alinea.r_min);
    out.alinea.r_max = number_or(*a, ap, "r_max", out.alinea.r_max);
    out.alinea.r_init = number_or(*a, ap, "r_init", out.alinea.r_max);
    out.alinea.credit_cap = number_or(*a, ap, "credit_cap", out.alinea.credit_cap);
    out.alinea.detector_length_m = number_or(*a, ap, "detector_length_m", out.alinea.detector_length_m);
    if (!(out.alinea.r_min <= out.alinea.r_max)) schema_error(ap, "r_min must not exceed r_max");
    if (!(out.alinea.period_s > 0)) schema_error(ap + "/period_s", "must be positive");
  }
  return out;
}

ExperimentConfig parse_experiment(const json& j, const Network& net) {
  const std::string p = "/experiment";
  ExperimentConfig out;
  const auto* ej = optional_member(j, "", "experiment");
  if (!ej) return out;
  const auto& e = *ej;
  if (const auto* b = optional_member(e, p, "backend")) {
    const auto s = string(*b, p + "/backend");
    if (s == "slot") {
      out.backend = Backend::slot;
    } else if (s == "kinematic") {
      out.backend = Backend::kinematic;
    } else {
      schema_error(p + "/backend", "expected 'slot' or 'kinematic'");
    }
  }
  out.horizon = integer_or(e, p, "horizon", out.horizon);
  if (out.horizon < 1) schema_error(p + "/horizon", "must be positive");
  out.seeds = static_cast<int>(integer_or(e, p, "seeds", out.seeds));
  if (out.seeds < 1) schema_error(p + "/seeds", "must be positive");
  out.base_seed = static_cast<std::uint64_t>(integer_or(e, p, "base_seed", 1));
  out.strict_conflicts = boolean_or(e, p, "strict_conflicts", false);
  out.substeps = static_cast<int>(integer_or(e, p, "substeps", out.substeps));
  if (out.substeps < 1) schema_error(p + "/substeps", "must be positive");
  out.merge_zone_m = number_or(e, p, "merge_zone_m", out.merge_zone_m);
  out.lookahead_m = number_or(e, p, "lookahead_m", out.lookahead_m);
  if (const auto* norm = optional_member(e, p, "xf_norm")) {
    const auto s = string(*norm, p + "/xf_norm");
    if (s == "euclidean") {
      out.xf_norm = XfNorm::euclidean;
    } else if (s == "max") {
      out.xf_norm = XfNorm::max;
    } else {
      schema_error(p + "/xf_norm", "expected 'euclidean' or 'max'");
    }
  }
  if (const auto* init = optional_member(e, p, "initial")) {
    const std::string ip = p + "/initial";
    const auto type = string(member(*init, ip, "type"), ip + "/type");
    if (type == "empty") {
      out.initial.kind = InitialKind::empty;
    } else if (type == "slot_preload") {
      out.initial.kind = InitialKind::slot_preload;
      out.initial.occupancy = number(member(*init, ip, "occupancy"), ip + "/occupancy");
      if (!(out.initial.occupancy >= 0 && out.initial.occupancy <= 1)) schema_error(ip + "/occupancy", "must lie in [0, 1]");
    } else if (type == "uniform_mainline") {
      out.initial.kind = InitialKind::uniform_mainline;
      out.initial.count = static_cast<int>(integer(member(*init, ip, "count"), ip + "/count"));
      out.initial.speed = number(member(*init, ip, "speed"), ip + "/speed");
      if (out.initial.count < 0) schema_error(ip + "/count", "must be non-negative");
      if (!(out.initial.speed >= 0)) schema_error(ip + "/speed", "must be non-negative");
    } else {
      schema_error(ip + "/type", "unknown initial condition '" + type + "'");
    }
  }
  if (const auto* probes = optional_member(e, p, "probes")) {
    if (!probes->is_array()) schema_error(p + "/probes", "expected an array");
    for (std::size_t i = 0; i < probes->size(); ++i) {
      const std::string pp = p + "/probes/" + std::to_string(i);
      const auto edge = string(member((*probes)[i], pp, "edge"), pp + "/edge");
      auto eidx = net.find_edge(edge);
      if (!eidx || net.edge(*eidx).kind != EdgeKind::segment) schema_error(pp + "/edge", "unknown segment '" + edge + "'");
      Probe probe{*eidx, static_cast<int>(integer_or((*probes)[i], pp, "cell", 0))};
      if (probe.cell < 0 || probe.cell >= net.edge(*eidx).slot_count) schema_error(pp + "/cell", "cell out of range");
      out.probes.push_back(probe);
    }
  }
  return out;
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ValidationReport check_policy(const Scenario& s, bool check_conflicts) {
  ValidationReport report;
  if (s.policy.kind != PolicyKind::safe_alinea) {
    if (!check_conflicts) return report;
    const auto mode = s.experiment.strict_conflicts ? ConflictMode::strict : ConflictMode::standard;
    try {
      if (auto w = verify_conflict_free(s.network, s.policy.schedule, mode)) {
        report.add("/policy/schedule", "release schedule is not conflict-free at node '" + s.network.node(w->node).id +
                                           "' (ramps " + s.network.ramp(w->first.ramp).id + " and " +
                                           s.network.ramp(w->second.ramp).id + ")");
      }
    } catch (const ConfigError& e) {
      report.add("/policy/schedule", e.what());
    }
  } else if (s.experiment.backend == Backend::slot) {
    for (const auto& node : s.network.nodes()) {
      if (node.kind == NodeKind::merge_node) {
        report.add("/policy/type", "safe_alinea on the slot backend needs a network without merge nodes");
        break;
      }
    }
  }
  return report;
}

LoadResult load_scenario_text(const std::string& text, bool check_conflicts) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  LoadResult result;
  try {
    Scenario s;
    if (const auto* name = optional_member(j, "", "name")) s.name = string(*name, "/name");
    s.constants = parse_constants(j);
    s.network = parse_network(j);
    result.report.append(validate(s.network, s.constants));
    if (!result.report.ok()) return result;
    s.demand = parse_demand(j, s.network);
    result.report.append(validate_demand(s.network, s.demand));
    s.policy = parse_policy(j, s.network, s.constants);
    s.experiment = parse_experiment(j, s.network);
    result.report.append(validate_schedule(s.network, s.policy.schedule));
    if (!result.report.ok()) return result;

    result.report.append(check_policy(s, check_conflicts));
    if (!result.report.ok()) return result;

    const double top = s.demand.lambda.empty() ? 0.0 : *std::max_element(s.demand.lambda.begin(), s.demand.lambda.end());
    s.lambda_direction.assign(s.demand.lambda.size(), 1.0);
    if (top > 0.0) {
      for (std::size_t i = 0; i < s.demand.lambda.size(); ++i) s.lambda_direction[i] = s.demand.lambda[i] / top;
    }
    s.config_hash = fnv1a_hex(j.dump());
    result.scenario = std::move(s);
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    const auto colon = what.find(": ");
    if (colon != std::string::npos && !what.empty() && what[0] == '/') {
      result.report.add(what.substr(0, colon), what.substr(colon + 2));
    } else {
      result.report.add("", what);
    }
  }
  return result;
}

LoadResult load_scenario_file(const std::filesystem::path& path, bool check_conflicts) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scenario_text(buf.str(), check_conflicts);
}

Scenario load_scenario_or_throw(const std::filesystem::path& path) {
  auto result = load_scenario_file(path);
  if (!result.scenario) {
    const auto& first = result.report.issues.front();
    throw ValidationError(path.string() + ": " + first.where + ": " + first.message);
  }
  return std::move(*result.scenario);
}

Scenario with_policy(const Scenario& scenario, PolicyKind kind) {
  Scenario out = scenario;
  out.policy.kind = kind;
  const auto report = check_policy(out);
  if (!report.ok()) throw ValidationError(report.issues.front().where + ": " + report.issues.front().message);
  return out;
}

Scenario with_uniform_lambda(const Scenario& scenario, double lambda) {
  Scenario out = scenario;
  for (std::size_t i = 0; i < out.demand.lambda.size(); ++i) {
    out.demand.lambda[i] = std::clamp(lambda * scenario.lambda_direction[i], 0.0, 1.0);
  }
  return out;
}

}  // namespace rampmeter
