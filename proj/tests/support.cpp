#include "support.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace testing {

using nlohmann::json;
using namespace rampmeter;

namespace {

json constants_json() {
  return {{"h", 1.5}, {"S0", 4}, {"L", 4.5}, {"Vf", 15}, {"a_min", -4}, {"a_max", 2},
          {"gains", {{"K_v", 0.8}, {"K_g", 0.25}, {"K_l", 0.9}, {"margin", 2}, {"hysteresis", 1}}}};
}

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

}  // namespace

json random_scenario_json(std::mt19937_64& rng, const NetGen& gen) {
  json nodes = json::array(), edges = json::array();
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> out;  // node -> (edge, head)
  std::map<std::string, std::string> kind;
  int seg_count = 0, merge_count = 0, div_count = 0;
  auto node = [&](const std::string& id, const char* k) {
    nodes.push_back({{"id", id}, {"kind", k}});
    kind[id] = k;
  };
  auto segment = [&](const std::string& tail, const std::string& head) {
    const auto id = "s" + std::to_string(++seg_count);
    edges.push_back({{"id", id}, {"tail", tail}, {"head", head}, {"kind", "segment"},
                     {"slot_count", uniform(rng, 1, gen.max_slots)}});
    out[tail].push_back({id, head});
  };
  auto take = [&](std::vector<std::string>& stubs) {
    const auto k = static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(stubs.size()) - 1));
    auto s = stubs[k];
    stubs.erase(stubs.begin() + static_cast<std::ptrdiff_t>(k));
    return s;
  };
  auto merge = [&](std::vector<std::string>& stubs) {
    const auto m = "m" + std::to_string(++merge_count);
    node(m, "merge_node");
    segment(take(stubs), m);
    segment(take(stubs), m);
    stubs.push_back(m);
  };

  const int ramps = uniform(rng, gen.min_ramps, gen.max_ramps);
  std::vector<std::string> stubs;
  for (int i = 1; i <= ramps; ++i) {
    const auto src = "src" + std::to_string(i), r = "r" + std::to_string(i);
    node(src, "source");
    node(r, "on_ramp_node");
    edges.push_back({{"id", "on" + std::to_string(i)}, {"tail", src}, {"head", r}, {"kind", "on_ramp"}});
    if (!stubs.empty() && coin(rng, 0.6)) segment(take(stubs), r);
    stubs.push_back(r);
    if (stubs.size() >= 2 && coin(rng, 0.3)) merge(stubs);
    if (gen.diverges && coin(rng, 0.25)) {
      const auto d = "v" + std::to_string(++div_count);
      node(d, "diverge_node");
      segment(take(stubs), d);
      stubs.push_back(d);
      stubs.push_back(d);
    }
  }
  while (stubs.size() >= 2 && coin(rng, 0.5)) merge(stubs);
  int exits = 0;
  for (const auto& s : stubs) {
    const auto d = "d" + std::to_string(++exits), sink = "sink" + std::to_string(exits);
    node(d, "off_ramp_node");
    node(sink, "sink");
    segment(s, d);
    edges.push_back({{"id", "off" + std::to_string(exits)}, {"tail", d}, {"head", sink}, {"kind", "off_ramp"}});
    out[d].push_back({"off" + std::to_string(exits), sink});
  }

  json routes = json::array(), routing = json::object(), schedule = json::object();
  for (int i = 1; i <= ramps; ++i) {
    const auto on = "on" + std::to_string(i);
    std::vector<std::vector<std::string>> paths;
    std::vector<std::string> path{on};
    auto walk = [&](auto&& self, const std::string& at) -> void {
      if (paths.size() >= 8) return;
      for (const auto& [edge, head] : out[at]) {
        path.push_back(edge);
        if (kind[head] == "sink") {
          paths.push_back(path);
        } else {
          self(self, head);
        }
        path.pop_back();
      }
    };
    walk(walk, "r" + std::to_string(i));
    std::vector<int> weights;
    for (std::size_t p = 0; p < paths.size(); ++p) weights.push_back(uniform(rng, 1, 4));
    const int total = std::accumulate(weights.begin(), weights.end(), 0);
    json row = json::object();
    for (std::size_t p = 0; p < paths.size(); ++p) {
      const auto id = on + "-" + std::to_string(p + 1);
      routes.push_back({{"id", id}, {"edges", paths[p]}});
      row[id] = static_cast<double>(weights[p]) / total;
    }
    routing[on] = row;
    const int b = uniform(rng, 1, gen.max_period);
    const int a = uniform(rng, 1, b);
    std::vector<int> offsets(static_cast<std::size_t>(b));
    std::iota(offsets.begin(), offsets.end(), 1);
    std::shuffle(offsets.begin(), offsets.end(), rng);
    offsets.resize(static_cast<std::size_t>(a));
    std::sort(offsets.begin(), offsets.end());
    schedule[on] = {{"b", b}, {"offsets", offsets}};
  }

  return {{"name", "random"},
          {"constants", constants_json()},
          {"network", {{"nodes", nodes}, {"edges", edges}, {"routes", routes}}},
          {"demand", {{"lambda", 0.3}, {"routing", routing}}},
          {"policy", {{"type", "drra"}, {"T", 1}, {"T_per_steps", 2}, {"schedule", schedule}}},
          {"experiment", {{"backend", "slot"}, {"horizon", 1000}, {"seeds", 1}}}};
}

json random_valid_scenario_json(std::mt19937_64& rng, const NetGen& gen) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto j = random_scenario_json(rng, gen);
    const auto s = load_json(j, false);
    std::vector<int> periods, rates;
    for (RampIndex i = 0; i < s.network.ramp_count(); ++i) {
      periods.push_back(uniform(rng, 1, gen.max_period));
      rates.push_back(uniform(rng, 1, periods.back()));
    }
    const auto found = find_offsets(s.network, periods, rates);
    if (!found) continue;
    for (RampIndex i = 0; i < s.network.ramp_count(); ++i) {
      const auto& r = found->ramps[static_cast<std::size_t>(i)];
      j["policy"]["schedule"][s.network.ramp(i).id] = {{"b", r.period}, {"offsets", r.offsets}};
    }
    return j;
  }
  throw std::runtime_error("no conflict-free random scenario found");
}

Scenario load_json(const json& j, bool check_conflicts) {
  auto r = load_scenario_text(j.dump(), check_conflicts);
  if (!r.scenario) {
    throw std::runtime_error("generated scenario invalid: " + r.report.issues.front().where + ": " +
                             r.report.issues.front().message + "\n" + j.dump());
  }
  return std::move(*r.scenario);
}

json line_json(int cells, double lambda, int cycle_steps) {
  return {{"name", "line"},
          {"constants", constants_json()},
          {"network",
           {{"nodes",
             {{{"id", "src"}, {"kind", "source"}},
              {{"id", "r"}, {"kind", "on_ramp_node"}},
              {{"id", "d"}, {"kind", "off_ramp_node"}},
              {{"id", "sink"}, {"kind", "sink"}}}},
            {"edges",
             {{{"id", "on"}, {"tail", "src"}, {"head", "r"}, {"kind", "on_ramp"}},
              {{"id", "seg"}, {"tail", "r"}, {"head", "d"}, {"kind", "segment"}, {"slot_count", cells}},
              {{"id", "off"}, {"tail", "d"}, {"head", "sink"}, {"kind", "off_ramp"}}}},
            {"routes", {{{"id", "through"}, {"edges", {"on", "seg", "off"}}}}}}},
          {"demand", {{"lambda", lambda}, {"routing", {{"on", {{"through", 1.0}}}}}}},
          {"policy", {{"type", "drra"}, {"T", cycle_steps}, {"T_per_steps", 2}, {"schedule", {{"on", {{"b", 1}, {"offsets", {1}}}}}}}},
          {"experiment", {{"backend", "slot"}, {"horizon", 1000}, {"seeds", 1}}}};
}

bool ghost_conflict(const Network& net, const ReleaseSchedule& schedule, ConflictMode mode) {
  struct Ghost {
    int ramp;
    std::int64_t released;
    RouteIndex route;
    std::size_t pos;  // index into route edges
    int cell;
  };
  std::int64_t hyper = 1;
  for (const auto& r : schedule.ramps) hyper = std::lcm(hyper, static_cast<std::int64_t>(r.period));
  std::int64_t longest = 0;
  for (const auto& route : net.routes()) {
    std::int64_t len = 0;
    for (std::size_t k = 1; k + 1 < route.edges.size(); ++k) len += net.edge(route.edges[k]).slot_count;
    longest = std::max(longest, len);
  }
  const std::int64_t steps = 2 * hyper + longest + 1;

  std::vector<Ghost> ghosts;
  for (std::int64_t s = 1; s <= steps; ++s) {
    // (node) -> entries of (ramp, release step, incoming edge, is own release)
    std::map<NodeIndex, std::vector<std::tuple<int, std::int64_t, EdgeIndex, bool>>> entering;
    std::vector<Ghost> next;
    for (auto g : ghosts) {
      const auto& route = net.route(g.route);
      const auto edge = route.edges[g.pos];
      if (g.cell + 1 < net.edge(edge).slot_count) {
        ++g.cell;
        next.push_back(g);
        continue;
      }
      const auto following = route.edges[g.pos + 1];
      if (net.edge(following).kind == EdgeKind::off_ramp) continue;
      entering[net.edge_head(edge)].emplace_back(g.ramp, g.released, edge, false);
      ++g.pos;
      g.cell = 0;
      next.push_back(g);
    }
    for (RampIndex i = 0; i < net.ramp_count(); ++i) {
      const auto& rs = schedule.ramps[static_cast<std::size_t>(i)];
      const auto phase = ((s - 1) % rs.period) + 1;
      if (std::find(rs.offsets.begin(), rs.offsets.end(), phase) == rs.offsets.end()) continue;
      for (auto p : net.routes_from(i)) {
        entering[net.ramp(i).node].emplace_back(i, s, net.ramp(i).edge, true);
        next.push_back({i, s, p, 1, 0});
      }
    }
    for (const auto& [node, list] : entering) {
      for (std::size_t a = 0; a < list.size(); ++a) {
        for (std::size_t b = a + 1; b < list.size(); ++b) {
          const auto& [ra, ta, ea, own_a] = list[a];
          const auto& [rb, tb, eb, own_b] = list[b];
          if (ra == rb && ta == tb) continue;  // one vehicle, two route choices
          if (ea == eb) continue;
          if (mode == ConflictMode::standard && (own_a || own_b)) continue;
          return true;
        }
      }
    }
    ghosts = std::move(next);
  }
  return false;
}

}  // namespace testing
