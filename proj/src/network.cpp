#include "rampmeter/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <unordered_map>

#include "rampmeter/errors.hpp"

namespace rampmeter {

namespace {

constexpr std::pair<NodeKind, std::string_view> kNodeKindNames[] = {
    {NodeKind::source, "source"},           {NodeKind::sink, "sink"},
    {NodeKind::on_ramp_node, "on_ramp_node"}, {NodeKind::merge_node, "merge_node"},
    {NodeKind::diverge_node, "diverge_node"}, {NodeKind::off_ramp_node, "off_ramp_node"},
};

constexpr std::pair<EdgeKind, std::string_view> kEdgeKindNames[] = {
    {EdgeKind::segment, "segment"},
    {EdgeKind::on_ramp, "on_ramp"},
    {EdgeKind::off_ramp, "off_ramp"},
};

template <class T>
std::optional<int> lookup(const std::vector<T>& items, std::string_view id) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id == id) return static_cast<int>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  for (const auto& [k, name] : kNodeKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::string_view to_string(EdgeKind kind) {
  for (const auto& [k, name] : kEdgeKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view text) {
  for (const auto& [k, name] : kNodeKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::optional<EdgeKind> parse_edge_kind(std::string_view text) {
  for (const auto& [k, name] : kEdgeKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

Network::Network(std::vector<NodeSpec> nodes, std::vector<EdgeSpec> edges, std::vector<RouteSpec> routes)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), route_specs_(std::move(routes)) {
  const auto n_nodes = nodes_.size();
  out_.assign(n_nodes, {});
  in_.assign(n_nodes, {});
  ramp_at_node_.assign(n_nodes, kNone);

  std::unordered_map<std::string, int> node_index;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (!node_index.emplace(nodes_[i].id, static_cast<int>(i)).second) {
      resolution_issues_.push_back({"node " + nodes_[i].id, "duplicate node id"});
    }
  }
  std::set<std::string> edge_ids;
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto& spec = edges_[e];
    if (!edge_ids.insert(spec.id).second) {
      resolution_issues_.push_back({"edge " + spec.id, "duplicate edge id"});
    }
    auto tail = node_index.find(spec.tail);
    auto head = node_index.find(spec.head);
    if (tail == node_index.end()) {
      resolution_issues_.push_back({"edge " + spec.id, "tail node '" + spec.tail + "' does not exist"});
    }
    if (head == node_index.end()) {
      resolution_issues_.push_back({"edge " + spec.id, "head node '" + spec.head + "' does not exist"});
    }
    const NodeIndex t = tail == node_index.end() ? kNone : tail->second;
    const NodeIndex h = head == node_index.end() ? kNone : head->second;
    tails_.push_back(t);
    heads_.push_back(h);
    if (t != kNone) out_[static_cast<std::size_t>(t)].push_back(static_cast<int>(e));
    if (h != kNone) in_[static_cast<std::size_t>(h)].push_back(static_cast<int>(e));
  }

  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (edges_[e].kind != EdgeKind::on_ramp) continue;
    Ramp r;
    r.id = edges_[e].id;
    r.edge = static_cast<int>(e);
    r.source = tails_[e];
    r.node = heads_[e];
    if (r.node != kNone) {
      auto& slot = ramp_at_node_[static_cast<std::size_t>(r.node)];
      if (slot == kNone) slot = static_cast<int>(ramps_.size());
    }
    ramps_.push_back(r);
  }
  routes_from_.assign(ramps_.size(), {});

  std::set<std::string> route_ids;
  for (const auto& spec : route_specs_) {
    Route route;
    route.id = spec.id;
    if (!route_ids.insert(spec.id).second) {
      resolution_issues_.push_back({"route " + spec.id, "duplicate route id"});
    }
    bool resolved = true;
    for (const auto& eid : spec.edges) {
      auto e = lookup(edges_, eid);
      if (!e) {
        resolution_issues_.push_back({"route " + spec.id, "edge '" + eid + "' does not exist"});
        resolved = false;
        continue;
      }
      route.edges.push_back(*e);
    }
    if (resolved && !route.edges.empty()) {
      const auto first = route.edges.front();
      if (edges_[static_cast<std::size_t>(first)].kind == EdgeKind::on_ramp) {
        for (std::size_t i = 0; i < ramps_.size(); ++i) {
          if (ramps_[i].edge == first) route.ramp = static_cast<int>(i);
        }
      }
      // Visits: the entry node, then the head of every intermediate edge.
      int steps = 0;
      for (std::size_t k = 0; k + 1 < route.edges.size(); ++k) {
        const auto e = route.edges[k];
        if (k > 0) steps += std::max(0, edges_[static_cast<std::size_t>(e)].slot_count);
        route.visits.push_back({heads_[static_cast<std::size_t>(e)], e, steps, static_cast<int>(k)});
      }
    }
    if (route.ramp != kNone) routes_from_[static_cast<std::size_t>(route.ramp)].push_back(static_cast<int>(routes_.size()));
    routes_.push_back(std::move(route));
  }

  // Cycle detection over the whole graph (iterative DFS, three colours).
  std::vector<int> colour(n_nodes, 0);
  for (std::size_t start = 0; start < n_nodes && acyclic_; ++start) {
    if (colour[start] != 0) continue;
    std::vector<std::pair<int, std::size_t>> stack{{static_cast<int>(start), 0}};
    colour[start] = 1;
    while (!stack.empty() && acyclic_) {
      auto& [n, next] = stack.back();
      const auto& outs = out_[static_cast<std::size_t>(n)];
      if (next == outs.size()) {
        colour[static_cast<std::size_t>(n)] = 2;
        stack.pop_back();
        continue;
      }
      const auto h = heads_[static_cast<std::size_t>(outs[next++])];
      if (h == kNone) continue;
      if (colour[static_cast<std::size_t>(h)] == 1) {
        acyclic_ = false;
      } else if (colour[static_cast<std::size_t>(h)] == 0) {
        colour[static_cast<std::size_t>(h)] = 1;
        stack.emplace_back(h, 0);
      }
    }
  }

  // M_i^- and M_i^+: walk the mainline until another ramp's node is hit.
  auto walk = [&](RampIndex i, bool upstream) {
    std::set<RampIndex> found;
    std::vector<char> seen(n_nodes, 0);
    std::deque<NodeIndex> frontier;
    const auto start = ramps_[static_cast<std::size_t>(i)].node;
    if (start == kNone) return std::vector<RampIndex>{};
    auto expand = [&](NodeIndex n) {
      const auto& edges = upstream ? in_[static_cast<std::size_t>(n)] : out_[static_cast<std::size_t>(n)];
      for (auto e : edges) {
        if (edges_[static_cast<std::size_t>(e)].kind != EdgeKind::segment) continue;
        const auto next = upstream ? tails_[static_cast<std::size_t>(e)] : heads_[static_cast<std::size_t>(e)];
        if (next == kNone || seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = 1;
        frontier.push_back(next);
      }
    };
    expand(start);
    while (!frontier.empty()) {
      const auto n = frontier.front();
      frontier.pop_front();
      const auto r = ramp_at_node_[static_cast<std::size_t>(n)];
      if (r != kNone) {
        found.insert(r);
        continue;
      }
      expand(n);
    }
    return std::vector<RampIndex>(found.begin(), found.end());
  };
  for (std::size_t i = 0; i < ramps_.size(); ++i) {
    pred_.push_back(walk(static_cast<int>(i), true));
    succ_.push_back(walk(static_cast<int>(i), false));
  }
}

std::optional<NodeIndex> Network::find_node(std::string_view id) const { return lookup(nodes_, id); }
std::optional<EdgeIndex> Network::find_edge(std::string_view id) const { return lookup(edges_, id); }
std::optional<RouteIndex> Network::find_route(std::string_view id) const { return lookup(routes_, id); }
std::optional<RampIndex> Network::find_ramp(std::string_view id) const { return lookup(ramps_, id); }

std::vector<std::vector<std::vector<RampIndex>>> remaining_ramp_crossings(const Network& net) {
  std::vector<std::vector<std::vector<RampIndex>>> out;
  for (const auto& route : net.routes()) {
    std::vector<std::vector<RampIndex>> per_pos(route.edges.size());
    for (std::size_t pos = 0; pos < route.edges.size(); ++pos) {
      for (std::size_t k = pos; k + 1 < route.edges.size(); ++k) {
        const auto ramp = net.ramp_at_node(net.edge_head(route.edges[k]));
        if (ramp != kNone) per_pos[pos].push_back(ramp);
      }
    }
    out.push_back(std::move(per_pos));
  }
  return out;
}

int slots_for_length(double length_m, const SimConstants& constants) {
  return static_cast<int>(std::lround(length_m / constants.slot_spacing));
}

ValidationReport validate(const Network& net, const SimConstants& constants) {
  ValidationReport report;
  for (const auto& issue : net.resolution_issues()) report.issues.push_back(issue);

  const auto& nodes = net.nodes();
  const auto& edges = net.edges();

  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& spec = edges[e];
    const std::string where = "edge " + spec.id;
    const auto tail = net.edge_tail(static_cast<int>(e));
    const auto head = net.edge_head(static_cast<int>(e));
    if (spec.kind == EdgeKind::segment) {
      if (spec.slot_count < 1) report.add(where, "segment slot_count must be >= 1");
      if (spec.length_m) {
        const double len = *spec.length_m;
        const int rounded = slots_for_length(len, constants);
        if (!(len > 0.0)) {
          report.add(where, "length_m must be positive");
        } else if (rounded != spec.slot_count) {
          report.add(where, "slot_count " + std::to_string(spec.slot_count) + " does not match length_m (rounds to " +
                                std::to_string(rounded) + ")");
        } else if (std::fabs(len - rounded * constants.slot_spacing) > 0.5 * constants.slot_spacing) {
          report.add(where, "length_m is more than half a slot away from slot_count * slot_spacing");
        }
      }
    }
    if (tail == kNone || head == kNone) continue;
    const auto tk = net.node(tail).kind;
    const auto hk = net.node(head).kind;
    switch (spec.kind) {
      case EdgeKind::on_ramp:
        if (tk != NodeKind::source) report.add(where, "on-ramp tail must be a source");
        if (hk != NodeKind::on_ramp_node) report.add(where, "on-ramp head must be an on_ramp_node");
        break;
      case EdgeKind::off_ramp:
        if (tk != NodeKind::off_ramp_node) report.add(where, "off-ramp tail must be an off_ramp_node");
        if (hk != NodeKind::sink) report.add(where, "off-ramp head must be a sink");
        break;
      case EdgeKind::segment:
        if (tk == NodeKind::source || tk == NodeKind::sink || hk == NodeKind::source || hk == NodeKind::sink) {
          report.add(where, "segments cannot touch sources or sinks");
        }
        break;
    }
  }

  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const auto& spec = nodes[n];
    const std::string where = "node " + spec.id;
    int in_seg = 0, in_on = 0, in_off = 0, out_seg = 0, out_on = 0, out_off = 0;
    for (auto e : net.in_edges(static_cast<int>(n))) {
      switch (net.edge(e).kind) {
        case EdgeKind::segment: ++in_seg; break;
        case EdgeKind::on_ramp: ++in_on; break;
        case EdgeKind::off_ramp: ++in_off; break;
      }
    }
    for (auto e : net.out_edges(static_cast<int>(n))) {
      switch (net.edge(e).kind) {
        case EdgeKind::segment: ++out_seg; break;
        case EdgeKind::on_ramp: ++out_on; break;
        case EdgeKind::off_ramp: ++out_off; break;
      }
    }
    const int in_all = in_seg + in_on + in_off;
    const int out_all = out_seg + out_on + out_off;
    switch (spec.kind) {
      case NodeKind::source:
        if (out_on != 1 || out_all != 1) report.add(where, "a source must have exactly one outgoing on-ramp");
        if (in_all != 0) report.add(where, "a source cannot have incoming edges");
        break;
      case NodeKind::sink:
        if (in_off != 1 || in_all != 1) report.add(where, "a sink must have exactly one incoming off-ramp");
        if (out_all != 0) report.add(where, "a sink cannot have outgoing edges");
        break;
      case NodeKind::on_ramp_node:
        if (in_on != 1) report.add(where, "an on-ramp node must have exactly one incoming on-ramp");
        if (in_seg > 1) report.add(where, "an on-ramp node can have at most one incoming mainline segment");
        if (out_seg < 1) report.add(where, "an on-ramp node needs an outgoing mainline segment");
        if (out_off != 0) report.add(where, "an on-ramp node cannot feed an off-ramp");
        break;
      case NodeKind::merge_node:
        if (in_seg < 2) report.add(where, "a merge node needs at least two incoming mainline segments");
        if (in_on != 0) report.add(where, "a merge node cannot have an incoming on-ramp");
        if (out_seg < 1) report.add(where, "a merge node needs an outgoing mainline segment");
        if (out_off != 0) report.add(where, "a merge node cannot feed an off-ramp");
        break;
      case NodeKind::diverge_node:
        if (out_seg < 2) report.add(where, "a diverge node needs at least two outgoing mainline segments");
        if (in_seg < 1) report.add(where, "a diverge node needs an incoming mainline segment");
        if (in_on != 0 || out_off != 0) report.add(where, "a diverge node cannot touch ramps");
        break;
      case NodeKind::off_ramp_node:
        if (out_off != 1) report.add(where, "an off-ramp node must have exactly one outgoing off-ramp");
        if (in_seg != 1) report.add(where, "an off-ramp node must have exactly one incoming mainline segment");
        if (in_on != 0) report.add(where, "an off-ramp node cannot have an incoming on-ramp");
        break;
    }
  }

  for (std::size_t r = 0; r < net.routes().size(); ++r) {
    const auto& route = net.routes()[r];
    const auto& spec = net.route_specs()[r];
    const std::string where = "route " + route.id;
    if (route.edges.size() != spec.edges.size()) continue;  // unresolved edges already reported
    if (route.edges.size() < 2) {
      report.add(where, "a route needs at least an on-ramp and an off-ramp");
      continue;
    }
    if (net.edge(route.edges.front()).kind != EdgeKind::on_ramp) report.add(where, "first edge must be an on-ramp");
    if (net.edge(route.edges.back()).kind != EdgeKind::off_ramp) report.add(where, "last edge must be an off-ramp");
    for (std::size_t k = 1; k + 1 < route.edges.size(); ++k) {
      if (net.edge(route.edges[k]).kind != EdgeKind::segment) {
        report.add(where, "intermediate edge '" + net.edge(route.edges[k]).id + "' is not a segment");
      }
    }
    for (std::size_t k = 0; k + 1 < route.edges.size(); ++k) {
      const auto h = net.edge_head(route.edges[k]);
      const auto t = net.edge_tail(route.edges[k + 1]);
      if (h == kNone || t == kNone || h != t) {
        report.add(where, "edges '" + net.edge(route.edges[k]).id + "' and '" + net.edge(route.edges[k + 1]).id +
                              "' are not adjacent");
      }
    }
  }
  return report;
}

namespace {

const Route& checked_route(const Network& net, RouteIndex r) {
  if (r < 0 || r >= net.route_count()) throw ValidationError("unknown route index " + std::to_string(r));
  return net.route(r);
}

}  // namespace

bool route_contains_merge(const Network& net, RouteIndex r) {
  const auto& route = checked_route(net, r);
  for (std::size_t k = 1; k < route.visits.size(); ++k) {
    if (net.is_joining(route.visits[k].node)) return true;
  }
  return false;
}

bool route_contains_merge(const Network& net, std::string_view route_id) {
  auto r = net.find_route(route_id);
  if (!r) throw ValidationError("unknown route '" + std::string(route_id) + "'");
  return route_contains_merge(net, *r);
}

int crossing_steps(const Network& net, std::string_view route_id, std::string_view node_id) {
  auto r = net.find_route(route_id);
  if (!r) throw ValidationError("unknown route '" + std::string(route_id) + "'");
  auto n = net.find_node(node_id);
  if (!n) throw ValidationError("unknown node '" + std::string(node_id) + "'");
  for (const auto& visit : net.route(*r).visits) {
    if (visit.node == *n) return visit.steps;
  }
  throw ValidationError("node '" + std::string(node_id) + "' is not on route '" + std::string(route_id) + "'");
}

}  // namespace rampmeter
