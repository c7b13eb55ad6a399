#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rampmeter/constants.hpp"

namespace rampmeter {

enum class NodeKind { source, sink, on_ramp_node, merge_node, diverge_node, off_ramp_node };
enum class EdgeKind { segment, on_ramp, off_ramp };

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view text);
std::optional<EdgeKind> parse_edge_kind(std::string_view text);

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::merge_node;
};

struct EdgeSpec {
  std::string id;
  std::string tail;
  std::string head;
  EdgeKind kind = EdgeKind::segment;
  int slot_count = 0;               // segments only
  std::optional<double> length_m;   // advisory
};

struct RouteSpec {
  std::string id;
  std::vector<std::string> edges;
};

struct Issue {
  std::string where;
  std::string message;
};

struct ValidationReport {
  std::vector<Issue> issues;

  bool ok() const noexcept { return issues.empty(); }
  void add(std::string where, std::string message) {
    issues.push_back({std::move(where), std::move(message)});
  }
  void append(const ValidationReport& other) {
    issues.insert(issues.end(), other.issues.begin(), other.issues.end());
  }
};

using NodeIndex = int;
using EdgeIndex = int;
using RouteIndex = int;
using RampIndex = int;
inline constexpr int kNone = -1;

/// An on-ramp: its edge, the source feeding it and the node where it joins.
struct Ramp {
  std::string id;  // id of the on-ramp edge
  EdgeIndex edge = kNone;
  NodeIndex source = kNone;
  NodeIndex node = kNone;
};

/// A point where a route passes through a node after release.
struct RouteVisit {
  NodeIndex node = kNone;
  EdgeIndex via = kNone;  // edge the vehicle arrives on
  int steps = 0;          // free-flow steps after release
  int edge_pos = 0;       // index of `via` in the route's edge list
};

struct Route {
  std::string id;
  std::vector<EdgeIndex> edges;
  RampIndex ramp = kNone;
  std::vector<RouteVisit> visits;  // visits[0] is the entry ramp node
};

/// Freeway network graph. Immutable after construction.
///
/// Construction resolves string ids to indices and never throws on bad
/// topology; `validate` reports every problem. Other operations assume the
/// network validated cleanly.
class Network {
 public:
  Network() = default;
  Network(std::vector<NodeSpec> nodes, std::vector<EdgeSpec> edges, std::vector<RouteSpec> routes);

  const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }
  const std::vector<EdgeSpec>& edges() const noexcept { return edges_; }
  const std::vector<RouteSpec>& route_specs() const noexcept { return route_specs_; }
  const std::vector<Route>& routes() const noexcept { return routes_; }
  const std::vector<Ramp>& ramps() const noexcept { return ramps_; }

  const NodeSpec& node(NodeIndex n) const { return nodes_.at(static_cast<std::size_t>(n)); }
  const EdgeSpec& edge(EdgeIndex e) const { return edges_.at(static_cast<std::size_t>(e)); }
  const Route& route(RouteIndex r) const { return routes_.at(static_cast<std::size_t>(r)); }
  const Ramp& ramp(RampIndex i) const { return ramps_.at(static_cast<std::size_t>(i)); }
  int ramp_count() const noexcept { return static_cast<int>(ramps_.size()); }
  int route_count() const noexcept { return static_cast<int>(routes_.size()); }

  std::optional<NodeIndex> find_node(std::string_view id) const;
  std::optional<EdgeIndex> find_edge(std::string_view id) const;
  std::optional<RouteIndex> find_route(std::string_view id) const;
  std::optional<RampIndex> find_ramp(std::string_view id) const;

  NodeIndex edge_tail(EdgeIndex e) const { return tails_.at(static_cast<std::size_t>(e)); }
  NodeIndex edge_head(EdgeIndex e) const { return heads_.at(static_cast<std::size_t>(e)); }
  const std::vector<EdgeIndex>& out_edges(NodeIndex n) const { return out_.at(static_cast<std::size_t>(n)); }
  const std::vector<EdgeIndex>& in_edges(NodeIndex n) const { return in_.at(static_cast<std::size_t>(n)); }

  /// Ramp whose on-ramp joins at `n`, or kNone.
  RampIndex ramp_at_node(NodeIndex n) const { return ramp_at_node_.at(static_cast<std::size_t>(n)); }
  /// Routes whose first edge is ramp `i`'s on-ramp, in declaration order.
  const std::vector<RouteIndex>& routes_from(RampIndex i) const { return routes_from_.at(static_cast<std::size_t>(i)); }

  /// M_i^-: on-ramps immediately upstream of ramp i along the mainline.
  const std::vector<RampIndex>& predecessors(RampIndex i) const { return pred_.at(static_cast<std::size_t>(i)); }
  /// M_i^+: on-ramps immediately downstream of ramp i.
  const std::vector<RampIndex>& successors(RampIndex i) const { return succ_.at(static_cast<std::size_t>(i)); }

  bool acyclic() const noexcept { return acyclic_; }

  /// Nodes where two traffic streams join (merge and on-ramp nodes).
  bool is_joining(NodeIndex n) const {
    const auto k = node(n).kind;
    return k == NodeKind::merge_node || k == NodeKind::on_ramp_node;
  }

  /// Problems found while resolving ids; folded into `validate`.
  const std::vector<Issue>& resolution_issues() const noexcept { return resolution_issues_; }

 private:
  std::vector<NodeSpec> nodes_;
  std::vector<EdgeSpec> edges_;
  std::vector<RouteSpec> route_specs_;
  std::vector<Route> routes_;
  std::vector<Ramp> ramps_;
  std::vector<NodeIndex> tails_, heads_;
  std::vector<std::vector<EdgeIndex>> out_, in_;
  std::vector<RampIndex> ramp_at_node_;
  std::vector<std::vector<RouteIndex>> routes_from_;
  std::vector<std::vector<RampIndex>> pred_, succ_;
  std::vector<Issue> resolution_issues_;
  bool acyclic_ = true;
};

/// Lists every violated topology invariant. Empty iff well-formed.
ValidationReport validate(const Network& network, const SimConstants& constants);

/// True iff a node after the route's entry node is a merge node or another
/// ramp's on-ramp node. Throws ValidationError for unknown route ids.
bool route_contains_merge(const Network& network, std::string_view route_id);
bool route_contains_merge(const Network& network, RouteIndex route);

/// Free-flow steps from release until the route reaches `node_id` (first visit).
/// Throws ValidationError if the route or node is unknown or not on the route.
int crossing_steps(const Network& network, std::string_view route_id, std::string_view node_id);

/// For every route and edge position k, the ramps whose node is the head of
/// one of the route's edges k..n-2, i.e. the ramp nodes still to be crossed
/// by a vehicle on edge k (a queued vehicle sits at k = 0).
std::vector<std::vector<std::vector<RampIndex>>> remaining_ramp_crossings(const Network& network);

/// Rounded slot count for a physical length.
int slots_for_length(double length_m, const SimConstants& constants);

}  // namespace rampmeter
