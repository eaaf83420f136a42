#pragma once

#include <optional>
#include <vector>

#include "tisim/graph.hpp"

namespace tisim {

enum class Sense { at_most, at_least };

/// w_k(p) <= bound (at_most) or w_k(p) >= bound (at_least).
struct Constraint {
    int metric = 0;
    double bound = 0.0;
    Sense sense = Sense::at_most;

    [[nodiscard]] bool satisfied_by(double value) const { return sense == Sense::at_most ? value <= bound : value >= bound; }

    friend bool operator==(const Constraint&, const Constraint&) = default;
};

struct Objective {
    int metric = 0;
    Direction direction = Direction::minimize;

    friend bool operator==(const Objective&, const Objective&) = default;
};

struct RouteRequest {
    NodeId source;
    NodeId destination;
    Objective objective;
    std::vector<Constraint> constraints;
    /// Hop bound around the source limiting the topology the solver sees.
    std::optional<int> horizon;
};

/// p = v_s ... v_t with its links and every aggregated metric value.
struct Path {
    std::vector<NodeId> nodes;
    std::vector<LinkId> links;
    std::vector<double> values;

    [[nodiscard]] bool empty() const { return links.empty(); }

    friend bool operator==(const Path&, const Path&) = default;
};

/// Aggregated values of every metric for a node/link sequence.
[[nodiscard]] std::vector<double> path_values(const RoadGraph& g, std::span<const NodeId> nodes,
                                              std::span<const LinkId> links);
/// Builds a Path from its link sequence (source given for the empty case).
[[nodiscard]] Path make_path(const RoadGraph& g, NodeId source, std::span<const LinkId> links);
/// True when consecutive nodes are joined by the listed links and the path runs s -> t.
[[nodiscard]] bool is_valid_path(const RoadGraph& g, const Path& p, NodeId s, NodeId t);

/// Unconstrained optimum of an additive objective with nonnegative values
/// (Dijkstra), or of a maximized multiplicative objective with values in (0,1]
/// via -log. Ties go to the lexicographically smallest node sequence.
/// Throws NoRoute, PreconditionError, UnknownNode.
[[nodiscard]] Path best_effort_route(const RoadGraph& g, const RouteRequest& request);

/// Exact multi-constraint optimum over simple paths by label setting with
/// Pareto-dominance pruning. Throws NoRoute when t is unreachable, Infeasible
/// when every path violates a constraint, PreconditionError for a
/// multiplicative objective with values outside (0,1].
[[nodiscard]] Path constrained_route(const RoadGraph& g, const RouteRequest& request);

/// Induced subgraph of the nodes within `horizon` hops of `center`, hops
/// counted on the undirected closure. `node_map` receives sub id -> original id.
/// Throws UnknownNode, PreconditionError (negative horizon).
[[nodiscard]] RoadGraph build_topology_snapshot(const RoadGraph& g, NodeId center, int horizon,
                                                std::vector<NodeId>* node_map = nullptr,
                                                std::vector<LinkId>* link_map = nullptr);

/// One row of an exported routing table.
struct RouteTableEntry {
    NodeId node;
    NodeId destination;
    LinkId next_hop;
    std::vector<double> values;
};

/// Best-effort routes from `node` to every other reachable node, in destination order.
[[nodiscard]] std::vector<RouteTableEntry> routing_table(const RoadGraph& g, NodeId node, Objective objective);

/// Lexicographic order on node-id sequences.
[[nodiscard]] bool lex_less(std::span<const NodeId> a, std::span<const NodeId> b);

}  // namespace tisim
