#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tisim/ids.hpp"
#include "tisim/metrics.hpp"

namespace tisim {

enum class NodeKind { intersection, inbound, outbound, bridge, tunnel, terminal };

[[nodiscard]] std::string_view to_string(NodeKind k);
[[nodiscard]] NodeKind parse_node_kind(std::string_view s);

struct Position {
    double x = 0.0;  // meters
    double y = 0.0;

    friend bool operator==(const Position&, const Position&) = default;
};

struct RoadNode {
    NodeId id;
    std::string name;
    NodeKind kind = NodeKind::intersection;
    Position position;
    std::vector<double> metric_values;
    /// Number of attached terminals (parking lots, stations). Terminal 0 is the node itself.
    int terminal_count = 0;

    [[nodiscard]] bool is_terminal() const { return kind == NodeKind::terminal || terminal_count > 0; }

    friend bool operator==(const RoadNode&, const RoadNode&) = default;
};

struct RoadLink {
    LinkId id;
    std::string name;
    NodeId from;
    NodeId to;
    double length = 0.0;       // meters
    int lane_count = 1;
    double speed_limit = 0.0;  // km/h
    std::vector<double> metric_values;

    [[nodiscard]] double speed_limit_mps() const { return speed_limit / 3.6; }

    friend bool operator==(const RoadLink&, const RoadLink&) = default;
};

/// One outgoing hop from a node.
struct Hop {
    LinkId link;
    NodeId node;

    friend bool operator==(const Hop&, const Hop&) = default;
};

/// Directed road network G = (V, E). Ids are dense (0..n-1) and stored in id
/// order; the graph is immutable once built.
class RoadGraph {
public:
    class Builder;

    RoadGraph() = default;

    [[nodiscard]] std::span<const MetricSpec> metric_specs() const { return metrics_; }
    [[nodiscard]] std::span<const RoadNode> nodes() const { return nodes_; }
    [[nodiscard]] std::span<const RoadLink> links() const { return links_; }
    [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
    [[nodiscard]] std::size_t link_count() const { return links_.size(); }
    [[nodiscard]] std::size_t metric_count() const { return metrics_.size(); }

    [[nodiscard]] bool has_node(NodeId id) const { return id.valid() && id.index() < nodes_.size(); }
    [[nodiscard]] bool has_link(LinkId id) const { return id.valid() && id.index() < links_.size(); }
    /// Throws UnknownNode.
    [[nodiscard]] const RoadNode& node(NodeId id) const;
    /// Throws ValidationError on an unknown link id.
    [[nodiscard]] const RoadLink& link(LinkId id) const;

    /// Out-links of `node` in link-id order. Throws UnknownNode.
    [[nodiscard]] std::vector<Hop> neighbors(NodeId node) const;
    [[nodiscard]] std::span<const LinkId> out_links(NodeId node) const;
    [[nodiscard]] std::span<const LinkId> in_links(NodeId node) const;

    [[nodiscard]] std::optional<int> metric_index(std::string_view name) const;
    [[nodiscard]] std::optional<NodeId> find_node(std::string_view name) const;
    [[nodiscard]] std::optional<LinkId> find_link(std::string_view name) const;
    /// The link running opposite to `link` (to -> from), lowest id if several.
    [[nodiscard]] std::optional<LinkId> reverse_link(LinkId link) const;

    /// Copy with metric `k` of every link replaced by `value(link)`.
    template <class F>
    [[nodiscard]] RoadGraph with_link_metric(int k, F&& value) const {
        RoadGraph g = *this;
        for (auto& l : g.links_) l.metric_values.at(static_cast<std::size_t>(k)) = value(l);
        return g;
    }

    template <class F>
    [[nodiscard]] RoadGraph with_node_metric(int k, F&& value) const {
        RoadGraph g = *this;
        for (auto& n : g.nodes_) n.metric_values.at(static_cast<std::size_t>(k)) = value(n);
        return g;
    }

    /// Re-checks every invariant; throws ValidationError. Never modifies the graph.
    void validate() const;

    friend bool operator==(const RoadGraph& a, const RoadGraph& b) {
        return a.metrics_ == b.metrics_ && a.nodes_ == b.nodes_ && a.links_ == b.links_;
    }

private:
    friend class Builder;
    void index();

    std::vector<MetricSpec> metrics_;
    std::vector<RoadNode> nodes_;
    std::vector<RoadLink> links_;
    std::vector<std::vector<LinkId>> out_;
    std::vector<std::vector<LinkId>> in_;
};

/// Collects nodes and links in any order; build() sorts by id and validates.
class RoadGraph::Builder {
public:
    Builder& metric(std::string name, MetricKind kind, Direction direction = Direction::minimize);
    Builder& add_node(RoadNode node);
    Builder& add_link(RoadLink link);

    /// Convenience: node with id = number of nodes added so far and zero metric values.
    NodeId node(std::string name, NodeKind kind = NodeKind::intersection, Position pos = {});
    /// Convenience: link with id = number of links added so far. `values` must have one
    /// entry per metric; pass an empty vector to get distance = length, time = length/speed
    /// and zero for every other metric.
    LinkId link(std::string name, NodeId from, NodeId to, double length, std::vector<double> values = {},
                int lanes = 1, double speed_kmh = 50.0);

    /// Throws ValidationError.
    [[nodiscard]] RoadGraph build() const;

    [[nodiscard]] std::size_t metric_count() const { return metrics_.size(); }

private:
    std::vector<MetricSpec> metrics_;
    std::vector<RoadNode> nodes_;
    std::vector<RoadLink> links_;
};

/// Default link value for a named metric when a scenario leaves it out:
/// distance = length, time = travel time at the speed limit, otherwise nullopt.
[[nodiscard]] std::optional<double> default_link_metric(std::string_view metric_name, double length, double speed_kmh);

}  // namespace tisim
