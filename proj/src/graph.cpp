#include "tisim/graph.hpp"

#include <algorithm>
#include <set>

#include "tisim/error.hpp"

namespace tisim {

std::string_view to_string(NodeKind k) {
    switch (k) {
        case NodeKind::intersection:
            return "intersection";
        case NodeKind::inbound:
            return "inbound";
        case NodeKind::outbound:
            return "outbound";
        case NodeKind::bridge:
            return "bridge";
        case NodeKind::tunnel:
            return "tunnel";
        case NodeKind::terminal:
            return "terminal";
    }
    return "?";
}

NodeKind parse_node_kind(std::string_view s) {
    for (auto k : {NodeKind::intersection, NodeKind::inbound, NodeKind::outbound, NodeKind::bridge, NodeKind::tunnel,
                   NodeKind::terminal}) {
        if (to_string(k) == s) return k;
    }
    throw ParseError("unknown node kind '" + std::string(s) + "'");
}

std::optional<double> default_link_metric(std::string_view metric_name, double length, double speed_kmh) {
    if (metric_name == "distance") return length;
    if (metric_name == "time" && speed_kmh > 0) return length / (speed_kmh / 3.6);
    return std::nullopt;
}

const RoadNode& RoadGraph::node(NodeId id) const {
    if (!has_node(id)) throw UnknownNode("unknown node " + std::to_string(id.value));
    return nodes_[id.index()];
}

const RoadLink& RoadGraph::link(LinkId id) const {
    if (!has_link(id)) throw ValidationError("unknown link " + std::to_string(id.value));
    return links_[id.index()];
}

std::vector<Hop> RoadGraph::neighbors(NodeId node) const {
    std::vector<Hop> hops;
    for (LinkId l : out_links(node)) hops.push_back({l, links_[l.index()].to});
    return hops;
}

std::span<const LinkId> RoadGraph::out_links(NodeId node) const {
    if (!has_node(node)) throw UnknownNode("unknown node " + std::to_string(node.value));
    return out_[node.index()];
}

std::span<const LinkId> RoadGraph::in_links(NodeId node) const {
    if (!has_node(node)) throw UnknownNode("unknown node " + std::to_string(node.value));
    return in_[node.index()];
}

std::optional<int> RoadGraph::metric_index(std::string_view name) const {
    for (const auto& m : metrics_) {
        if (m.name == name) return m.index;
    }
    return std::nullopt;
}

std::optional<NodeId> RoadGraph::find_node(std::string_view name) const {
    for (const auto& n : nodes_) {
        if (n.name == name) return n.id;
    }
    return std::nullopt;
}

std::optional<LinkId> RoadGraph::find_link(std::string_view name) const {
    for (const auto& l : links_) {
        if (l.name == name) return l.id;
    }
    return std::nullopt;
}

std::optional<LinkId> RoadGraph::reverse_link(LinkId id) const {
    const RoadLink& l = link(id);
    for (LinkId c : out_[l.to.index()]) {
        if (links_[c.index()].to == l.from) return c;
    }
    return std::nullopt;
}

void RoadGraph::index() {
    out_.assign(nodes_.size(), {});
    in_.assign(nodes_.size(), {});
    for (const auto& l : links_) {
        out_[l.from.index()].push_back(l.id);
        in_[l.to.index()].push_back(l.id);
    }
}

void RoadGraph::validate() const {
    std::set<std::string> names;
    for (std::size_t k = 0; k < metrics_.size(); ++k) {
        if (metrics_[k].index != static_cast<int>(k))
            throw ValidationError("metric '" + metrics_[k].name + "': indices must be contiguous from 0");
        if (!names.insert(metrics_[k].name).second)
            throw ValidationError("metric '" + metrics_[k].name + "' declared twice");
    }
    const std::size_t n_metrics = metrics_.size();
    const auto distance = metric_index("distance");

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const RoadNode& n = nodes_[i];
        if (n.id.index() != i) throw ValidationError("node ids must be dense and unique (node '" + n.name + "')");
        if (n.metric_values.size() != n_metrics)
            throw ValidationError("node '" + n.name + "': metric arity " + std::to_string(n.metric_values.size()) +
                                  ", expected " + std::to_string(n_metrics));
        if (n.terminal_count < 0) throw ValidationError("node '" + n.name + "': negative terminal count");
    }
    for (std::size_t i = 0; i < links_.size(); ++i) {
        const RoadLink& l = links_[i];
        const std::string who = "link '" + l.name + "'";
        if (l.id.index() != i) throw ValidationError("link ids must be dense and unique (" + who + ")");
        if (!has_node(l.from) || !has_node(l.to)) throw ValidationError(who + ": dangling endpoint");
        if (l.from == l.to) throw ValidationError(who + ": self-loop");
        if (!(l.length > 0.0)) throw ValidationError(who + ": length must be positive");
        if (!(l.speed_limit > 0.0)) throw ValidationError(who + ": speed limit must be positive");
        if (l.lane_count < 1) throw ValidationError(who + ": lane count must be at least 1");
        if (l.metric_values.size() != n_metrics)
            throw ValidationError(who + ": metric arity " + std::to_string(l.metric_values.size()) + ", expected " +
                                  std::to_string(n_metrics));
        if (distance && l.metric_values[static_cast<std::size_t>(*distance)] != l.length)
            throw ValidationError(who + ": distance metric must equal length");
    }
}

RoadGraph::Builder& RoadGraph::Builder::metric(std::string name, MetricKind kind, Direction direction) {
    metrics_.push_back({static_cast<int>(metrics_.size()), std::move(name), kind, direction});
    return *this;
}

RoadGraph::Builder& RoadGraph::Builder::add_node(RoadNode node) {
    nodes_.push_back(std::move(node));
    return *this;
}

RoadGraph::Builder& RoadGraph::Builder::add_link(RoadLink link) {
    links_.push_back(std::move(link));
    return *this;
}

NodeId RoadGraph::Builder::node(std::string name, NodeKind kind, Position pos) {
    NodeId id{static_cast<std::int32_t>(nodes_.size())};
    nodes_.push_back(RoadNode{id, std::move(name), kind, pos, {}, 0});
    return id;
}

LinkId RoadGraph::Builder::link(std::string name, NodeId from, NodeId to, double length, std::vector<double> values,
                                int lanes, double speed_kmh) {
    LinkId id{static_cast<std::int32_t>(links_.size())};
    links_.push_back(RoadLink{id, std::move(name), from, to, length, lanes, speed_kmh, std::move(values)});
    return id;
}

RoadGraph RoadGraph::Builder::build() const {
    RoadGraph g;
    g.metrics_ = metrics_;
    g.nodes_ = nodes_;
    g.links_ = links_;
    // Empty value vectors are filled: zeros for nodes, named defaults (or zero) for links.
    for (auto& n : g.nodes_) {
        if (n.metric_values.empty()) n.metric_values.assign(metrics_.size(), 0.0);
    }
    for (auto& l : g.links_) {
        if (!l.metric_values.empty()) continue;
        for (const auto& m : metrics_)
            l.metric_values.push_back(default_link_metric(m.name, l.length, l.speed_limit).value_or(0.0));
    }
    std::sort(g.nodes_.begin(), g.nodes_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::sort(g.links_.begin(), g.links_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    // Endpoint checks must precede indexing.
    for (const auto& l : g.links_) {
        if (!g.has_node(l.from) || !g.has_node(l.to)) throw ValidationError("link '" + l.name + "': dangling endpoint");
    }
    g.validate();
    g.index();
    return g;
}

}  // namespace tisim
