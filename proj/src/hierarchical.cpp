#include "tisim/hierarchical.hpp"

#include <algorithm>
#include <map>

#include "tisim/error.hpp"
#include "tisim/link_state.hpp"

namespace tisim {

namespace {

NodeId local_id(const std::vector<NodeId>& node_map, NodeId n) {
    auto it = std::find(node_map.begin(), node_map.end(), n);
    if (it == node_map.end()) return NodeId{};
    return NodeId{static_cast<std::int32_t>(it - node_map.begin())};
}

// Solves `r` on the subgraph induced by `keep` and maps the links back.
std::vector<LinkId> solve_on(const RoadGraph& g, const std::set<NodeId>& keep, RouteRequest r) {
    std::vector<NodeId> node_map;
    std::vector<LinkId> link_map;
    const RoadGraph sub = induced_subgraph(g, keep, &node_map, &link_map);
    r.source = local_id(node_map, r.source);
    r.destination = local_id(node_map, r.destination);
    r.horizon.reset();
    if (!r.source.valid() || !r.destination.valid()) throw NoRoute("endpoint outside the routing domain");
    const Path p = constrained_route(sub, r);
    std::vector<LinkId> out;
    for (LinkId l : p.links) out.push_back(link_map[l.index()]);
    return out;
}

HierarchicalRoute assemble(const NetworkHierarchy& h, const RoadGraph& g, NodeId s, const std::vector<LinkId>& links) {
    HierarchicalRoute out;
    out.path = make_path(g, s, links);
    std::vector<LinkId> current;
    for (LinkId l : links) {
        if (h.is_external(l)) {
            if (!current.empty()) out.intra_segments.push_back(std::move(current));
            current.clear();
            out.external_links.push_back(l);
        } else {
            current.push_back(l);
        }
    }
    if (!current.empty()) out.intra_segments.push_back(std::move(current));
    for (NodeId n : out.path.nodes) {
        const TasId tas = h.tas_of(n);
        if (out.tas_sequence.empty() || out.tas_sequence.back() != tas) out.tas_sequence.push_back(tas);
    }
    return out;
}

bool satisfies(const Path& p, const std::vector<Constraint>& cs) {
    return std::all_of(cs.begin(), cs.end(),
                       [&](const Constraint& c) { return c.satisfied_by(p.values[static_cast<std::size_t>(c.metric)]); });
}

struct QuotientHop {
    bool external = false;
    LinkId link;           // external hop
    TasId tas;             // summary hop
    NodeId entry, exit;
};

}  // namespace

HierarchicalRoute hierarchical_route(const NetworkHierarchy& h, const RoadGraph& g, const RouteRequest& request) {
    const NodeId s = request.source;
    const NodeId t = request.destination;
    (void)g.node(s);
    (void)g.node(t);
    const TasId ts = h.tas_of(s);
    const TasId tt = h.tas_of(t);

    if (ts == tt) {
        try {
            return assemble(h, g, s, solve_on(g, h.area(ts).member_nodes, request));
        } catch (const NoRoute&) {
        } catch (const Infeasible&) {
        }
    }

    // Quotient graph over border nodes plus the endpoints.
    std::set<NodeId> qnodes{s, t};
    for (const auto& a : h.areas()) qnodes.insert(a.border_nodes.begin(), a.border_nodes.end());
    std::map<NodeId, NodeId> to_q;
    RoadGraph::Builder b;
    for (const auto& m : g.metric_specs()) b.metric(m.name, m.kind, m.direction);
    for (NodeId n : qnodes) {
        RoadNode copy = g.node(n);
        copy.id = NodeId{static_cast<std::int32_t>(to_q.size())};
        to_q[n] = copy.id;
        b.add_node(std::move(copy));
    }
    const auto distance = g.metric_index("distance");
    std::vector<QuotientHop> hops;
    auto add_hop = [&](QuotientHop hop, NodeId from, NodeId to, std::vector<double> values, double length,
                       double speed) {
        RoadLink l;
        l.id = LinkId{static_cast<std::int32_t>(hops.size())};
        l.name = "q" + std::to_string(hops.size());
        l.from = to_q.at(from);
        l.to = to_q.at(to);
        l.length = length;
        l.speed_limit = speed;
        l.metric_values = std::move(values);
        b.add_link(std::move(l));
        hops.push_back(hop);
    };
    for (LinkId lid : h.external_links()) {
        const RoadLink& l = g.link(lid);
        add_hop(QuotientHop{true, lid, {}, {}, {}}, l.from, l.to, l.metric_values, l.length, l.speed_limit);
    }
    for (const auto& a : h.areas()) {
        std::set<NodeId> entries = a.border_nodes;
        std::set<NodeId> exits = a.border_nodes;
        if (a.id == ts) entries.insert(s);
        if (a.id == tt) exits.insert(t);
        for (const auto& sm : compute_tas_summaries(g, h, a.id, entries, exits)) {
            const double length = distance ? sm.values[static_cast<std::size_t>(*distance)] : 1.0;
            add_hop(QuotientHop{false, {}, a.id, sm.entry, sm.exit}, sm.entry, sm.exit, sm.values, length, 50.0);
        }
    }
    const RoadGraph quotient = b.build();

    RouteRequest qreq = request;
    qreq.source = to_q.at(s);
    qreq.destination = to_q.at(t);
    qreq.horizon.reset();
    const Path qpath = constrained_route(quotient, qreq);

    std::vector<LinkId> links;
    std::set<TasId> visited;
    for (LinkId q : qpath.links) {
        const QuotientHop& hop = hops[q.index()];
        if (hop.external) {
            links.push_back(hop.link);
            continue;
        }
        visited.insert(hop.tas);
        RouteRequest seg{hop.entry, hop.exit, request.objective, {}, std::nullopt};
        auto inner = solve_on(g, h.area(hop.tas).member_nodes, seg);
        links.insert(links.end(), inner.begin(), inner.end());
    }
    HierarchicalRoute route = assemble(h, g, s, links);
    if (satisfies(route.path, request.constraints)) return route;

    // Summaries were optimistic: re-solve exactly over the TAS the quotient route used.
    std::set<NodeId> keep;
    for (NodeId n : route.path.nodes) visited.insert(h.tas_of(n));
    for (TasId tas : visited) {
        const auto& members = h.area(tas).member_nodes;
        keep.insert(members.begin(), members.end());
    }
    return assemble(h, g, s, solve_on(g, keep, request));
}

}  // namespace tisim
