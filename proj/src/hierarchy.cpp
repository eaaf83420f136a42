#include "tisim/hierarchy.hpp"

#include <charconv>

#include "tisim/error.hpp"

namespace tisim {

std::string_view to_string(TasKind k) { return k == TasKind::stub ? "stub" : "transit"; }

std::string_view to_string(Tier t) {
    switch (t) {
        case Tier::lan:
            return "LAN";
        case Tier::man:
            return "MAN";
        case Tier::wan:
            return "WAN";
    }
    return "?";
}

TasKind parse_tas_kind(std::string_view s) {
    if (s == "stub") return TasKind::stub;
    if (s == "transit") return TasKind::transit;
    throw ParseError("unknown TAS kind '" + std::string(s) + "'");
}

Tier parse_tier(std::string_view s) {
    if (s == "LAN" || s == "lan") return Tier::lan;
    if (s == "MAN" || s == "man") return Tier::man;
    if (s == "WAN" || s == "wan") return Tier::wan;
    throw ParseError("unknown tier '" + std::string(s) + "'");
}

std::string to_string(const TransportAddress& a) {
    return std::to_string(a.tas) + "." + std::to_string(a.node) + "." + std::to_string(a.terminal);
}

TransportAddress parse_address(std::string_view s) {
    int parts[3] = {0, 0, 0};
    int count = 0;
    const char* p = s.data();
    const char* end = s.data() + s.size();
    while (p < end) {
        if (count == 3) throw ParseError("address '" + std::string(s) + "' has more than three parts");
        auto [next, ec] = std::from_chars(p, end, parts[count]);
        if (ec != std::errc{} || parts[count] < 0) throw ParseError("malformed address '" + std::string(s) + "'");
        ++count;
        p = next;
        if (p < end) {
            if (*p != '.') throw ParseError("malformed address '" + std::string(s) + "'");
            ++p;
            if (p == end) throw ParseError("malformed address '" + std::string(s) + "'");
        }
    }
    if (count < 2) throw ParseError("address '" + std::string(s) + "' needs at least tas.node");
    return {parts[0], parts[1], parts[2]};
}

NetworkHierarchy::NetworkHierarchy(std::vector<TasDescriptor> areas, std::set<LinkId> external_links,
                                   std::vector<TasId> node_tas)
    : areas_(std::move(areas)), external_(std::move(external_links)), node_tas_(std::move(node_tas)) {}

TasId NetworkHierarchy::tas_of(NodeId n) const {
    if (!n.valid() || n.index() >= node_tas_.size()) throw UnknownNode("node " + std::to_string(n.value) + " has no TAS");
    return node_tas_[n.index()];
}

const TasDescriptor& NetworkHierarchy::area(TasId id) const {
    for (const auto& a : areas_) {
        if (a.id == id) return a;
    }
    throw ValidationError("unknown TAS " + std::to_string(id.value));
}

TransportAddress NetworkHierarchy::address_of(const RoadGraph& g, NodeId n) const {
    (void)g.node(n);
    return {tas_of(n).value, n.value, 0};
}

std::optional<NodeId> NetworkHierarchy::resolve(const RoadGraph& g, const TransportAddress& a) const {
    NodeId n{a.node};
    if (!g.has_node(n) || n.index() >= node_tas_.size()) return std::nullopt;
    if (node_tas_[n.index()].value != a.tas) return std::nullopt;
    if (a.terminal < 0 || a.terminal > g.node(n).terminal_count) return std::nullopt;
    return n;
}

RoadGraph induced_subgraph(const RoadGraph& g, const std::set<NodeId>& keep, std::vector<NodeId>* node_map,
                           std::vector<LinkId>* link_map) {
    RoadGraph::Builder b;
    for (const auto& m : g.metric_specs()) b.metric(m.name, m.kind, m.direction);
    std::vector<int> renum(g.node_count(), -1);
    std::vector<NodeId> nodes;
    for (NodeId n : keep) {
        RoadNode copy = g.node(n);
        copy.id = NodeId{static_cast<std::int32_t>(nodes.size())};
        renum[n.index()] = copy.id.value;
        nodes.push_back(n);
        b.add_node(std::move(copy));
    }
    std::vector<LinkId> links;
    for (const auto& l : g.links()) {
        if (renum[l.from.index()] < 0 || renum[l.to.index()] < 0) continue;
        RoadLink copy = l;
        copy.id = LinkId{static_cast<std::int32_t>(links.size())};
        copy.from = NodeId{renum[l.from.index()]};
        copy.to = NodeId{renum[l.to.index()]};
        links.push_back(l.id);
        b.add_link(std::move(copy));
    }
    if (node_map) *node_map = std::move(nodes);
    if (link_map) *link_map = std::move(links);
    return b.build();
}

RoadGraph NetworkHierarchy::area_subgraph(const RoadGraph& g, TasId id, std::vector<NodeId>* node_map,
                                          std::vector<LinkId>* link_map) const {
    return induced_subgraph(g, area(id).member_nodes, node_map, link_map);
}

NetworkHierarchy partition_into_tas(const RoadGraph& graph, const std::map<NodeId, TasId>& assignment,
                                    const std::map<TasId, TasProfile>& profiles) {
    std::vector<TasId> node_tas(graph.node_count());
    std::map<TasId, TasDescriptor> areas;
    for (const auto& n : graph.nodes()) {
        auto it = assignment.find(n.id);
        if (it == assignment.end()) throw ValidationError("node '" + n.name + "' is not assigned to a TAS");
        if (!it->second.valid()) throw ValidationError("node '" + n.name + "' has an invalid TAS id");
        node_tas[n.id.index()] = it->second;
        auto& area = areas[it->second];
        area.id = it->second;
        area.member_nodes.insert(n.id);
    }
    for (const auto& [tas, _] : profiles) {
        if (!areas.contains(tas)) throw ValidationError("TAS " + std::to_string(tas.value) + " has no member nodes");
    }

    std::set<LinkId> external;
    for (const auto& l : graph.links()) {
        if (node_tas[l.from.index()] == node_tas[l.to.index()]) continue;
        external.insert(l.id);
        areas[node_tas[l.from.index()]].border_nodes.insert(l.from);
        areas[node_tas[l.to.index()]].border_nodes.insert(l.to);
    }

    std::vector<TasDescriptor> out;
    for (auto& [id, area] : areas) {
        if (auto p = profiles.find(id); p != profiles.end()) {
            area.kind = p->second.kind;
            area.tier = p->second.tier;
        }
        if (area.kind == TasKind::stub) {
            bool has_terminal = false;
            for (NodeId n : area.member_nodes) has_terminal = has_terminal || graph.node(n).is_terminal();
            if (!has_terminal) throw ValidationError("stub TAS " + std::to_string(id.value) + " has no terminal node");
        }
        out.push_back(std::move(area));
    }
    return NetworkHierarchy(std::move(out), std::move(external), std::move(node_tas));
}

}  // namespace tisim
