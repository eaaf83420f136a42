#include "tisim/link_state.hpp"

#include <limits>

#include "tisim/error.hpp"
#include "tisim/routing.hpp"

namespace tisim {

namespace {

double neutral_endpoint(MetricKind kind) {
    switch (kind) {
        case MetricKind::additive:
            return 0.0;
        case MetricKind::multiplicative:
            return 1.0;
        case MetricKind::concave_min:
            return std::numeric_limits<double>::infinity();
        case MetricKind::concave_max:
            return -std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

// Exhaustive simple-path optimum; used when the label solver rejects the metric.
void enumerate(const RoadGraph& g, NodeId v, NodeId t, int k, Direction d, std::vector<bool>& seen,
               std::vector<NodeId>& nodes, std::vector<LinkId>& links, std::optional<double>& best) {
    if (v == t) {
        const double value = path_values(g, nodes, links)[static_cast<std::size_t>(k)];
        if (!best || better(d, value, *best)) best = value;
        return;
    }
    for (LinkId l : g.out_links(v)) {
        NodeId w = g.link(l).to;
        if (seen[w.index()]) continue;
        seen[w.index()] = true;
        nodes.push_back(w);
        links.push_back(l);
        enumerate(g, w, t, k, d, seen, nodes, links, best);
        nodes.pop_back();
        links.pop_back();
        seen[w.index()] = false;
    }
}

std::optional<double> inner_optimum(const RoadGraph& sub, NodeId a, NodeId b, const MetricSpec& m) {
    const RoadGraph g = sub.with_node_metric(m.index, [&](const RoadNode& n) {
        return (n.id == a || n.id == b) ? neutral_endpoint(m.kind) : n.metric_values[static_cast<std::size_t>(m.index)];
    });
    try {
        Path p = constrained_route(g, RouteRequest{a, b, Objective{m.index, m.direction}, {}, std::nullopt});
        return p.values[static_cast<std::size_t>(m.index)];
    } catch (const NoRoute&) {
        return std::nullopt;
    } catch (const PreconditionError&) {
        std::vector<bool> seen(g.node_count(), false);
        seen[a.index()] = true;
        std::vector<NodeId> nodes{a};
        std::vector<LinkId> links;
        std::optional<double> best;
        enumerate(g, a, b, m.index, m.direction, seen, nodes, links, best);
        return best;
    }
}

}  // namespace

std::vector<TasSummary> compute_tas_summaries(const RoadGraph& graph, const NetworkHierarchy& h, TasId tas,
                                              const std::set<NodeId>& entries, const std::set<NodeId>& exits) {
    std::vector<NodeId> node_map;
    const RoadGraph sub = h.area_subgraph(graph, tas, &node_map);
    auto local = [&](NodeId n) {
        for (std::size_t i = 0; i < node_map.size(); ++i) {
            if (node_map[i] == n) return NodeId{static_cast<std::int32_t>(i)};
        }
        throw ValidationError("node " + std::to_string(n.value) + " is not in TAS " + std::to_string(tas.value));
    };
    std::vector<TasSummary> out;
    for (NodeId a : entries) {
        for (NodeId b : exits) {
            if (a == b) continue;
            TasSummary s{tas, a, b, 0, {}};
            bool reachable = true;
            for (const auto& m : sub.metric_specs()) {
                auto v = inner_optimum(sub, local(a), local(b), m);
                if (!v) {
                    reachable = false;
                    break;
                }
                s.values.push_back(*v);
            }
            if (reachable) out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<TasSummary> compute_tas_summaries(const RoadGraph& graph, const NetworkHierarchy& h, TasId tas) {
    const auto& borders = h.area(tas).border_nodes;
    return compute_tas_summaries(graph, h, tas, borders, borders);
}

std::vector<RouterDatabase> initial_databases(const RoadGraph& graph, const NetworkHierarchy& h) {
    std::vector<RouterDatabase> dbs(graph.node_count());
    std::vector<TasSummary> all_summaries;
    for (const auto& area : h.areas()) {
        auto s = compute_tas_summaries(graph, h, area.id);
        all_summaries.insert(all_summaries.end(), s.begin(), s.end());
    }
    for (const auto& n : graph.nodes()) {
        RouterDatabase& db = dbs[n.id.index()];
        db.router = n.id;
        db.tas = h.tas_of(n.id);
        const bool border = h.area(db.tas).border_nodes.contains(n.id);
        for (const auto& l : graph.links()) {
            const bool external = h.is_external(l.id);
            if ((!external && h.tas_of(l.from) == db.tas) || (external && border))
                db.links[l.id] = LinkStateRecord{l.id, 1, l.metric_values};
        }
        for (const auto& s : all_summaries) {
            TasSummary copy = s;
            copy.sequence = 1;
            db.summaries[{s.tas, s.entry, s.exit}] = std::move(copy);
        }
    }
    return dbs;
}

void originate(std::vector<RouterDatabase>& dbs, const RoadGraph& graph, LinkId link, std::vector<double> values) {
    const RoadLink& l = graph.link(link);
    if (values.size() != graph.metric_count()) throw ValidationError("link-state record arity mismatch");
    RouterDatabase& owner = dbs.at(l.from.index());
    auto& rec = owner.links[link];
    rec.link = link;
    rec.sequence += 1;
    rec.values = std::move(values);
}

RoadGraph apply_link_state(const RoadGraph& graph, const RouterDatabase& db) {
    RoadGraph g = graph;
    for (std::size_t k = 0; k < graph.metric_count(); ++k) {
        g = g.with_link_metric(static_cast<int>(k), [&](const RoadLink& l) {
            auto it = db.links.find(l.id);
            return it == db.links.end() ? l.metric_values[k] : it->second.values[k];
        });
    }
    return g;
}

void link_state_sync(std::vector<RouterDatabase>& dbs, const RoadGraph& graph, const NetworkHierarchy& h,
                     const std::set<LinkId>& changed) {
    std::set<TasId> touched;
    for (LinkId lid : changed) {
        const RoadLink& l = graph.link(lid);
        const RouterDatabase& owner = dbs.at(l.from.index());
        auto rec_it = owner.links.find(lid);
        if (rec_it == owner.links.end()) continue;
        const LinkStateRecord rec = rec_it->second;
        const bool external = h.is_external(lid);
        const TasId home = h.tas_of(l.from);
        for (auto& db : dbs) {
            const bool wants = external ? h.area(db.tas).border_nodes.contains(db.router) : db.tas == home;
            if (!wants) continue;
            auto& mine = db.links[lid];
            if (mine.sequence < rec.sequence) mine = rec;
        }
        if (!external) touched.insert(home);
    }

    for (TasId tas : touched) {
        const auto& area = h.area(tas);
        if (area.border_nodes.empty()) continue;
        // The lowest-id border router speaks for the TAS.
        RouterDatabase& speaker = dbs.at(area.border_nodes.begin()->index());
        const RoadGraph view = apply_link_state(graph, speaker);
        const auto fresh = compute_tas_summaries(view, h, tas);

        std::map<SummaryKey, TasSummary> next;
        for (const auto& s : fresh) {
            SummaryKey key{s.tas, s.entry, s.exit};
            TasSummary updated = s;
            auto old = speaker.summaries.find(key);
            if (old == speaker.summaries.end())
                updated.sequence = 1;
            else
                updated.sequence = old->second.values == s.values ? old->second.sequence : old->second.sequence + 1;
            next[key] = std::move(updated);
        }
        for (auto& db : dbs) {
            std::erase_if(db.summaries, [&](const auto& kv) {
                return std::get<0>(kv.first) == tas && !next.contains(kv.first);
            });
            for (const auto& [key, s] : next) {
                auto& mine = db.summaries[key];
                if (mine.sequence < s.sequence || mine.values.empty()) mine = s;
            }
        }
    }
}

}  // namespace tisim
