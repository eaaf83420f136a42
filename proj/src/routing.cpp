#include "tisim/routing.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <set>

#include "tisim/error.hpp"
#include "tisim/hierarchy.hpp"

namespace tisim {

bool lex_less(std::span<const NodeId> a, std::span<const NodeId> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::vector<double> path_values(const RoadGraph& g, std::span<const NodeId> nodes, std::span<const LinkId> links) {
    std::vector<double> out;
    out.reserve(g.metric_count());
    for (const auto& m : g.metric_specs()) {
        MetricAccumulator acc(m.kind);
        const auto k = static_cast<std::size_t>(m.index);
        for (NodeId n : nodes) acc.add_node(g.node(n).metric_values[k]);
        for (LinkId l : links) acc.add_edge(g.link(l).metric_values[k]);
        out.push_back(acc.value());
    }
    return out;
}

Path make_path(const RoadGraph& g, NodeId source, std::span<const LinkId> links) {
    Path p;
    p.nodes.push_back(source);
    for (LinkId l : links) {
        const RoadLink& link = g.link(l);
        if (link.from != p.nodes.back()) throw ValidationError("link " + link.name + " does not continue the path");
        p.nodes.push_back(link.to);
        p.links.push_back(l);
    }
    p.values = path_values(g, p.nodes, p.links);
    return p;
}

bool is_valid_path(const RoadGraph& g, const Path& p, NodeId s, NodeId t) {
    if (p.nodes.empty() || p.nodes.front() != s || p.nodes.back() != t) return false;
    if (p.nodes.size() != p.links.size() + 1) return false;
    for (std::size_t i = 0; i < p.links.size(); ++i) {
        if (!g.has_link(p.links[i])) return false;
        const RoadLink& l = g.link(p.links[i]);
        if (l.from != p.nodes[i] || l.to != p.nodes[i + 1]) return false;
    }
    return true;
}

namespace {

void check_request(const RoadGraph& g, const RouteRequest& r) {
    (void)g.node(r.source);
    (void)g.node(r.destination);
    const auto n = static_cast<int>(g.metric_count());
    if (r.objective.metric < 0 || r.objective.metric >= n)
        throw PreconditionError("objective metric index " + std::to_string(r.objective.metric) + " out of range");
    for (const auto& c : r.constraints) {
        if (c.metric < 0 || c.metric >= n)
            throw PreconditionError("constraint metric index " + std::to_string(c.metric) + " out of range");
    }
    if (r.horizon && *r.horizon < 1) throw PreconditionError("horizon must be at least 1");
}

std::vector<bool> reachable_from(const RoadGraph& g, NodeId s) {
    std::vector<bool> seen(g.node_count(), false);
    std::vector<NodeId> stack{s};
    seen[s.index()] = true;
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        for (LinkId l : g.out_links(v)) {
            NodeId w = g.link(l).to;
            if (!seen[w.index()]) {
                seen[w.index()] = true;
                stack.push_back(w);
            }
        }
    }
    return seen;
}

struct ValueRange {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
};

ValueRange value_range(const RoadGraph& g, int metric) {
    ValueRange r;
    const auto k = static_cast<std::size_t>(metric);
    auto take = [&](double v) {
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
    };
    for (const auto& n : g.nodes()) take(n.metric_values[k]);
    for (const auto& l : g.links()) take(l.metric_values[k]);
    return r;
}

// True when extending a path can never move the metric in direction `d`
// (i.e. once worse than a reference, always worse).
bool extension_never_improves(MetricKind kind, Direction d, const ValueRange& r) {
    const bool minimize = d == Direction::minimize;
    switch (kind) {
        case MetricKind::additive:
            return minimize ? r.lo >= 0.0 : r.hi <= 0.0;
        case MetricKind::multiplicative:
            return minimize ? r.lo >= 1.0 : (r.lo >= 0.0 && r.hi <= 1.0);
        case MetricKind::concave_max:
            return minimize;
        case MetricKind::concave_min:
            return !minimize;
    }
    return false;
}

using Bits = std::vector<std::uint64_t>;

bool subset(const Bits& a, const Bits& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] & ~b[i]) return false;
    }
    return true;
}

struct Criterion {
    std::size_t slot;  // index into Label::acc
    Direction direction;
};

struct Label {
    NodeId node;
    std::vector<MetricAccumulator> acc;
    Bits visited;
    std::vector<NodeId> seq;
    std::vector<LinkId> links;
    bool alive = true;
};

bool dominates(const Label& a, const Label& b, const std::vector<Criterion>& criteria) {
    if (!subset(a.visited, b.visited)) return false;
    for (const auto& c : criteria) {
        if (better(c.direction, b.acc[c.slot].value(), a.acc[c.slot].value())) return false;
    }
    return !lex_less(b.seq, a.seq);
}

Path solve_constrained(const RoadGraph& g, const RouteRequest& r) {
    const NodeId s = r.source;
    const NodeId t = r.destination;
    if (!reachable_from(g, s)[t.index()]) throw NoRoute("no route from node " + std::to_string(s.value) + " to node " + std::to_string(t.value));

    const auto& specs = g.metric_specs();
    const auto objective_kind = specs[static_cast<std::size_t>(r.objective.metric)].kind;
    const ValueRange objective_range = value_range(g, r.objective.metric);
    if (objective_kind == MetricKind::multiplicative && (objective_range.lo <= 0.0 || objective_range.hi > 1.0))
        throw PreconditionError("multiplicative objective requires element values in (0,1]");

    // Tracked metrics: slot 0 is the objective, then one slot per distinct constrained metric.
    std::vector<int> tracked{r.objective.metric};
    auto slot_of = [&](int metric) {
        auto it = std::find(tracked.begin(), tracked.end(), metric);
        if (it != tracked.end()) return static_cast<std::size_t>(it - tracked.begin());
        tracked.push_back(metric);
        return tracked.size() - 1;
    };
    std::vector<Criterion> criteria{{0, r.objective.direction}};
    struct Check {
        std::size_t slot;
        Constraint c;
        bool prunable;
    };
    std::vector<Check> checks;
    for (const auto& c : r.constraints) {
        const std::size_t slot = slot_of(c.metric);
        const Direction pref = c.sense == Sense::at_most ? Direction::minimize : Direction::maximize;
        criteria.push_back({slot, pref});
        const bool prunable =
            extension_never_improves(specs[static_cast<std::size_t>(c.metric)].kind, pref, value_range(g, c.metric));
        checks.push_back({slot, c, prunable});
    }
    const bool objective_bound =
        extension_never_improves(objective_kind, r.objective.direction, objective_range);

    const std::size_t words = (g.node_count() + 63) / 64;
    auto mark = [](Bits& b, NodeId n) { b[n.index() / 64] |= std::uint64_t{1} << (n.index() % 64); };
    auto marked = [](const Bits& b, NodeId n) { return (b[n.index() / 64] >> (n.index() % 64)) & 1U; };

    std::vector<Label> labels;
    std::vector<std::vector<std::size_t>> at_node(g.node_count());
    std::deque<std::size_t> queue;

    Label root;
    root.node = s;
    for (int m : tracked) {
        root.acc.emplace_back(specs[static_cast<std::size_t>(m)].kind);
        root.acc.back().add_node(g.node(s).metric_values[static_cast<std::size_t>(m)]);
    }
    root.visited.assign(words, 0);
    mark(root.visited, s);
    root.seq.push_back(s);

    std::optional<Label> best;
    auto feasible = [&](const Label& l) {
        for (const auto& ch : checks) {
            if (!ch.c.satisfied_by(l.acc[ch.slot].value())) return false;
        }
        return true;
    };
    auto offer_final = [&](Label&& l) {
        if (!feasible(l)) return;
        if (best) {
            const double a = l.acc[0].value();
            const double b = best->acc[0].value();
            if (better(r.objective.direction, b, a)) return;
            if (a == b && !lex_less(l.seq, best->seq)) return;
        }
        best = std::move(l);
    };
    auto hopeless = [&](const Label& l) {
        for (const auto& ch : checks) {
            if (ch.prunable && !ch.c.satisfied_by(l.acc[ch.slot].value())) return true;
        }
        return objective_bound && best && better(r.objective.direction, best->acc[0].value(), l.acc[0].value());
    };

    if (s == t) {
        offer_final(std::move(root));
    } else {
        labels.push_back(std::move(root));
        at_node[s.index()].push_back(0);
        queue.push_back(0);
    }

    while (!queue.empty()) {
        const std::size_t li = queue.front();
        queue.pop_front();
        if (!labels[li].alive) continue;
        if (hopeless(labels[li])) continue;
        for (LinkId lid : g.out_links(labels[li].node)) {
            const RoadLink& link = g.link(lid);
            if (marked(labels[li].visited, link.to)) continue;
            Label next;
            next.node = link.to;
            next.acc = labels[li].acc;
            for (std::size_t i = 0; i < tracked.size(); ++i) {
                const auto k = static_cast<std::size_t>(tracked[i]);
                next.acc[i].add_edge(link.metric_values[k]);
                next.acc[i].add_node(g.node(link.to).metric_values[k]);
            }
            next.visited = labels[li].visited;
            mark(next.visited, link.to);
            next.seq = labels[li].seq;
            next.seq.push_back(link.to);
            next.links = labels[li].links;
            next.links.push_back(lid);
            if (hopeless(next)) continue;
            if (link.to == t) {
                offer_final(std::move(next));
                continue;
            }
            auto& bucket = at_node[link.to.index()];
            bool dominated = false;
            for (std::size_t e : bucket) {
                if (labels[e].alive && dominates(labels[e], next, criteria)) {
                    dominated = true;
                    break;
                }
            }
            if (dominated) continue;
            for (std::size_t e : bucket) {
                if (labels[e].alive && dominates(next, labels[e], criteria)) labels[e].alive = false;
            }
            std::erase_if(bucket, [&](std::size_t e) { return !labels[e].alive; });
            labels.push_back(std::move(next));
            bucket.push_back(labels.size() - 1);
            queue.push_back(labels.size() - 1);
        }
    }

    if (!best) throw Infeasible("no path satisfies the constraints");
    return make_path(g, s, best->links);
}

}  // namespace

Path constrained_route(const RoadGraph& g, const RouteRequest& request) {
    check_request(g, request);
    if (!request.horizon) return solve_constrained(g, request);

    std::vector<NodeId> node_map;
    std::vector<LinkId> link_map;
    RoadGraph sub = build_topology_snapshot(g, request.source, *request.horizon, &node_map, &link_map);
    auto local = [&](NodeId n) -> NodeId {
        auto it = std::find(node_map.begin(), node_map.end(), n);
        if (it == node_map.end()) return NodeId{};
        return NodeId{static_cast<std::int32_t>(it - node_map.begin())};
    };
    RouteRequest sub_req = request;
    sub_req.horizon.reset();
    sub_req.source = local(request.source);
    sub_req.destination = local(request.destination);
    if (!sub_req.destination.valid()) throw NoRoute("destination outside the routing horizon");
    Path p = solve_constrained(sub, sub_req);
    std::vector<LinkId> links;
    for (LinkId l : p.links) links.push_back(link_map[l.index()]);
    return make_path(g, request.source, links);
}

Path best_effort_route(const RoadGraph& g, const RouteRequest& r) {
    check_request(g, r);
    if (!r.constraints.empty()) throw PreconditionError("best-effort routing takes no constraints");
    const MetricSpec& spec = g.metric_specs()[static_cast<std::size_t>(r.objective.metric)];
    const ValueRange range = value_range(g, r.objective.metric);
    const auto k = static_cast<std::size_t>(r.objective.metric);

    // Element cost for the shortest-path search.
    bool use_log = false;
    if (spec.kind == MetricKind::additive && r.objective.direction == Direction::minimize) {
        if (range.lo < 0.0) throw PreconditionError("negative metric values");
    } else if (spec.kind == MetricKind::multiplicative && r.objective.direction == Direction::maximize) {
        if (range.lo <= 0.0 || range.hi > 1.0)
            throw PreconditionError("multiplicative objective requires element values in (0,1]");
        use_log = true;
    } else {
        throw PreconditionError("best-effort routing needs a minimized additive objective");
    }
    auto cost = [&](double v) { return use_log ? -std::log(v) : v; };

    struct Entry {
        double node_part;
        double edge_part;
        std::vector<NodeId> seq;
        std::vector<LinkId> links;
        [[nodiscard]] double total() const { return node_part + edge_part; }
    };
    auto key_less = [](const Entry& a, const Entry& b) {
        if (a.total() != b.total()) return a.total() < b.total();
        return lex_less(a.seq, b.seq);
    };

    std::vector<std::optional<Entry>> best(g.node_count());
    std::vector<bool> done(g.node_count(), false);
    auto cmp = [&](const Entry& a, const Entry& b) { return key_less(b, a); };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);

    Entry start{cost(g.node(r.source).metric_values[k]), 0.0, {r.source}, {}};
    best[r.source.index()] = start;
    heap.push(start);
    while (!heap.empty()) {
        Entry e = heap.top();
        heap.pop();
        const NodeId v = e.seq.back();
        if (done[v.index()]) continue;
        if (best[v.index()] && key_less(*best[v.index()], e)) continue;
        done[v.index()] = true;
        if (v == r.destination) break;
        for (LinkId lid : g.out_links(v)) {
            const RoadLink& l = g.link(lid);
            if (done[l.to.index()]) continue;
            Entry next{e.node_part + cost(g.node(l.to).metric_values[k]), e.edge_part + cost(l.metric_values[k]),
                       e.seq, e.links};
            next.seq.push_back(l.to);
            next.links.push_back(lid);
            auto& cur = best[l.to.index()];
            if (!cur || key_less(next, *cur)) {
                cur = next;
                heap.push(std::move(next));
            }
        }
    }
    const auto& found = best[r.destination.index()];
    if (!found || !done[r.destination.index()])
        throw NoRoute("no route from node " + std::to_string(r.source.value) + " to node " +
                      std::to_string(r.destination.value));
    return make_path(g, r.source, found->links);
}

RoadGraph build_topology_snapshot(const RoadGraph& g, NodeId center, int horizon, std::vector<NodeId>* node_map,
                                  std::vector<LinkId>* link_map) {
    (void)g.node(center);
    if (horizon < 0) throw PreconditionError("horizon must be nonnegative");
    std::vector<int> hops(g.node_count(), -1);
    std::deque<NodeId> frontier{center};
    hops[center.index()] = 0;
    std::set<NodeId> keep{center};
    while (!frontier.empty()) {
        NodeId v = frontier.front();
        frontier.pop_front();
        if (hops[v.index()] == horizon) continue;
        auto visit = [&](NodeId w) {
            if (hops[w.index()] >= 0) return;
            hops[w.index()] = hops[v.index()] + 1;
            keep.insert(w);
            frontier.push_back(w);
        };
        for (LinkId l : g.out_links(v)) visit(g.link(l).to);
        for (LinkId l : g.in_links(v)) visit(g.link(l).from);
    }
    return induced_subgraph(g, keep, node_map, link_map);
}

std::vector<RouteTableEntry> routing_table(const RoadGraph& g, NodeId node, Objective objective) {
    std::vector<RouteTableEntry> rows;
    for (const auto& n : g.nodes()) {
        if (n.id == node) continue;
        try {
            Path p = best_effort_route(g, RouteRequest{node, n.id, objective, {}, std::nullopt});
            rows.push_back({node, n.id, p.links.front(), p.values});
        } catch (const NoRoute&) {
        }
    }
    return rows;
}

}  // namespace tisim
