#include "tisim/fabric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "tisim/error.hpp"

namespace tisim {

namespace {

constexpr double two_pi = 2 * std::numbers::pi;

double wrap(double a) {
    a = std::fmod(a, two_pi);
    return a < 0 ? a + two_pi : a;
}

// One road meeting the junction: the approach (in) and exit (out) halves.
struct Arm {
    double angle = 0;
    LinkId in_link;
    int in_lanes = 0;
    LinkId out_link;
    int out_lanes = 0;
};

Movement classify(double in_angle, double out_angle) {
    const double d = wrap(out_angle - in_angle) * 180.0 / std::numbers::pi;
    if (d < 1e-6 || d > 360 - 1e-6) return Movement::u_turn;
    if (d < 135) return Movement::right;
    if (d <= 225) return Movement::through;
    return Movement::left;
}

// Chord (a1,a2) and chord (b1,b2) on a circle intersect iff exactly one of b's
// endpoints lies on the open arc a1 -> a2.
bool interleaved(double a1, double a2, double b1, double b2) {
    const double span = wrap(a2 - a1);
    auto inside = [&](double x) {
        const double d = wrap(x - a1);
        return d > 0 && d < span;
    };
    return inside(b1) != inside(b2);
}

SwitchFabric assemble(std::vector<Arm> arms, std::size_t metric_count, bool allow_u_turn) {
    std::sort(arms.begin(), arms.end(), [](const Arm& a, const Arm& b) { return a.angle < b.angle; });
    double min_gap = two_pi;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        const double next = i + 1 < arms.size() ? arms[i + 1].angle : arms[0].angle + two_pi;
        if (arms.size() > 1) min_gap = std::min(min_gap, next - arms[i].angle);
    }
    if (min_gap < 1e-9) throw UnsupportedGeometry("two arms share a direction");
    int widest = 1;
    for (const auto& a : arms) widest = std::max({widest, a.in_lanes, a.out_lanes});
    const double step = std::min(min_gap, std::numbers::pi) / (4.0 * (widest + 1));

    SwitchFabric f;
    std::vector<std::vector<PortId>> in_ports(arms.size()), out_ports(arms.size());
    auto add_port = [&](PortDirection dir, const Arm& arm, int arm_index, int lane) {
        Port p;
        p.id = PortId{static_cast<int>(f.ports.size())};
        p.direction = dir;
        p.lane = {dir == PortDirection::input ? arm.in_link : arm.out_link, lane};
        p.arm = arm_index;
        p.angle = wrap(arm.angle + (dir == PortDirection::input ? 1 : -1) * (lane + 1) * step);
        p.metric_values.assign(metric_count, 0.0);
        f.ports.push_back(p);
        return p.id;
    };
    for (std::size_t a = 0; a < arms.size(); ++a) {
        for (int lane = 0; lane < arms[a].in_lanes; ++lane)
            in_ports[a].push_back(add_port(PortDirection::input, arms[a], static_cast<int>(a), lane));
    }
    for (std::size_t a = 0; a < arms.size(); ++a) {
        for (int lane = 0; lane < arms[a].out_lanes; ++lane)
            out_ports[a].push_back(add_port(PortDirection::output, arms[a], static_cast<int>(a), lane));
    }

    for (std::size_t a = 0; a < arms.size(); ++a) {
        const int lanes = arms[a].in_lanes;
        for (int lane = 0; lane < lanes; ++lane) {
            for (std::size_t b = 0; b < arms.size(); ++b) {
                if (arms[b].out_lanes == 0) continue;
                const Movement m = a == b ? Movement::u_turn : classify(arms[a].angle, arms[b].angle);
                if (m == Movement::u_turn && !allow_u_turn) continue;
                // Inner lane turns left (or back), outer lane turns right, every lane goes straight.
                // A dead end turns every lane around onto its mirror lane.
                int out_lane = 0;
                const bool dead_end = arms.size() == 1;
                switch (m) {
                    case Movement::u_turn:
                        if (dead_end) {
                            out_lane = std::min(lane, arms[b].out_lanes - 1);
                            break;
                        }
                        [[fallthrough]];
                    case Movement::left:
                        if (lane != 0) continue;
                        out_lane = 0;
                        break;
                    case Movement::right:
                        if (lane != lanes - 1) continue;
                        out_lane = arms[b].out_lanes - 1;
                        break;
                    case Movement::through:
                        out_lane = std::min(lane, arms[b].out_lanes - 1);
                        break;
                }
                Connection c;
                c.id = ConnectionId{static_cast<int>(f.connections.size())};
                c.in_port = in_ports[a][static_cast<std::size_t>(lane)];
                c.out_port = out_ports[b][static_cast<std::size_t>(out_lane)];
                c.movement = m;
                c.metric_values.assign(metric_count, 0.0);
                f.connections.push_back(c);
            }
        }
    }
    compute_conflicts(f);
    return f;
}

}  // namespace

std::string_view to_string(Movement m) {
    switch (m) {
        case Movement::through: return "through";
        case Movement::left: return "left";
        case Movement::right: return "right";
        case Movement::u_turn: return "u_turn";
    }
    return "?";
}

std::string_view to_string(ConflictKind k) {
    switch (k) {
        case ConflictKind::none: return "none";
        case ConflictKind::cross: return "cross";
        case ConflictKind::merge: return "merge";
        case ConflictKind::diverge: return "diverge";
    }
    return "?";
}

void ConflictMatrix::set(ConnectionId a, ConnectionId b, ConflictKind k) {
    kinds_[a.index() * n_ + b.index()] = k;
    kinds_[b.index() * n_ + a.index()] = k;
}

std::optional<ConnectionId> SwitchFabric::find_connection(PortId in, PortId out) const {
    for (const auto& c : connections) {
        if (c.in_port == in && c.out_port == out) return c.id;
    }
    return std::nullopt;
}

std::vector<PortId> SwitchFabric::input_ports() const {
    std::vector<PortId> out;
    for (const auto& p : ports) {
        if (p.direction == PortDirection::input) out.push_back(p.id);
    }
    return out;
}

bool SwitchFabric::compatible(ConnectionId a, ConnectionId b) const {
    if (a == b) return true;
    const ConflictKind k = conflicts.kind(a, b);
    if (k == ConflictKind::none) return true;
    if (k != ConflictKind::diverge || !permissive_right) return false;
    const Movement ma = connection(a).movement, mb = connection(b).movement;
    return (ma == Movement::right && mb == Movement::through) || (ma == Movement::through && mb == Movement::right);
}

bool SwitchFabric::phase_safe(const std::vector<ConnectionId>& set) const {
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = i + 1; j < set.size(); ++j) {
            if (set[i] == set[j] || !compatible(set[i], set[j])) return false;
        }
    }
    return true;
}

bool SwitchFabric::grant_safe(const std::vector<ConnectionId>& set) const {
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = i + 1; j < set.size(); ++j) {
            if (exclusive(set[i], set[j])) return false;
        }
    }
    return true;
}

std::size_t SwitchFabric::queued() const {
    std::size_t n = 0;
    for (const auto& p : ports) n += p.queue.size();
    return n;
}

void compute_conflicts(SwitchFabric& f) {
    std::set<std::pair<PortId, PortId>> pairs;
    for (std::size_t i = 0; i < f.connections.size(); ++i) {
        const auto& c = f.connections[i];
        if (c.id != ConnectionId{static_cast<int>(i)}) throw ValidationError("connection ids must be dense");
        if (!c.in_port.valid() || c.in_port.index() >= f.ports.size() || !c.out_port.valid() ||
            c.out_port.index() >= f.ports.size())
            throw ValidationError("connection " + std::to_string(c.id.value) + " references an unknown port");
        if (f.port(c.in_port).direction != PortDirection::input || f.port(c.out_port).direction != PortDirection::output)
            throw ValidationError("connection " + std::to_string(c.id.value) + " must run input -> output");
        if (!pairs.insert({c.in_port, c.out_port}).second)
            throw ValidationError("duplicate connection between ports " + std::to_string(c.in_port.value) + " and " +
                                  std::to_string(c.out_port.value));
    }
    f.conflicts = ConflictMatrix(f.connections.size());
    for (const auto& a : f.connections) {
        for (const auto& b : f.connections) {
            if (b.id <= a.id) continue;
            ConflictKind k = ConflictKind::none;
            if (a.in_port == b.in_port) {
                k = ConflictKind::diverge;
            } else if (a.out_port == b.out_port) {
                k = ConflictKind::merge;
            } else if (interleaved(f.port(a.in_port).angle, f.port(a.out_port).angle, f.port(b.in_port).angle,
                                   f.port(b.out_port).angle)) {
                k = ConflictKind::cross;
            }
            f.conflicts.set(a.id, b.id, k);
        }
    }
}

SwitchFabric build_standard_fabric(int arms, int lanes_per_direction) {
    if (arms != 3 && arms != 4) throw UnsupportedGeometry("standard fabrics have 3 or 4 arms");
    if (lanes_per_direction < 1) throw UnsupportedGeometry("lanes_per_direction must be at least 1");
    // East, north, west, south; each arm's approach and exit get synthetic link ids.
    std::vector<Arm> list;
    for (int j = 0; j < arms; ++j) {
        list.push_back({j * std::numbers::pi / 2, LinkId{2 * j}, lanes_per_direction, LinkId{2 * j + 1},
                        lanes_per_direction});
    }
    return assemble(std::move(list), 0, false);
}

SwitchFabric build_node_fabric(const RoadGraph& g, NodeId node) {
    const RoadNode& n = g.node(node);
    std::map<NodeId, Arm> by_neighbor;
    auto arm_for = [&](NodeId other) -> Arm& {
        auto [it, fresh] = by_neighbor.try_emplace(other);
        if (fresh) {
            const Position& q = g.node(other).position;
            const double dx = q.x - n.position.x, dy = q.y - n.position.y;
            if (dx == 0 && dy == 0)
                throw UnsupportedGeometry("node " + n.name + " shares its position with neighbor " + g.node(other).name);
            it->second.angle = wrap(std::atan2(dy, dx));
        }
        return it->second;
    };
    for (LinkId l : g.in_links(node)) {
        Arm& a = arm_for(g.link(l).from);
        if (a.in_link.valid()) throw UnsupportedGeometry("parallel approaches into " + n.name);
        a.in_link = l;
        a.in_lanes = g.link(l).lane_count;
    }
    for (LinkId l : g.out_links(node)) {
        Arm& a = arm_for(g.link(l).to);
        if (a.out_link.valid()) throw UnsupportedGeometry("parallel exits from " + n.name);
        a.out_link = l;
        a.out_lanes = g.link(l).lane_count;
    }
    std::vector<Arm> arms;
    for (auto& [_, a] : by_neighbor) arms.push_back(a);
    // A dead end keeps traffic moving by turning it around.
    SwitchFabric f = assemble(std::move(arms), g.metric_count(), by_neighbor.size() == 1);
    f.node = node;
    f.metrics.assign(g.metric_specs().begin(), g.metric_specs().end());
    return f;
}

std::vector<std::vector<ConnectionId>> conflict_free_sets(const SwitchFabric& fabric) {
    const std::size_t n = fabric.connections.size();
    std::vector<std::vector<ConnectionId>> out;
    if (n == 0) return out;
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            adj[i][j] = i != j && fabric.compatible(ConnectionId{static_cast<int>(i)}, ConnectionId{static_cast<int>(j)});
        }
    }
    // Bron-Kerbosch with pivoting on the compatibility graph.
    std::vector<int> r;
    auto bk = [&](auto&& self, std::vector<int> p, std::vector<int> x) -> void {
        if (p.empty() && x.empty()) {
            std::vector<ConnectionId> set;
            for (int v : r) set.push_back(ConnectionId{v});
            std::sort(set.begin(), set.end());
            out.push_back(std::move(set));
            return;
        }
        int pivot = -1;
        std::size_t best = 0;
        for (const auto* pool : {&p, &x}) {
            for (int u : *pool) {
                std::size_t deg = 0;
                for (int v : p) deg += adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] ? 1 : 0;
                if (pivot < 0 || deg > best) {
                    pivot = u;
                    best = deg;
                }
            }
        }
        std::vector<int> candidates;
        for (int v : p) {
            if (!adj[static_cast<std::size_t>(pivot)][static_cast<std::size_t>(v)]) candidates.push_back(v);
        }
        for (int v : candidates) {
            std::vector<int> np, nx;
            for (int u : p) {
                if (adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)]) np.push_back(u);
            }
            for (int u : x) {
                if (adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)]) nx.push_back(u);
            }
            r.push_back(v);
            self(self, std::move(np), std::move(nx));
            r.pop_back();
            p.erase(std::find(p.begin(), p.end(), v));
            x.push_back(v);
        }
    };
    std::vector<int> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
    bk(bk, all, {});
    std::sort(out.begin(), out.end());
    return out;
}

void enqueue(SwitchFabric& fabric, VehicleId vehicle, ConnectionId connection) {
    if (!connection.valid() || connection.index() >= fabric.connections.size())
        throw NoConnection("unknown connection " + std::to_string(connection.value));
    fabric.port(fabric.connection(connection).in_port).queue.push_back({vehicle, connection});
}

std::vector<Request> serve(SwitchFabric& fabric, const std::vector<ConnectionId>& grants) {
    if (!fabric.grant_safe(grants)) throw PreconditionError("grant set is not conflict-free");
    for (ConnectionId c : grants) {
        const auto& q = fabric.port(fabric.connection(c).in_port).queue;
        if (q.empty() || q.front().connection != c)
            throw PreconditionError("connection " + std::to_string(c.value) + " has no head-of-line request");
    }
    std::vector<Request> served;
    for (ConnectionId c : grants) {
        auto& q = fabric.port(fabric.connection(c).in_port).queue;
        served.push_back(q.front());
        q.pop_front();
    }
    return served;
}

std::vector<ConnectionId> head_of_line(const SwitchFabric& fabric) {
    std::vector<ConnectionId> out;
    for (const auto& p : fabric.ports) {
        if (p.direction == PortDirection::input && !p.queue.empty()) out.push_back(p.queue.front().connection);
    }
    return out;
}

namespace {

bool fits(const SwitchFabric& f, const std::vector<ConnectionId>& granted, ConnectionId c) {
    return std::none_of(granted.begin(), granted.end(), [&](ConnectionId g) { return f.exclusive(g, c); });
}

}  // namespace

std::vector<ConnectionId> match_round_robin(const SwitchFabric& fabric, std::uint64_t tick) {
    const auto inputs = fabric.input_ports();
    std::vector<ConnectionId> granted;
    if (inputs.empty()) return granted;
    const std::size_t start = static_cast<std::size_t>(tick % inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Port& p = fabric.port(inputs[(start + i) % inputs.size()]);
        if (p.queue.empty()) continue;
        const ConnectionId c = p.queue.front().connection;
        if (fits(fabric, granted, c)) granted.push_back(c);
    }
    return granted;
}

std::vector<ConnectionId> match_longest_queue_first(const SwitchFabric& fabric) {
    std::vector<std::pair<std::size_t, ConnectionId>> demand;
    for (const auto& p : fabric.ports) {
        if (p.direction == PortDirection::input && !p.queue.empty())
            demand.emplace_back(p.queue.size(), p.queue.front().connection);
    }
    std::sort(demand.begin(), demand.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<ConnectionId> granted;
    for (const auto& [_, c] : demand) {
        if (fits(fabric, granted, c)) granted.push_back(c);
    }
    return granted;
}

std::vector<ConnectionId> match_max_weight(const SwitchFabric& fabric, const std::map<ConnectionId, double>& weights) {
    std::vector<std::pair<ConnectionId, double>> cand;
    for (const auto& [c, w] : weights) {
        if (!c.valid() || c.index() >= fabric.connections.size())
            throw NoConnection("unknown connection " + std::to_string(c.value));
        if (w < 0 || std::isnan(w)) throw PreconditionError("weights must be nonnegative");
        if (w > 0) cand.emplace_back(c, w);
    }
    if (cand.size() > 24) throw TooLarge("exact matching is limited to 24 weighted connections");
    const std::size_t n = cand.size();
    std::vector<double> rest(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) rest[i] = rest[i + 1] + cand[i].second;

    std::vector<ConnectionId> cur, best;
    double best_w = 0;
    auto dfs = [&](auto&& self, std::size_t i, double w) -> void {
        if (w + rest[i] < best_w) return;
        if (i == n) {
            if (w > best_w || (w == best_w && std::lexicographical_compare(cur.begin(), cur.end(), best.begin(), best.end()))) {
                best_w = w;
                best = cur;
            }
            return;
        }
        if (fits(fabric, cur, cand[i].first)) {
            cur.push_back(cand[i].first);
            self(self, i + 1, w + cand[i].second);
            cur.pop_back();
        }
        self(self, i + 1, w);
    };
    dfs(dfs, 0, 0.0);
    return best;
}

double fabric_route_value(const SwitchFabric& fabric, PortId in, PortId out, int k) {
    const auto c = fabric.find_connection(in, out);
    if (!c) throw NoConnection("no connection from port " + std::to_string(in.value) + " to " + std::to_string(out.value));
    if (k < 0 || static_cast<std::size_t>(k) >= fabric.metrics.size())
        throw PreconditionError("metric index out of range");
    const auto idx = static_cast<std::size_t>(k);
    const double nodes[] = {fabric.port(in).metric_values.at(idx), fabric.port(out).metric_values.at(idx)};
    const double edges[] = {fabric.connection(*c).metric_values.at(idx)};
    return aggregate_path(fabric.metrics[idx].kind, nodes, edges);
}

std::string conflict_matrix_text(const SwitchFabric& fabric) {
    std::ostringstream os;
    const std::size_t n = fabric.connections.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) os << ' ';
            os << static_cast<int>(fabric.conflicts.kind(ConnectionId{static_cast<int>(i)}, ConnectionId{static_cast<int>(j)}));
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace tisim
