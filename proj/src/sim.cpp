#include "tisim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "tisim/error.hpp"

namespace tisim {

namespace {

constexpr int empty_cell = -1;

bool driverless(VehicleClass c) { return c == VehicleClass::driverless_connected; }

}  // namespace

Simulation::Simulation(const Scenario& scenario, double av_fraction, std::uint64_t seed) {
    init_common(scenario, seed);
    if (!(av_fraction >= 0 && av_fraction <= 1)) throw ValidationError("av_fraction must lie in [0, 1]");
    const int n = scenario.demand.vehicles;
    std::vector<std::tuple<LinkId, int, int>> slots;
    for (const auto& l : scenario_.graph.links()) {
        const auto& ll = lanes_[l.id.index()];
        for (int lane = 0; lane < l.lane_count; ++lane) {
            for (int c = 0; c < ll.cells; ++c) slots.emplace_back(l.id, lane, c);
        }
    }
    if (static_cast<std::size_t>(n) > slots.size())
        throw Overcrowded(std::to_string(n) + " vehicles for " + std::to_string(slots.size()) + " cells");
    // Partial Fisher-Yates: the first n slots are a uniform random sample.
    for (int i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), slots.size() - 1);
        std::swap(slots[static_cast<std::size_t>(i)], slots[pick(rng_)]);
    }
    std::sort(slots.begin(), slots.begin() + n);
    std::vector<bool> is_av(static_cast<std::size_t>(n), false);
    const auto avs = static_cast<std::size_t>(std::llround(av_fraction * n));
    for (std::size_t i = 0; i < avs; ++i) is_av[i] = true;
    std::shuffle(is_av.begin(), is_av.end(), rng_);
    std::bernoulli_distribution connected(cfg_.connected_fraction);
    for (int i = 0; i < n; ++i) {
        const auto& [link, lane, cell] = slots[static_cast<std::size_t>(i)];
        SimVehicle v;
        v.id = VehicleId{i};
        v.link = link;
        v.lane = lane;
        v.cell = cell;
        if (is_av[static_cast<std::size_t>(i)]) {
            v.vehicle_class = VehicleClass::driverless_connected;
        } else {
            v.vehicle_class = connected(rng_) ? VehicleClass::human_connected : VehicleClass::human;
        }
        vehicles_.push_back(std::move(v));
    }
    for (auto& v : vehicles_) assign_trip(v);
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
        const auto& v = vehicles_[i];
        lanes_[v.link.index()].occupancy[static_cast<std::size_t>(v.lane)][static_cast<std::size_t>(v.cell)] =
            static_cast<int>(i);
    }
    counters_.injected = vehicles_.size();
}

Simulation::Simulation(const Scenario& scenario, const std::vector<Placement>& placements, std::uint64_t seed) {
    init_common(scenario, seed);
    for (const auto& p : placements) {
        if (!scenario_.graph.has_link(p.link)) throw ValidationError("placement on unknown link");
        auto& ll = lanes_[p.link.index()];
        if (p.lane < 0 || p.lane >= static_cast<int>(ll.occupancy.size()) || p.cell < 0 || p.cell >= ll.cells)
            throw ValidationError("placement outside the lattice");
        auto& slot = ll.occupancy[static_cast<std::size_t>(p.lane)][static_cast<std::size_t>(p.cell)];
        if (slot != empty_cell) throw Overcrowded("two placements share a cell");
        SimVehicle v;
        v.id = VehicleId{static_cast<int>(vehicles_.size())};
        v.vehicle_class = p.vehicle_class;
        v.link = p.link;
        v.lane = p.lane;
        v.cell = p.cell;
        v.speed = p.speed;
        slot = static_cast<int>(vehicles_.size());
        vehicles_.push_back(std::move(v));
    }
    for (auto& v : vehicles_) assign_trip(v);
    counters_.injected = vehicles_.size();
}

void Simulation::init_common(const Scenario& scenario, std::uint64_t seed) {
    scenario_ = scenario;
    cfg_ = scenario.sim;
    cfg_.seed = seed;
    cfg_.validate();
    rng_.seed(seed);
    const double cell_kmh = cfg_.cell_length / cfg_.tick * 3.6;
    for (const auto& l : scenario_.graph.links()) {
        LinkLanes ll;
        ll.cells = std::max(1, static_cast<int>(std::floor(l.length / cfg_.cell_length)));
        ll.vmax = std::max(1, static_cast<int>(std::lround(l.speed_limit / cell_kmh)));
        ll.occupancy.assign(static_cast<std::size_t>(l.lane_count),
                            std::vector<int>(static_cast<std::size_t>(ll.cells), empty_cell));
        lanes_.push_back(std::move(ll));
    }
    successors_.assign(scenario_.graph.link_count(), {});
    for (const auto& [node, fabric] : scenario_.fabrics) {
        NodeState ns;
        ns.fabric = fabric;
        for (const auto& c : fabric.connections) {
            const auto& in = fabric.port(c.in_port).lane;
            const auto& out = fabric.port(c.out_port).lane;
            ns.moves[{in.link, in.lane, out.link}] = c.id;
            auto& succ = successors_[in.link.index()];
            if (std::find(succ.begin(), succ.end(), out.link) == succ.end()) succ.push_back(out.link);
        }
        if (auto it = scenario_.signals.find(node); it != scenario_.signals.end()) {
            ns.base = it->second;
            ns.active = it->second;
        }
        nodes_.emplace(node, std::move(ns));
    }
    for (auto& s : successors_) std::sort(s.begin(), s.end());
    for (const auto& n : scenario_.graph.nodes()) {
        if (n.is_terminal()) terminals_.push_back(n.id);
    }
    if (terminals_.empty() && scenario.demand.vehicles > 0)
        throw ValidationError("scenario has no terminal node to drive to");
}

// Cheapest drivable link sequence after `start` whose last link enters
// `dest`, following only movements the fabrics offer. Ties go to the
// smaller link id at each settled step.
std::optional<std::pair<double, std::vector<LinkId>>> Simulation::drive_route(
    LinkId start, NodeId dest, const std::vector<double>& link_cost) const {
    const std::size_t n = scenario_.graph.link_count();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> prev(n, -1);
    std::vector<bool> done(n, false);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[start.index()] = 0;
    pq.emplace(0.0, start.value);
    while (!pq.empty()) {
        const auto [d, li] = pq.top();
        pq.pop();
        const auto l = static_cast<std::size_t>(li);
        if (done[l]) continue;
        done[l] = true;
        if (li != start.value && scenario_.graph.links()[l].to == dest) {
            std::vector<LinkId> path;
            for (int x = li; x != start.value; x = prev[static_cast<std::size_t>(x)]) path.push_back(LinkId{x});
            std::reverse(path.begin(), path.end());
            return std::make_pair(d, std::move(path));
        }
        for (LinkId m : successors_[l]) {
            const double nd = d + link_cost[m.index()];
            if (nd < dist[m.index()]) {
                dist[m.index()] = nd;
                prev[m.index()] = li;
                pq.emplace(nd, m.value);
            }
        }
    }
    return std::nullopt;
}

const std::vector<double>& Simulation::distance_costs() {
    if (distance_cost_.empty()) {
        for (const auto& l : scenario_.graph.links()) distance_cost_.push_back(l.length);
    }
    return distance_cost_;
}

std::optional<std::vector<LinkId>> Simulation::static_route(LinkId from, NodeId to) {
    if (scenario_.graph.link(from).to == to) return std::vector<LinkId>{};
    auto key = std::make_pair(from, to);
    if (auto it = route_cache_.find(key); it != route_cache_.end()) return it->second;
    auto r = drive_route(from, to, distance_costs());
    std::optional<std::vector<LinkId>> out;
    if (r) out = std::move(r->second);
    route_cache_.emplace(key, out);
    return out;
}

void Simulation::assign_trip(SimVehicle& v) {
    // Nearest reachable terminal ahead; the trip back goes to another terminal.
    std::optional<std::pair<double, NodeId>> best;
    for (NodeId t : terminals_) {
        double cost = 0;
        if (scenario_.graph.link(v.link).to != t) {
            auto r = drive_route(v.link, t, distance_costs());
            if (!r) continue;
            cost = r->first;
        }
        if (!best || cost < best->first) best = std::make_pair(cost, t);
    }
    if (!best) throw ValidationError("vehicle " + std::to_string(v.id.value) + " cannot reach any terminal");
    v.destination = best->second;
    v.route = *static_route(v.link, v.destination);
    std::vector<NodeId> others;
    for (NodeId t : terminals_) {
        if (t != v.destination) others.push_back(t);
    }
    if (others.empty()) {
        v.origin = v.destination;
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
        v.origin = others[pick(rng_)];
    }
    v.next_trip.clear();
}

void Simulation::plan_next_trip(SimVehicle& v) {
    // Back to the origin when drivable, else to the nearest other terminal,
    // else around a loop to the same one.
    std::vector<NodeId> order{v.origin};
    std::optional<std::pair<double, std::vector<LinkId>>> best;
    for (NodeId t : terminals_) {
        if (t == v.destination || t == v.origin) continue;
        auto r = drive_route(v.link, t, distance_costs());
        if (r && (!best || r->first < best->first)) best = std::move(r);
    }
    if (v.origin != v.destination) {
        if (auto r = drive_route(v.link, v.origin, distance_costs())) best = std::move(r);
    }
    if (!best) best = drive_route(v.link, v.destination, distance_costs());
    if (!best) throw ValidationError("vehicle " + std::to_string(v.id.value) + " has nowhere to go");
    v.next_trip = std::move(best->second);
}

std::optional<LinkId> Simulation::next_link(const SimVehicle& v) const {
    if (!v.route.empty()) return v.route.front();
    if (!v.next_trip.empty()) return v.next_trip.front();
    return std::nullopt;
}

std::optional<ConnectionId> Simulation::movement(const SimVehicle& v) const {
    const auto next = next_link(v);
    if (!next) return std::nullopt;
    auto ns = nodes_.find(scenario_.graph.link(v.link).to);
    if (ns == nodes_.end()) return std::nullopt;
    auto it = ns->second.moves.find({v.link, v.lane, *next});
    if (it == ns->second.moves.end()) return std::nullopt;
    return it->second;
}

bool Simulation::lane_serves(LinkId link, int lane, LinkId next) const {
    auto ns = nodes_.find(scenario_.graph.link(link).to);
    return ns != nodes_.end() && ns->second.moves.contains({link, lane, next});
}

int Simulation::vmax_of(const SimVehicle& v) const {
    int vmax = driverless(v.vehicle_class) ? cfg_.vmax_driverless : cfg_.vmax_human;
    vmax = std::min(vmax, lanes_[v.link.index()].vmax);
    if (v.advisory_cap) vmax = std::min(vmax, *v.advisory_cap);
    return vmax;
}

std::optional<std::size_t> Simulation::occupant(LinkId link, int lane, int cell) const {
    const auto& ll = lanes_.at(link.index());
    if (lane < 0 || lane >= static_cast<int>(ll.occupancy.size()) || cell < 0 || cell >= ll.cells) return std::nullopt;
    const int o = ll.occupancy[static_cast<std::size_t>(lane)][static_cast<std::size_t>(cell)];
    if (o == empty_cell) return std::nullopt;
    return static_cast<std::size_t>(o);
}

const SignalPlan* Simulation::plan(NodeId node) const {
    auto it = nodes_.find(node);
    if (it == nodes_.end() || !it->second.active) return nullptr;
    return &*it->second.active;
}

std::optional<SignalColor> Simulation::head(NodeId node, PhaseId phase) const {
    auto it = nodes_.find(node);
    if (it == nodes_.end()) return std::nullopt;
    auto h = it->second.heads.find(phase);
    if (h == it->second.heads.end()) return std::nullopt;
    return h->second;
}

void Simulation::apply_signals(const std::vector<SignalActuation>& actuations) {
    for (const auto& a : actuations) {
        auto it = nodes_.find(a.intersection);
        if (it == nodes_.end() || !it->second.base)
            throw UnknownSignal("no signal at node " + std::to_string(a.intersection.value));
        if (!it->second.base->phase_index(a.phase))
            throw UnknownSignal("node " + std::to_string(a.intersection.value) + " has no phase " +
                                std::to_string(a.phase.value));
        it->second.heads[a.phase] = a.color;
    }
    for (auto& [_, ns] : nodes_) {
        if (!ns.base) continue;
        ns.grants.clear();
        for (const auto& p : ns.base->phases) {
            auto h = ns.heads.find(p.id);
            if (h == ns.heads.end() || h->second != SignalColor::green) continue;
            // Connection sets come from the plan in force; extensions only retime.
            ns.grants.insert(ns.grants.end(), p.connections.begin(), p.connections.end());
        }
        std::sort(ns.grants.begin(), ns.grants.end());
        ns.grants.erase(std::unique(ns.grants.begin(), ns.grants.end()), ns.grants.end());
    }
}

// Distance in cells to the next vehicle ahead on (link, lane) from `cell`,
// or to the last cell when the lane ahead is clear.
int Simulation::gap_ahead(LinkId link, int lane, int cell, int* leader) const {
    const auto& ll = lanes_[link.index()];
    const auto& occ = ll.occupancy[static_cast<std::size_t>(lane)];
    for (int c = cell + 1; c < ll.cells; ++c) {
        if (occ[static_cast<std::size_t>(c)] != empty_cell) {
            if (leader) *leader = occ[static_cast<std::size_t>(c)];
            return c - cell - 1;
        }
    }
    if (leader) *leader = empty_cell;
    return ll.cells - 1 - cell;
}

void Simulation::run_controllers() {
    const double t = now();
    const auto& g = scenario_.graph;

    if (clock_ % cfg_.central_period == 0) {
        // Central: travel times from current link speeds, re-planned routes
        // for connected vehicles.
        std::vector<double> speed_sum(g.link_count(), 0.0);
        std::vector<int> count(g.link_count(), 0);
        for (const auto& v : vehicles_) {
            speed_sum[v.link.index()] += v.speed;
            count[v.link.index()] += 1;
        }
        std::vector<double> cost(g.link_count());
        for (const auto& l : g.links()) {
            const auto i = l.id.index();
            const double free = lanes_[i].vmax;
            const double v = count[i] ? std::max(speed_sum[i] / count[i], 0.25) : free;
            cost[i] = lanes_[i].cells / v * cfg_.tick;
        }
        dynamic_routes_.clear();
        for (const auto& v : vehicles_) {
            if (!is_connected(v.vehicle_class) || v.route.empty()) continue;
            if (auto r = drive_route(v.link, v.destination, cost)) dynamic_routes_[v.id] = {v.link, std::move(r->second)};
        }
    }

    SignalContext ctx;
    for (auto& [node, ns] : nodes_) {
        if (!ns.base) continue;
        const SignalPlan& base = *ns.base;
        const auto k = static_cast<std::int64_t>(std::floor((t - base.offset) / base.cycle_length));
        if (k != ns.cycle) {
            ns.cycle = k;
            ns.active = base;
        }
        int occupied = 0;
        int total = 0;
        std::vector<ApproachingPlatoon> platoons;
        for (LinkId in : g.in_links(node)) {
            const auto& ll = lanes_[in.index()];
            // Density is taken over the stretch a vehicle covers within the
            // lookahead, the traffic an extension would serve.
            const int zone = std::min(
                ll.cells, static_cast<int>(std::ceil(cfg_.cooperative.lookahead / cfg_.tick * ll.vmax)));
            total += zone * static_cast<int>(ll.occupancy.size());
            for (std::size_t lane = 0; lane < ll.occupancy.size(); ++lane) {
                const auto& occ = ll.occupancy[lane];
                std::optional<ApproachingPlatoon> cur;
                int last_cell = 0;
                auto flush = [&] {
                    if (cur) platoons.push_back(*cur);
                    cur.reset();
                };
                for (int c = ll.cells - 1; c >= 0; --c) {
                    const int o = occ[static_cast<std::size_t>(c)];
                    if (o == empty_cell) continue;
                    if (c >= ll.cells - zone) ++occupied;
                    const auto& v = vehicles_[static_cast<std::size_t>(o)];
                    const auto conn = movement(v);
                    std::optional<PhaseId> phase;
                    if (conn) {
                        for (const auto& p : base.phases) {
                            if (std::binary_search(p.connections.begin(), p.connections.end(), *conn)) {
                                phase = p.id;
                                break;
                            }
                        }
                    }
                    if (!is_connected(v.vehicle_class) || !phase) {
                        flush();
                        continue;
                    }
                    // Tick by which the vehicle has crossed at its expected free speed;
                    // green has to last until then.
                    const double expected =
                        vmax_of(v) - (driverless(v.vehicle_class) ? 0.0 : cfg_.p_slow);
                    const double arrival = t + std::ceil((ll.cells - c) / std::max(expected, 0.5)) * cfg_.tick;
                    if (cur && cur->phase == *phase && last_cell - c - 1 <= cfg_.platoon_gap) {
                        cur->tail_arrival = std::max(cur->tail_arrival, arrival);
                        cur->size += 1;
                    } else {
                        flush();
                        cur = ApproachingPlatoon{*phase, arrival, arrival, 1};
                    }
                    last_cell = c;
                }
                flush();
            }
        }
        const double density = total ? static_cast<double>(occupied) / total : 0.0;
        SignalPlan next = cooperative_signal_control(*ns.active, t, platoons, density, cfg_.cooperative, &base);
        if (next != *ns.active) {
            ++counters_.green_extensions;
            ns.active = std::move(next);
        }
        ctx.plans.emplace(node, *ns.active);
        for (const auto& p : base.phases) {
            for (ConnectionId c : p.connections) {
                ctx.approach_phase.emplace(ns.fabric.port(ns.fabric.connection(c).in_port).lane.link, p.id);
            }
        }
    }

    // Edge: green-wave advisories and route segments for connected vehicles.
    std::vector<VehicleReport> reports;
    std::map<VehicleId, std::vector<LinkId>> routes;
    for (const auto& v : vehicles_) {
        if (!is_connected(v.vehicle_class)) continue;
        reports.push_back({v.id, v.vehicle_class, v.link, v.lane, v.cell, v.speed, 0, 0, clock_});
        auto d = dynamic_routes_.find(v.id);
        routes[v.id] = d != dynamic_routes_.end() && d->second.first == v.link ? d->second.second : v.route;
    }
    VehicleControlParams params;
    params.cell_length = cfg_.cell_length;
    params.min_advisory_kmh = cfg_.min_advisory_kmh;
    params.version = ++version_;
    for (auto& e : vehicle_controller_step(g, reports, routes, ctx, t, params)) {
        tables_[*e.match.vehicle].insert(std::move(e));
    }
}

void Simulation::route_follow_step() {
    const double t = now();
    for (auto& v : vehicles_) {
        v.advisory_cap.reset();
        if (is_connected(v.vehicle_class)) {
            auto tab = tables_.find(v.id);
            if (tab != tables_.end()) {
                tab->second.expire(t);
                MatchKey key;
                key.road = v.link;
                key.lane = v.lane;
                key.time = t;
                key.vehicle = v.id;
                key.vehicle_class = v.vehicle_class;
                if (const auto* seg = tab->second.first<RouteSegment>(key)) {
                    if (seg->next_links != v.route && drivable(v.link, seg->next_links, v.destination))
                        v.route = seg->next_links;
                }
                if (const auto* adv = tab->second.first<SpeedAdvisory>(key)) {
                    v.advisory_cap = advisory_cells(adv->kmh, cfg_.cell_length, cfg_.tick);
                    ++counters_.advisories;
                }
            }
        }
        if (v.route.empty() && v.next_trip.empty()) plan_next_trip(v);
    }

    // A vehicle stuck at the stop line in a lane without its movement takes
    // the best exit its lane offers instead.
    for (auto& v : vehicles_) {
        if (v.cell != cells(v.link) - 1 || movement(v)) continue;
        auto ns = nodes_.find(scenario_.graph.link(v.link).to);
        if (ns == nodes_.end()) continue;
        std::optional<std::pair<double, std::vector<LinkId>>> best;
        const bool last = v.route.empty();
        if (last && v.next_trip.empty()) continue;
        const NodeId goal = last ? scenario_.graph.link(v.next_trip.back()).to : v.destination;
        for (const auto& [key, conn] : ns->second.moves) {
            const auto& [in, lane, out] = key;
            if (in != v.link || lane != v.lane) continue;
            std::optional<std::pair<double, std::vector<LinkId>>> r;
            if (scenario_.graph.link(out).to == goal) {
                r = std::make_pair(0.0, std::vector<LinkId>{});
            } else {
                r = drive_route(out, goal, distance_costs());
            }
            if (!r) continue;
            r->first += scenario_.graph.link(out).length;
            r->second.insert(r->second.begin(), out);
            if (!best || r->first < best->first) best = std::move(r);
        }
        if (!best) continue;
        ++counters_.reroutes;
        (last ? v.next_trip : v.route) = std::move(best->second);
    }
}

bool Simulation::drivable(LinkId from, const std::vector<LinkId>& links, NodeId dest) const {
    if (links.empty()) return scenario_.graph.link(from).to == dest;
    LinkId cur = from;
    for (LinkId l : links) {
        const auto& succ = successors_[cur.index()];
        if (!std::binary_search(succ.begin(), succ.end(), l)) return false;
        cur = l;
    }
    return scenario_.graph.link(cur).to == dest;
}

void Simulation::lane_change_step() {
    std::vector<bool> moved(vehicles_.size(), false);
    for (const auto& l : scenario_.graph.links()) {
        auto& ll = lanes_[l.id.index()];
        const int lanes = static_cast<int>(ll.occupancy.size());
        if (lanes < 2) continue;
        for (int lane = 0; lane < lanes; ++lane) {
            for (int c = ll.cells - 1; c >= 0; --c) {
                const int o = ll.occupancy[static_cast<std::size_t>(lane)][static_cast<std::size_t>(c)];
                if (o == empty_cell || moved[static_cast<std::size_t>(o)]) continue;
                auto& v = vehicles_[static_cast<std::size_t>(o)];
                const auto next = next_link(v);
                const bool wrong_lane = next && !movement(v) && ll.cells > 0;
                auto safe = [&](int target) {
                    if (target < 0 || target >= lanes) return false;
                    if (ll.occupancy[static_cast<std::size_t>(target)][static_cast<std::size_t>(c)] != empty_cell)
                        return false;
                    for (int b = c - 1; b >= 0; --b) {
                        const int f = ll.occupancy[static_cast<std::size_t>(target)][static_cast<std::size_t>(b)];
                        if (f == empty_cell) continue;
                        return c - b - 1 >= vehicles_[static_cast<std::size_t>(f)].speed;
                    }
                    return true;
                };
                int target = -1;
                if (wrong_lane) {
                    int want = -1;
                    for (int k = 0; k < lanes; ++k) {
                        if (lane_serves(v.link, k, *next) && (want < 0 || std::abs(k - lane) < std::abs(want - lane)))
                            want = k;
                    }
                    if (want >= 0) {
                        const int step = want < lane ? lane - 1 : lane + 1;
                        if (safe(step)) target = step;
                    }
                } else if (cfg_.lane_changes && c < ll.cells - cfg_.approach_cells) {
                    const int gap = gap_ahead(v.link, lane, c, nullptr);
                    if (gap < std::min(v.speed + 1, vmax_of(v))) {
                        int best_gap = gap;
                        for (int cand : {lane - 1, lane + 1}) {
                            if (!safe(cand)) continue;
                            if (next && !lane_serves(v.link, cand, *next)) continue;
                            const int g = gap_ahead(v.link, cand, c, nullptr);
                            if (g > best_gap) {
                                best_gap = g;
                                target = cand;
                            }
                        }
                    }
                }
                if (target < 0) continue;
                ll.occupancy[static_cast<std::size_t>(lane)][static_cast<std::size_t>(c)] = empty_cell;
                ll.occupancy[static_cast<std::size_t>(target)][static_cast<std::size_t>(c)] = o;
                v.lane = target;
                moved[static_cast<std::size_t>(o)] = true;
                ++counters_.lane_changes;
            }
        }
    }
}

void Simulation::dispatch_step() {
    const double t = now();
    std::vector<SignalActuation> actuations;
    for (auto& [node, ns] : nodes_) {
        ns.granted_vehicle.clear();
        if (ns.base) {
            DispatchPolicy policy;
            policy.plan = *ns.active;
            auto r = dispatching_engine_step(ns.fabric, policy, t);
            actuations.insert(actuations.end(), r.actuations.begin(), r.actuations.end());
            continue;
        }
        for (auto& p : ns.fabric.ports) p.queue.clear();
        for (const auto& p : ns.fabric.ports) {
            if (p.direction != PortDirection::input) continue;
            if (auto d = ns.last_departure.find(p.id);
                d != ns.last_departure.end() && t - d->second < ns.fabric.service_time)
                continue;
            const auto& ll = lanes_[p.lane.link.index()];
            const auto& occ = ll.occupancy[static_cast<std::size_t>(p.lane.lane)];
            for (int c = ll.cells - 1; c >= std::max(0, ll.cells - cfg_.approach_cells); --c) {
                const int o = occ[static_cast<std::size_t>(c)];
                if (o == empty_cell) continue;
                const auto conn = movement(vehicles_[static_cast<std::size_t>(o)]);
                if (!conn) break;
                enqueue(ns.fabric, vehicles_[static_cast<std::size_t>(o)].id, *conn);
            }
        }
        auto r = dispatching_engine_step(ns.fabric, DispatchPolicy{}, t);
        ns.grants = std::move(r.grants);
        std::sort(ns.grants.begin(), ns.grants.end());
        for (ConnectionId c : ns.grants) {
            const PortId in = ns.fabric.connection(c).in_port;
            ns.granted_vehicle[in] = ns.fabric.port(in).queue.front().vehicle;
        }
    }
    apply_signals(actuations);
}

void Simulation::ca_step() {
    const auto& g = scenario_.graph;
    std::vector<LinkLanes> next = lanes_;
    for (auto& ll : next) {
        for (auto& lane : ll.occupancy) std::fill(lane.begin(), lane.end(), empty_cell);
    }
    std::vector<int> moved(vehicles_.size(), 0);
    crossings_.clear();
    std::bernoulli_distribution dawdle(cfg_.p_slow);

    for (const auto& l : g.links()) {
        const auto& ll = lanes_[l.id.index()];
        auto ns_it = nodes_.find(l.to);
        for (std::size_t lane = 0; lane < ll.occupancy.size(); ++lane) {
            const auto& occ = ll.occupancy[lane];
            int leader = empty_cell;
            int leader_cell = 0;
            for (int c = ll.cells - 1; c >= 0; --c) {
                const int o = occ[static_cast<std::size_t>(c)];
                if (o == empty_cell) continue;
                auto& v = vehicles_[static_cast<std::size_t>(o)];
                const int vmax = vmax_of(v);
                int speed = std::min(v.speed + 1, vmax);

                // Room along the vehicle's own path: to the stop line, and past
                // it into the free head of the target lane when its movement is
                // granted to it now.
                int room = ll.cells - 1 - c;
                ConnectionId via;
                LaneBinding target;
                if (leader == empty_cell && ns_it != nodes_.end()) {
                    const auto conn = movement(v);
                    auto& ns = ns_it->second;
                    bool may_cross = conn && std::binary_search(ns.grants.begin(), ns.grants.end(), *conn);
                    if (may_cross && !ns.base) {
                        auto gv = ns.granted_vehicle.find(ns.fabric.connection(*conn).in_port);
                        may_cross = gv != ns.granted_vehicle.end() && gv->second == v.id;
                    }
                    if (may_cross) {
                        via = *conn;
                        target = ns.fabric.port(ns.fabric.connection(via).out_port).lane;
                        const auto& tl = lanes_[target.link.index()];
                        const auto& tocc = tl.occupancy[static_cast<std::size_t>(target.lane)];
                        int free = 0;
                        while (free < tl.cells && tocc[static_cast<std::size_t>(free)] == empty_cell) ++free;
                        room += free;
                    }
                }
                if (leader != empty_cell) {
                    room = leader_cell - c - 1;
                    const auto& lv = vehicles_[static_cast<std::size_t>(leader)];
                    if (cfg_.platooning && driverless(v.vehicle_class) && driverless(lv.vehicle_class))
                        room += moved[static_cast<std::size_t>(leader)];
                    room = std::min(room, ll.cells - 1 - c);
                }
                speed = std::min(speed, room);
                if (!driverless(v.vehicle_class) && dawdle(rng_)) speed = std::max(speed - 1, 0);

                int dest_cell = c + speed;
                LaneBinding dest{l.id, static_cast<int>(lane)};
                if (dest_cell >= ll.cells) {
                    dest = target;
                    dest_cell -= ll.cells;
                }
                auto& slot = next[dest.link.index()].occupancy[static_cast<std::size_t>(dest.lane)]
                                 [static_cast<std::size_t>(dest_cell)];
                if (slot != empty_cell) {
                    ++counters_.deferrals;
                    speed = 0;
                    dest = {l.id, static_cast<int>(lane)};
                    dest_cell = c;
                }
                auto& placed = next[dest.link.index()].occupancy[static_cast<std::size_t>(dest.lane)]
                                   [static_cast<std::size_t>(dest_cell)];
                if (placed != empty_cell) ++counters_.double_occupancy;
                placed = o;
                moved[static_cast<std::size_t>(o)] = speed;
                v.speed = speed;
                if (dest.link != l.id) {
                    crossings_.push_back({l.to, via, v.id});
                    auto& ns = ns_it->second;
                    if (!ns.base) {
                        const PortId in = ns.fabric.connection(via).in_port;
                        ns.last_departure[in] = now();
                        ns.granted_vehicle.erase(in);
                    }
                    v.link = dest.link;
                    if (v.route.empty()) {
                        ++counters_.arrived;
                        ++counters_.injected;
                        ++v.trips;
                        v.origin = v.destination;
                        v.next_trip.erase(v.next_trip.begin());
                        v.route = std::move(v.next_trip);
                        v.next_trip.clear();
                        v.destination = v.route.empty() ? g.link(v.link).to : g.link(v.route.back()).to;
                        tables_.erase(v.id);
                    } else {
                        v.route.erase(v.route.begin());
                    }
                }
                v.lane = dest.lane;
                v.cell = dest_cell;
                leader = o;
                leader_cell = c;
            }
        }
    }
    lanes_ = std::move(next);
}

void Simulation::audit() {
    std::vector<int> seen(vehicles_.size(), 0);
    for (const auto& ll : lanes_) {
        for (const auto& lane : ll.occupancy) {
            for (int o : lane) {
                if (o != empty_cell) seen[static_cast<std::size_t>(o)] += 1;
            }
        }
    }
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
        const auto& v = vehicles_[i];
        if (seen[i] != 1 || occupant(v.link, v.lane, v.cell) != i) ++counters_.double_occupancy;
        if (v.speed < 0 || v.speed > vmax_of(v)) ++counters_.speed_violations;
    }
    if (counters_.arrived + vehicles_.size() != counters_.injected) ++counters_.conservation_violations;

    // Every crossing must use a connection shown green, or at an unsignalized
    // node be the only departure from its input port this tick.
    std::set<std::pair<NodeId, PortId>> ports;
    for (const auto& x : crossings_) {
        const auto& ns = nodes_.at(x.node);
        if (ns.base) {
            bool green = false;
            for (const auto& p : ns.base->phases) {
                auto h = ns.heads.find(p.id);
                if (h != ns.heads.end() && h->second == SignalColor::green &&
                    std::binary_search(p.connections.begin(), p.connections.end(), x.connection))
                    green = true;
            }
            if (!green) ++counters_.red_crossings;
        } else if (!ports.insert({x.node, ns.fabric.connection(x.connection).in_port}).second) {
            ++counters_.red_crossings;
        }
    }
}

void Simulation::measure() {
    if (clock_ < cfg_.warmup || clock_ >= cfg_.warmup + cfg_.duration) return;
    const double to_kmh = cfg_.cell_length / cfg_.tick * 3.6;
    for (const auto& v : vehicles_) {
        speed_sum_ += v.speed;
        speed_n_ += 1;
        auto& cs = class_sums_[v.vehicle_class];
        cs.first += v.speed;
        cs.second += 1;
    }
    if ((clock_ - cfg_.warmup + 1) % cfg_.measure_interval != 0) return;
    Measurement m;
    m.interval = (clock_ - cfg_.warmup) / cfg_.measure_interval;
    m.vehicle_ticks = speed_n_;
    m.defined = speed_n_ > 0;
    if (m.defined) m.mean_speed_kmh = speed_sum_ / static_cast<double>(speed_n_) * to_kmh;
    for (const auto& [cls, s] : class_sums_) {
        ClassMean cm;
        cm.vehicle_ticks = s.second;
        cm.defined = s.second > 0;
        if (cm.defined) cm.mean_speed_kmh = s.first / static_cast<double>(s.second) * to_kmh;
        m.per_class[cls] = cm;
    }
    measurements_.push_back(std::move(m));
    speed_sum_ = 0;
    speed_n_ = 0;
    class_sums_.clear();
}

void Simulation::step() {
    if (cfg_.controlled) run_controllers();
    route_follow_step();
    lane_change_step();
    dispatch_step();
    ca_step();
    audit();
    measure();
    ++clock_;
}

void Simulation::run() {
    const std::uint64_t end = cfg_.warmup + cfg_.duration;
    while (clock_ < end) step();
}

int advisory_cells(double kmh, double cell_length, double tick) {
    return std::max(1, static_cast<int>(std::floor(kmh / (cell_length / tick * 3.6))));
}

std::optional<double> overall_mean_speed(const std::vector<Measurement>& series) {
    double sum = 0;
    std::uint64_t n = 0;
    for (const auto& m : series) {
        if (!m.defined) continue;
        sum += m.mean_speed_kmh * static_cast<double>(m.vehicle_ticks);
        n += m.vehicle_ticks;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace tisim
