#include "tisim/control.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tisim/error.hpp"

namespace tisim {

std::string_view to_string(VehicleClass c) {
    switch (c) {
        case VehicleClass::human: return "human";
        case VehicleClass::driverless_connected: return "driverless_connected";
        case VehicleClass::human_connected: return "human_connected";
    }
    return "?";
}

std::string_view to_string(SignalColor c) {
    switch (c) {
        case SignalColor::green: return "green";
        case SignalColor::yellow: return "yellow";
        case SignalColor::red: return "red";
    }
    return "?";
}

VehicleClass parse_vehicle_class(std::string_view s) {
    for (auto c : {VehicleClass::human, VehicleClass::driverless_connected, VehicleClass::human_connected}) {
        if (to_string(c) == s) return c;
    }
    throw ParseError("unknown vehicle class '" + std::string(s) + "'");
}

SignalColor parse_signal_color(std::string_view s) {
    for (auto c : {SignalColor::green, SignalColor::yellow, SignalColor::red}) {
        if (to_string(c) == s) return c;
    }
    throw ParseError("unknown signal color '" + std::string(s) + "'");
}

namespace {

// Position of t within a cycle that starts at `start`, in [0, period).
double phase_offset(double t, double start, double period) {
    const double d = std::fmod(t - start, period);
    return d < 0 ? d + period : d;
}

}  // namespace

bool TimeWindow::contains(double t) const {
    if (period) return phase_offset(t, start, *period) < duration;
    return t >= start && t < end();
}

bool entry_before(const FlowTableEntry& a, const FlowTableEntry& b) {
    if (a.priority != b.priority) return a.priority > b.priority;
    if (a.version != b.version) return a.version > b.version;
    return a.id < b.id;
}

void validate_entry(const FlowTableEntry& e) {
    if (!(e.match.window.duration > 0)) throw ValidationError("flow entry " + std::to_string(e.id) + " has an empty window");
    if (e.match.window.period && !(*e.match.window.period > 0))
        throw ValidationError("flow entry " + std::to_string(e.id) + " has a nonpositive period");
}

void FlowTable::insert(FlowTableEntry e) {
    validate_entry(e);
    auto at = std::upper_bound(entries_.begin(), entries_.end(), e, entry_before);
    entries_.insert(at, std::move(e));
}

void FlowTable::insert(const std::vector<FlowTableEntry>& entries) {
    for (const auto& e : entries) insert(e);
}

void FlowTable::expire(double t) {
    std::erase_if(entries_, [t](const FlowTableEntry& e) { return !e.match.window.period && e.match.window.end() <= t; });
}

std::vector<const FlowTableEntry*> FlowTable::matching(const MatchKey& key) const {
    std::vector<const FlowTableEntry*> out;
    for (const auto& e : entries_) {
        const auto& m = e.match;
        if (m.road && m.road != key.road) continue;
        if (m.lane && m.lane != key.lane) continue;
        if (m.vehicle && m.vehicle != key.vehicle) continue;
        if (m.vehicle_class && m.vehicle_class != key.vehicle_class) continue;
        if (!m.window.contains(key.time)) continue;
        out.push_back(&e);
    }
    return out;
}

std::optional<std::size_t> SignalPlan::phase_index(PhaseId id) const {
    for (std::size_t i = 0; i < phases.size(); ++i) {
        if (phases[i].id == id) return i;
    }
    return std::nullopt;
}

void validate_plan(const SignalPlan& plan) {
    const std::string where = "signal plan at node " + std::to_string(plan.intersection.value);
    if (!(plan.cycle_length > 0)) throw ValidationError(where + ": cycle length must be positive");
    if (!(plan.offset >= 0 && plan.offset < plan.cycle_length)) throw ValidationError(where + ": offset outside the cycle");
    if (plan.phases.empty()) throw ValidationError(where + ": no phases");
    double total = 0;
    std::set<PhaseId> ids;
    for (const auto& p : plan.phases) {
        if (!ids.insert(p.id).second) throw ValidationError(where + ": duplicate phase " + std::to_string(p.id.value));
        if (!(p.green > 0) || !(p.yellow >= 0) || !(p.red >= 0))
            throw ValidationError(where + ": phase " + std::to_string(p.id.value) + " has invalid durations");
        total += p.length();
    }
    if (std::abs(total - plan.cycle_length) > 1e-9 * plan.cycle_length)
        throw ValidationError(where + ": phases last " + std::to_string(total) + " s, cycle is " +
                              std::to_string(plan.cycle_length) + " s");
}

void validate_plan(const SignalPlan& plan, const SwitchFabric& fabric) {
    validate_plan(plan);
    for (const auto& p : plan.phases) {
        for (ConnectionId c : p.connections) {
            if (!c.valid() || c.index() >= fabric.connections.size())
                throw ValidationError("phase " + std::to_string(p.id.value) + " grants unknown connection " +
                                      std::to_string(c.value));
        }
        if (!fabric.phase_safe(p.connections))
            throw ValidationError("phase " + std::to_string(p.id.value) + " grants conflicting connections");
    }
}

namespace {

double slot_start(const SignalPlan& plan, std::size_t phase) {
    double s = plan.offset;
    for (std::size_t i = 0; i < phase; ++i) s += plan.phases[i].length();
    return s;
}

}  // namespace

SignalColor phase_color(const SignalPlan& plan, std::size_t phase, double t) {
    const auto& p = plan.phases.at(phase);
    const double x = phase_offset(t, slot_start(plan, phase), plan.cycle_length);
    if (x < p.green) return SignalColor::green;
    if (x < p.green + p.yellow) return SignalColor::yellow;
    return SignalColor::red;
}

double time_to_green(const SignalPlan& plan, std::size_t phase, double t) {
    const auto& p = plan.phases.at(phase);
    const double x = phase_offset(t, slot_start(plan, phase), plan.cycle_length);
    return x < p.green ? 0.0 : plan.cycle_length - x;
}

double green_end(const SignalPlan& plan, std::size_t phase, double t) {
    const auto& p = plan.phases.at(phase);
    const double x = phase_offset(t, slot_start(plan, phase), plan.cycle_length);
    return x < p.green ? t + (p.green - x) : t + (plan.cycle_length - x) + p.green;
}

std::vector<ConnectionId> green_connections(const SignalPlan& plan, double t) {
    std::vector<ConnectionId> out;
    for (std::size_t i = 0; i < plan.phases.size(); ++i) {
        if (phase_color(plan, i, t) == SignalColor::green)
            out.insert(out.end(), plan.phases[i].connections.begin(), plan.phases[i].connections.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<FlowTableEntry> compile_signal_plan(const SignalPlan& plan, std::uint64_t first_id, std::uint64_t version) {
    validate_plan(plan);
    std::vector<FlowTableEntry> out;
    double start = plan.offset;
    for (const auto& p : plan.phases) {
        const std::pair<SignalColor, double> intervals[] = {
            {SignalColor::green, p.green}, {SignalColor::yellow, p.yellow}, {SignalColor::red, p.red}};
        for (const auto& [color, length] : intervals) {
            if (length > 0) {
                FlowTableEntry e;
                e.id = first_id + out.size();
                e.match.window = {start, length, plan.cycle_length};
                e.action = SetSignal{plan.intersection, p.id, color, p.connections};
                e.version = version;
                out.push_back(std::move(e));
            }
            start += length;
        }
    }
    return out;
}

SignalPlan decompile_signal_plan(const std::vector<FlowTableEntry>& entries) {
    if (entries.empty()) throw ValidationError("no signal entries");
    struct Parts {
        PhaseSpec spec;
        std::optional<double> green_start;
    };
    std::map<PhaseId, Parts> phases;
    SignalPlan plan;
    bool first = true;
    for (const auto& e : entries) {
        const auto* s = std::get_if<SetSignal>(&e.action);
        if (!s) throw ValidationError("flow entry " + std::to_string(e.id) + " is not a signal entry");
        if (!e.match.window.period) throw ValidationError("signal entry " + std::to_string(e.id) + " is not periodic");
        if (first) {
            plan.intersection = s->intersection;
            plan.cycle_length = *e.match.window.period;
            first = false;
        } else if (s->intersection != plan.intersection || *e.match.window.period != plan.cycle_length) {
            throw ValidationError("signal entries describe more than one plan");
        }
        auto& part = phases[s->phase];
        part.spec.id = s->phase;
        part.spec.connections = s->connections;
        switch (s->color) {
            case SignalColor::green:
                part.spec.green = e.match.window.duration;
                part.green_start = e.match.window.start;
                break;
            case SignalColor::yellow: part.spec.yellow = e.match.window.duration; break;
            case SignalColor::red: part.spec.red = e.match.window.duration; break;
        }
    }
    std::vector<std::pair<double, PhaseSpec>> ordered;
    for (auto& [id, part] : phases) {
        if (!part.green_start) throw ValidationError("phase " + std::to_string(id.value) + " has no green interval");
        ordered.emplace_back(*part.green_start, part.spec);
    }
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    plan.offset = ordered.front().first;
    for (auto& [_, spec] : ordered) plan.phases.push_back(std::move(spec));
    validate_plan(plan);
    return plan;
}

SignalPlan cooperative_signal_control(const SignalPlan& plan, double now, const std::vector<ApproachingPlatoon>& platoons,
                                      double density, const CooperativeParams& params, const SignalPlan* base) {
    if (density < 0 || density > 1) throw PreconditionError("density must lie in [0, 1]");
    if (density >= params.density_threshold) return plan;
    SignalPlan out = plan;
    for (const auto& platoon : platoons) {
        const auto i = out.phase_index(platoon.phase);
        if (!i || phase_color(out, *i, now) != SignalColor::green) continue;
        if (platoon.tail_arrival - now > params.lookahead) continue;
        const double end = green_end(out, *i, now);
        if (platoon.tail_arrival <= end) continue;
        auto& p = out.phases[*i];
        double budget = params.max_extension;
        if (base && base->phase_index(platoon.phase)) budget -= p.green - base->phases[*base->phase_index(platoon.phase)].green;
        const double extension = platoon.tail_arrival - end;
        if (extension > budget || extension > p.red) continue;
        p.green += extension;
        p.red -= extension;
    }
    return out;
}

std::vector<FlowTableEntry> vehicle_controller_step(const RoadGraph& g, const std::vector<VehicleReport>& reports,
                                                    const std::map<VehicleId, std::vector<LinkId>>& routes,
                                                    const SignalContext& signals, double now,
                                                    const VehicleControlParams& params) {
    std::vector<FlowTableEntry> out;
    std::uint64_t next_id = params.first_id;
    for (const auto& r : reports) {
        if (!is_connected(r.vehicle_class)) continue;
        auto route = routes.find(r.vehicle);
        if (route == routes.end()) throw UnknownVehicle("no route for vehicle " + std::to_string(r.vehicle.value));
        if (!route->second.empty()) {
            FlowTableEntry seg;
            seg.id = next_id++;
            seg.match.vehicle = r.vehicle;
            seg.match.window = {now, params.route_validity, std::nullopt};
            seg.action = RouteSegment{route->second};
            seg.priority = params.route_priority;
            seg.version = params.version;
            out.push_back(std::move(seg));
        }

        auto head = signals.approach_phase.find(r.link);
        if (head == signals.approach_phase.end()) continue;
        const RoadLink& link = g.link(r.link);
        const auto& plan = signals.plans.at(link.to);
        const auto phase = plan.phase_index(head->second);
        if (!phase) continue;
        const double wait = time_to_green(plan, *phase, now);
        if (wait <= 0) continue;
        const int cells = static_cast<int>(std::floor(link.length / params.cell_length));
        const double distance = (cells - r.cell) * params.cell_length;
        const double limit = link.speed_limit;
        const double kmh = distance / wait * 3.6;
        if (distance <= 0 || kmh >= limit) continue;

        FlowTableEntry adv;
        adv.id = next_id++;
        adv.match.vehicle = r.vehicle;
        adv.match.road = r.link;
        adv.match.window = {now, wait, std::nullopt};
        adv.action = SpeedAdvisory{std::clamp(kmh, params.min_advisory_kmh, limit)};
        adv.priority = params.advisory_priority;
        adv.version = params.version;
        out.push_back(std::move(adv));
    }
    return out;
}

RoutingStep routing_engine_step(const RoadGraph& g, RouterDatabase db,
                                 const std::vector<std::pair<LinkId, std::vector<double>>>& local,
                                 const std::vector<LinkStateRecord>& neighbor_msgs, const Objective& objective) {
    bool changed = false;
    for (const auto& [lid, values] : local) {
        if (g.link(lid).from != db.router) continue;
        auto& rec = db.links[lid];
        if (rec.sequence > 0 && rec.values == values) continue;
        rec.link = lid;
        rec.sequence += 1;
        rec.values = values;
        changed = true;
    }
    for (const auto& msg : neighbor_msgs) {
        auto it = db.links.find(msg.link);
        if (it != db.links.end() && it->second.sequence >= msg.sequence) continue;
        db.links[msg.link] = msg;
        changed = true;
    }
    RoutingStep step{std::move(db), std::nullopt};
    if (!changed) return step;
    RoutingPolicy policy{step.db.router, {}};
    for (const auto& e : routing_table(apply_link_state(g, step.db), step.db.router, objective))
        policy.next_hop[e.destination] = e.next_hop;
    step.policy = std::move(policy);
    return step;
}

DispatchResult dispatching_engine_step(const SwitchFabric& fabric, const DispatchPolicy& policy, double t) {
    DispatchResult out;
    auto check = [&](ConnectionId c) {
        if (!c.valid() || c.index() >= fabric.connections.size())
            throw PolicyMismatch("policy references unknown connection " + std::to_string(c.value));
    };
    if (fabric.signalized) {
        if (!policy.plan) throw PolicyMismatch("signalized fabric without a signal plan");
        for (const auto& p : policy.plan->phases) std::for_each(p.connections.begin(), p.connections.end(), check);
        for (std::size_t i = 0; i < policy.plan->phases.size(); ++i)
            out.actuations.push_back({policy.plan->intersection, policy.plan->phases[i].id, phase_color(*policy.plan, i, t)});
        out.grants = green_connections(*policy.plan, t);
        return out;
    }
    if (policy.weights) {
        for (const auto& [c, _] : *policy.weights) check(c);
        out.grants = match_max_weight(fabric, *policy.weights);
    } else {
        out.grants = match_longest_queue_first(fabric);
    }
    return out;
}

std::vector<ControllerRole> assign_controller_roles(const std::set<NodeId>& signalized, std::size_t edge_count) {
    if (edge_count == 0 && !signalized.empty()) throw PreconditionError("signalized intersections need an edge controller");
    std::vector<ControllerRole> roles;
    for (std::size_t i = 0; i < edge_count; ++i) roles.push_back({ControllerRole::Kind::edge, static_cast<int>(i), {}});
    std::size_t k = 0;
    for (NodeId n : signalized) roles[k++ % edge_count].scope.insert(n);
    roles.push_back({ControllerRole::Kind::central, static_cast<int>(edge_count), {}});
    return roles;
}

void check_controller_roles(const std::vector<ControllerRole>& roles, const std::set<NodeId>& signalized) {
    std::set<NodeId> covered;
    int central = 0;
    for (const auto& r : roles) {
        if (r.kind == ControllerRole::Kind::central) {
            ++central;
            continue;
        }
        for (NodeId n : r.scope) {
            if (!covered.insert(n).second)
                throw ValidationError("intersection " + std::to_string(n.value) + " has two edge controllers");
        }
    }
    if (central != 1) throw ValidationError("exactly one central controller is required");
    if (covered != signalized) throw ValidationError("edge scopes do not cover the signalized intersections");
}

bool controller_due(const ControllerRole& role, std::uint64_t tick, std::uint64_t central_period) {
    return role.kind == ControllerRole::Kind::edge || tick % central_period == 0;
}

}  // namespace tisim
