#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <variant>
#include <vector>

#include "tisim/fabric.hpp"
#include "tisim/graph.hpp"
#include "tisim/ids.hpp"
#include "tisim/link_state.hpp"
#include "tisim/routing.hpp"

namespace tisim {

enum class VehicleClass { human, driverless_connected, human_connected };
enum class SignalColor { green, yellow, red };

[[nodiscard]] std::string_view to_string(VehicleClass c);
[[nodiscard]] std::string_view to_string(SignalColor c);
[[nodiscard]] VehicleClass parse_vehicle_class(std::string_view s);
[[nodiscard]] SignalColor parse_signal_color(std::string_view s);
[[nodiscard]] inline bool is_connected(VehicleClass c) { return c != VehicleClass::human; }

/// [start, start + duration), repeating every `period` seconds when set.
struct TimeWindow {
    double start = 0;
    double duration = 0;
    std::optional<double> period;

    [[nodiscard]] double end() const { return start + duration; }
    [[nodiscard]] bool contains(double t) const;

    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

/// Unset fields are wildcards.
struct FlowMatch {
    std::optional<LinkId> road;
    std::optional<int> lane;
    TimeWindow window;
    std::optional<VehicleId> vehicle;
    std::optional<VehicleClass> vehicle_class;

    friend bool operator==(const FlowMatch&, const FlowMatch&) = default;
};

struct SetSignal {
    NodeId intersection;
    PhaseId phase;
    SignalColor color = SignalColor::red;
    std::vector<ConnectionId> connections;

    friend bool operator==(const SetSignal&, const SetSignal&) = default;
};

struct SpeedAdvisory {
    double kmh = 0;

    friend bool operator==(const SpeedAdvisory&, const SpeedAdvisory&) = default;
};

struct LaneAssignment {
    int lane = 0;

    friend bool operator==(const LaneAssignment&, const LaneAssignment&) = default;
};

struct RouteSegment {
    std::vector<LinkId> next_links;

    friend bool operator==(const RouteSegment&, const RouteSegment&) = default;
};

using FlowAction = std::variant<SetSignal, SpeedAdvisory, LaneAssignment, RouteSegment>;

struct FlowTableEntry {
    std::uint64_t id = 0;
    FlowMatch match;
    FlowAction action;
    int priority = 0;
    std::uint64_t version = 0;

    friend bool operator==(const FlowTableEntry&, const FlowTableEntry&) = default;
};

/// Table order: priority descending, then version descending, then id.
[[nodiscard]] bool entry_before(const FlowTableEntry& a, const FlowTableEntry& b);

/// Throws ValidationError on an empty window or negative period.
void validate_entry(const FlowTableEntry& e);

struct MatchKey {
    std::optional<LinkId> road;
    std::optional<int> lane;
    double time = 0;
    std::optional<VehicleId> vehicle;
    std::optional<VehicleClass> vehicle_class;

    [[nodiscard]] static MatchKey at(double t) {
        MatchKey k;
        k.time = t;
        return k;
    }
};

/// Entries kept in table order; lookups return the first match, so a higher
/// priority or newer version always wins.
class FlowTable {
public:
    void insert(FlowTableEntry e);
    void insert(const std::vector<FlowTableEntry>& entries);
    /// Drops entries whose non-periodic window ended at or before `t`.
    void expire(double t);
    void clear() { entries_.clear(); }

    [[nodiscard]] const std::vector<FlowTableEntry>& entries() const { return entries_; }
    [[nodiscard]] std::vector<const FlowTableEntry*> matching(const MatchKey& key) const;

    /// Highest-ranked matching entry holding action type A.
    template <class A>
    [[nodiscard]] const A* first(const MatchKey& key) const {
        for (const auto* e : matching(key)) {
            if (const auto* a = std::get_if<A>(&e->action)) return a;
        }
        return nullptr;
    }

private:
    std::vector<FlowTableEntry> entries_;
};

struct PhaseSpec {
    PhaseId id;
    std::vector<ConnectionId> connections;
    double green = 0;
    double yellow = 0;
    double red = 0;

    [[nodiscard]] double length() const { return green + yellow + red; }
    friend bool operator==(const PhaseSpec&, const PhaseSpec&) = default;
};

/// Phases run back to back, each as green, yellow, red. A phase is red
/// outside its own slot.
struct SignalPlan {
    NodeId intersection;
    double cycle_length = 0;
    std::vector<PhaseSpec> phases;
    double offset = 0;

    [[nodiscard]] std::optional<std::size_t> phase_index(PhaseId id) const;
    friend bool operator==(const SignalPlan&, const SignalPlan&) = default;
};

/// Throws ValidationError: positive cycle, offset in [0, cycle), green > 0,
/// yellow and red >= 0, slots summing to the cycle, unique phase ids.
void validate_plan(const SignalPlan& plan);
/// Also requires every granted set to be phase-safe in `fabric`.
void validate_plan(const SignalPlan& plan, const SwitchFabric& fabric);

[[nodiscard]] SignalColor phase_color(const SignalPlan& plan, std::size_t phase, double t);
/// Seconds until the phase next shows green; 0 while green.
[[nodiscard]] double time_to_green(const SignalPlan& plan, std::size_t phase, double t);
/// End of the green window in progress or, outside green, of the next one.
[[nodiscard]] double green_end(const SignalPlan& plan, std::size_t phase, double t);
/// Union of the connection sets of phases showing green at `t`, sorted.
[[nodiscard]] std::vector<ConnectionId> green_connections(const SignalPlan& plan, double t);

/// One periodic set_signal entry per phase and nonzero color interval.
[[nodiscard]] std::vector<FlowTableEntry> compile_signal_plan(const SignalPlan& plan, std::uint64_t first_id = 0,
                                                              std::uint64_t version = 1);
/// Inverse of compile_signal_plan. Throws ValidationError on entries that do
/// not describe one intersection's plan.
[[nodiscard]] SignalPlan decompile_signal_plan(const std::vector<FlowTableEntry>& entries);

struct CooperativeParams {
    double density_threshold = 0.10;
    double max_extension = 10.0;
    double lookahead = 15.0;
};

/// A group of connected vehicles heading for a phase's stop line. Times are
/// absolute simulation seconds.
struct ApproachingPlatoon {
    PhaseId phase;
    double head_arrival = 0;
    double tail_arrival = 0;
    std::size_t size = 0;
};

/// Below the density threshold, stretches the running green of a phase so a
/// platoon whose tail arrives within the lookahead and at most
/// `max_extension` after green end clears without stopping. The phase's red
/// shrinks by the same amount, keeping the cycle length. `base` bounds the
/// accumulated extension when `plan` was already extended this cycle.
[[nodiscard]] SignalPlan cooperative_signal_control(const SignalPlan& plan, double now,
                                                    const std::vector<ApproachingPlatoon>& platoons, double density,
                                                    const CooperativeParams& params = {},
                                                    const SignalPlan* base = nullptr);

struct VehicleReport {
    VehicleId vehicle;
    VehicleClass vehicle_class = VehicleClass::human;
    LinkId link;
    int lane = 0;
    int cell = 0;
    /// Cells per tick.
    int speed = 0;
    int acceleration = 0;
    /// -1 left, 0 straight, +1 right.
    int steering = 0;
    std::uint64_t timestamp = 0;

    friend bool operator==(const VehicleReport&, const VehicleReport&) = default;
};

/// Signal state visible to the vehicle controller: a plan per intersection and
/// the phase serving each signalized approach link.
struct SignalContext {
    std::map<NodeId, SignalPlan> plans;
    std::map<LinkId, PhaseId> approach_phase;
};

struct VehicleControlParams {
    double cell_length = 7.5;
    double min_advisory_kmh = 20.0;
    /// Validity of route_segment entries, seconds.
    double route_validity = 10.0;
    int advisory_priority = 10;
    int route_priority = 5;
    std::uint64_t first_id = 0;
    std::uint64_t version = 1;
};

/// For each connected vehicle: a route_segment entry with its remaining
/// links, and, when its approach signal is not green and the vehicle would
/// reach the stop line early at the speed limit, a speed advisory of
/// distance / time-to-green clamped to [min_advisory_kmh, limit]. `routes`
/// maps each connected vehicle to the links left after its current one; an
/// empty route (last link of the trip) gets no route_segment entry. Throws
/// UnknownVehicle when a connected vehicle has no route.
[[nodiscard]] std::vector<FlowTableEntry> vehicle_controller_step(const RoadGraph& g,
                                                                  const std::vector<VehicleReport>& reports,
                                                                  const std::map<VehicleId, std::vector<LinkId>>& routes,
                                                                  const SignalContext& signals, double now,
                                                                  const VehicleControlParams& params = {});

/// Next hops issued by a routing engine to its dispatching engine.
struct RoutingPolicy {
    NodeId router;
    std::map<NodeId, LinkId> next_hop;

    friend bool operator==(const RoutingPolicy&, const RoutingPolicy&) = default;
};

struct RoutingStep {
    RouterDatabase db;
    std::optional<RoutingPolicy> policy;
};

/// Merges local measurements (links leaving this router, sequence bumped) and
/// neighbor records (accepted only with a higher sequence) into `db`. When
/// anything changed, recomputes next hops over the router's view of the
/// network; otherwise emits no policy.
[[nodiscard]] RoutingStep routing_engine_step(const RoadGraph& g, RouterDatabase db,
                                              const std::vector<std::pair<LinkId, std::vector<double>>>& local,
                                              const std::vector<LinkStateRecord>& neighbor_msgs,
                                              const Objective& objective);

struct DispatchPolicy {
    std::optional<SignalPlan> plan;
    /// Connection weights for an unsignalized fabric; longest queue first when absent.
    std::optional<std::map<ConnectionId, double>> weights;
};

struct SignalActuation {
    NodeId intersection;
    PhaseId phase;
    SignalColor color = SignalColor::red;

    friend bool operator==(const SignalActuation&, const SignalActuation&) = default;
};

struct DispatchResult {
    std::vector<ConnectionId> grants;
    std::vector<SignalActuation> actuations;
};

/// Signalized fabric: grants the green phases' connections at time `t`
/// (yellow admits nothing new). Unsignalized: max-weight matching with the
/// policy weights, else longest queue first. Throws PolicyMismatch when the
/// policy names a connection the fabric lacks.
[[nodiscard]] DispatchResult dispatching_engine_step(const SwitchFabric& fabric, const DispatchPolicy& policy, double t);

struct ControllerRole {
    enum class Kind { edge, central };
    Kind kind = Kind::edge;
    int id = 0;
    /// Intersections of an edge controller; empty for the central one.
    std::set<NodeId> scope;
};

/// `edge_count` edge controllers splitting `signalized` round-robin by node
/// id, then one central controller.
[[nodiscard]] std::vector<ControllerRole> assign_controller_roles(const std::set<NodeId>& signalized,
                                                                  std::size_t edge_count);
/// Throws ValidationError unless edge scopes partition `signalized` and there
/// is exactly one central controller.
void check_controller_roles(const std::vector<ControllerRole>& roles, const std::set<NodeId>& signalized);
/// Edge controllers run every tick, the central one every `central_period` ticks.
[[nodiscard]] bool controller_due(const ControllerRole& role, std::uint64_t tick, std::uint64_t central_period = 10);

}  // namespace tisim
