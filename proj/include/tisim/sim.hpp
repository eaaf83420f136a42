#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <tuple>
#include <utility>
#include <vector>

#include "tisim/control.hpp"
#include "tisim/scenario.hpp"

namespace tisim {

struct SimVehicle {
    VehicleId id;
    VehicleClass vehicle_class = VehicleClass::human;
    LinkId link;
    int lane = 0;
    int cell = 0;
    int speed = 0;  // cells per tick
    /// Links still to drive after `link` on the current trip.
    std::vector<LinkId> route;
    /// The trip that starts when this one ends, planned on the trip's last link.
    std::vector<LinkId> next_trip;
    NodeId origin;
    NodeId destination;
    int priority = 0;
    /// Speed cap from an active advisory, cells per tick.
    std::optional<int> advisory_cap;
    std::uint64_t trips = 0;
};

/// A vehicle placed by hand rather than by the seeded uniform placement.
struct Placement {
    LinkId link;
    int lane = 0;
    int cell = 0;
    VehicleClass vehicle_class = VehicleClass::human;
    int speed = 0;
};

struct ClassMean {
    bool defined = false;
    double mean_speed_kmh = 0;
    std::uint64_t vehicle_ticks = 0;
};

struct Measurement {
    std::uint64_t interval = 0;
    /// False when no vehicle was on the network during the interval.
    bool defined = false;
    double mean_speed_kmh = 0;
    std::uint64_t vehicle_ticks = 0;
    std::map<VehicleClass, ClassMean> per_class;
};

/// Audit counters; every violation counter stays at zero in a correct run.
struct SimCounters {
    std::uint64_t injected = 0;
    std::uint64_t arrived = 0;
    std::uint64_t conservation_violations = 0;
    std::uint64_t double_occupancy = 0;
    std::uint64_t red_crossings = 0;
    std::uint64_t speed_violations = 0;
    /// Moves cancelled because the target cell was taken.
    std::uint64_t deferrals = 0;
    std::uint64_t lane_changes = 0;
    std::uint64_t reroutes = 0;
    std::uint64_t green_extensions = 0;
    std::uint64_t advisories = 0;
};

/// Cellular-automaton traffic over a scenario network. Links are split into
/// lanes of `floor(length / cell_length)` cells, cell 0 at the upstream end.
/// Junctions are crossed through the node's switching fabric on a granted
/// connection: green phases at signals, longest-queue-first elsewhere. The
/// system is closed: a vehicle reaching its destination is logged as arrived
/// and starts a new trip back toward its origin.
class Simulation {
public:
    /// Seeded uniform placement of `scenario.demand.vehicles` vehicles with
    /// zero speed; round(av_fraction * n) of them driverless, humans connected
    /// with probability `sim.connected_fraction`. Throws Overcrowded.
    Simulation(const Scenario& scenario, double av_fraction, std::uint64_t seed);
    /// Hand-placed vehicles, for tests. Destinations are drawn as usual.
    Simulation(const Scenario& scenario, const std::vector<Placement>& placements, std::uint64_t seed);

    /// One tick: controllers (controlled mode), route following, lane
    /// changes, dispatch and signal heads, CA update, audits and measurement.
    void step();
    /// Warm-up plus the measured duration.
    void run();

    /// Signal heads shown from this tick on. Throws UnknownSignal for a node
    /// without a plan or a phase the plan lacks.
    void apply_signals(const std::vector<SignalActuation>& actuations);

    [[nodiscard]] std::uint64_t clock() const { return clock_; }
    [[nodiscard]] double now() const { return static_cast<double>(clock_) * cfg_.tick; }
    [[nodiscard]] const SimConfig& config() const { return cfg_; }
    [[nodiscard]] const std::vector<SimVehicle>& vehicles() const { return vehicles_; }
    [[nodiscard]] const SimCounters& counters() const { return counters_; }
    [[nodiscard]] const std::vector<Measurement>& measurements() const { return measurements_; }
    [[nodiscard]] int cells(LinkId link) const { return lanes_.at(link.index()).cells; }
    /// Index into vehicles() of the occupant, or nullopt.
    [[nodiscard]] std::optional<std::size_t> occupant(LinkId link, int lane, int cell) const;
    /// Signal plan in force at a node (the base plan plus any extension).
    [[nodiscard]] const SignalPlan* plan(NodeId node) const;
    [[nodiscard]] std::optional<SignalColor> head(NodeId node, PhaseId phase) const;
    /// Vehicles on the network; arrivals re-enter at once, so this never changes.
    [[nodiscard]] std::size_t on_network() const { return vehicles_.size(); }

private:
    struct LinkLanes {
        int cells = 0;
        int vmax = 0;  // speed-limit cap, cells per tick
        std::vector<std::vector<int>> occupancy;  // [lane][cell] -> vehicle index or -1
    };
    struct NodeState {
        SwitchFabric fabric;
        std::optional<SignalPlan> base;
        std::optional<SignalPlan> active;
        std::int64_t cycle = -1;
        std::map<PhaseId, SignalColor> heads;
        std::vector<ConnectionId> grants;
        /// Unsignalized: vehicle granted at each input port this tick.
        std::map<PortId, VehicleId> granted_vehicle;
        std::map<PortId, double> last_departure;
        /// (in link, in lane, out link) -> connection.
        std::map<std::tuple<LinkId, int, LinkId>, ConnectionId> moves;
    };
    struct Crossing {
        NodeId node;
        ConnectionId connection;
        VehicleId vehicle;
    };

    void init_common(const Scenario& scenario, std::uint64_t seed);
    void assign_trip(SimVehicle& v);
    void plan_next_trip(SimVehicle& v);
    [[nodiscard]] std::optional<std::pair<double, std::vector<LinkId>>> drive_route(
        LinkId start, NodeId dest, const std::vector<double>& link_cost) const;
    [[nodiscard]] const std::vector<double>& distance_costs();
    [[nodiscard]] std::optional<std::vector<LinkId>> static_route(LinkId from, NodeId to);
    [[nodiscard]] bool drivable(LinkId from, const std::vector<LinkId>& links, NodeId dest) const;
    [[nodiscard]] bool lane_serves(LinkId link, int lane, LinkId next) const;
    [[nodiscard]] int gap_ahead(LinkId link, int lane, int cell, int* leader) const;
    [[nodiscard]] std::optional<LinkId> next_link(const SimVehicle& v) const;
    [[nodiscard]] std::optional<ConnectionId> movement(const SimVehicle& v) const;
    [[nodiscard]] int vmax_of(const SimVehicle& v) const;

    void run_controllers();
    void route_follow_step();
    void lane_change_step();
    void dispatch_step();
    void ca_step();
    void audit();
    void measure();

    Scenario scenario_;
    SimConfig cfg_;
    std::mt19937_64 rng_;
    std::uint64_t clock_ = 0;
    std::vector<LinkLanes> lanes_;
    std::map<NodeId, NodeState> nodes_;
    std::vector<SimVehicle> vehicles_;
    std::map<VehicleId, FlowTable> tables_;
    /// Links a fabric lets each link continue onto, sorted.
    std::vector<std::vector<LinkId>> successors_;
    std::vector<double> distance_cost_;
    std::map<std::pair<LinkId, NodeId>, std::optional<std::vector<LinkId>>> route_cache_;
    /// Connected vehicle -> (link it was planned from, links after it).
    std::map<VehicleId, std::pair<LinkId, std::vector<LinkId>>> dynamic_routes_;
    std::vector<Crossing> crossings_;
    std::vector<NodeId> terminals_;
    SimCounters counters_;
    std::vector<Measurement> measurements_;
    double speed_sum_ = 0;
    std::uint64_t speed_n_ = 0;
    std::map<VehicleClass, std::pair<double, std::uint64_t>> class_sums_;
    std::uint64_t version_ = 1;
};

/// Speed cap in cells per tick for an advisory in km/h: floor of the lattice
/// speed, never below one cell so an advised vehicle keeps moving.
[[nodiscard]] int advisory_cells(double kmh, double cell_length, double tick);

/// Mean speed of a measurement series, weighting intervals by vehicle-ticks.
/// nullopt when every interval is undefined.
[[nodiscard]] std::optional<double> overall_mean_speed(const std::vector<Measurement>& series);

}  // namespace tisim
