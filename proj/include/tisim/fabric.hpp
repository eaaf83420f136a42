#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tisim/graph.hpp"
#include "tisim/ids.hpp"
#include "tisim/metrics.hpp"

namespace tisim {

enum class PortDirection { input, output };

struct LaneBinding {
    LinkId link;
    int lane = 0;

    friend bool operator==(const LaneBinding&, const LaneBinding&) = default;
};

/// A vehicle waiting at an input port together with the movement it requests.
struct Request {
    VehicleId vehicle;
    ConnectionId connection;

    friend bool operator==(const Request&, const Request&) = default;
};

struct Port {
    PortId id;
    PortDirection direction = PortDirection::input;
    LaneBinding lane;
    int arm = 0;
    /// Position of the lane on a circle around the junction, radians.
    double angle = 0;
    std::vector<double> metric_values;
    std::deque<Request> queue;
};

enum class Movement { through, left, right, u_turn };

struct Connection {
    ConnectionId id;
    PortId in_port;
    PortId out_port;
    Movement movement = Movement::through;
    std::vector<double> metric_values;
};

enum class ConflictKind { none = 0, cross = 1, merge = 2, diverge = 3 };

[[nodiscard]] std::string_view to_string(Movement m);
[[nodiscard]] std::string_view to_string(ConflictKind k);

class ConflictMatrix {
public:
    ConflictMatrix() = default;
    explicit ConflictMatrix(std::size_t n) : n_(n), kinds_(n * n, ConflictKind::none) {}

    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] ConflictKind kind(ConnectionId a, ConnectionId b) const { return kinds_[a.index() * n_ + b.index()]; }
    /// Sets both (a,b) and (b,a).
    void set(ConnectionId a, ConnectionId b, ConflictKind k);

    friend bool operator==(const ConflictMatrix&, const ConflictMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<ConflictKind> kinds_;
};

struct SwitchFabric {
    NodeId node;
    std::vector<MetricSpec> metrics;
    std::vector<Port> ports;
    std::vector<Connection> connections;
    ConflictMatrix conflicts;
    double service_time = 2.0;
    bool signalized = false;
    /// Right turn and through movement sharing an input lane may share a phase.
    bool permissive_right = true;

    [[nodiscard]] const Port& port(PortId id) const { return ports.at(id.index()); }
    [[nodiscard]] Port& port(PortId id) { return ports.at(id.index()); }
    [[nodiscard]] const Connection& connection(ConnectionId id) const { return connections.at(id.index()); }
    [[nodiscard]] std::optional<ConnectionId> find_connection(PortId in, PortId out) const;
    [[nodiscard]] std::vector<PortId> input_ports() const;

    /// Phase compatibility: no conflict, or the permissive right/through split.
    [[nodiscard]] bool compatible(ConnectionId a, ConnectionId b) const;
    /// Per-tick exclusivity used by the matchers: any conflict, including a
    /// shared input port, keeps two connections apart.
    [[nodiscard]] bool exclusive(ConnectionId a, ConnectionId b) const {
        return a == b || conflicts.kind(a, b) != ConflictKind::none;
    }
    [[nodiscard]] bool phase_safe(const std::vector<ConnectionId>& set) const;
    [[nodiscard]] bool grant_safe(const std::vector<ConnectionId>& set) const;

    [[nodiscard]] std::size_t queued() const;
};

/// Fills merge/diverge from shared ports and cross from lane positions: two
/// movements with distinct ports cross when their endpoints interleave on the
/// circle. Checks the bipartite structure; throws ValidationError.
void compute_conflicts(SwitchFabric& fabric);

/// Symmetric junction with `arms` (3 or 4) two-way roads and
/// `lanes_per_direction` lanes each way, no u-turns. The three-arm layout is
/// the four-arm one without its south arm. Throws UnsupportedGeometry.
[[nodiscard]] SwitchFabric build_standard_fabric(int arms, int lanes_per_direction);

/// Fabric for a graph node, one port per lane of every incident link. Arm
/// angles come from node positions and a link's reverse twin shares its arm.
/// Movements are classified by turning angle. Throws UnsupportedGeometry when
/// the node has no approaches or no exits.
[[nodiscard]] SwitchFabric build_node_fabric(const RoadGraph& g, NodeId node);

/// Maximal conflict-free movement sets under `compatible`, each sorted by id,
/// the list sorted lexicographically.
[[nodiscard]] std::vector<std::vector<ConnectionId>> conflict_free_sets(const SwitchFabric& fabric);

void enqueue(SwitchFabric& fabric, VehicleId vehicle, ConnectionId connection);
/// Pops the head of line of every granted connection's input port. The grant
/// must be safe and each head must request its granted movement.
std::vector<Request> serve(SwitchFabric& fabric, const std::vector<ConnectionId>& grants);

/// Head-of-line requests in input-port order.
[[nodiscard]] std::vector<ConnectionId> head_of_line(const SwitchFabric& fabric);

[[nodiscard]] std::vector<ConnectionId> match_round_robin(const SwitchFabric& fabric, std::uint64_t tick);
[[nodiscard]] std::vector<ConnectionId> match_longest_queue_first(const SwitchFabric& fabric);

/// Exact maximum-weight set of mutually non-exclusive connections. Zero-weight
/// connections are never granted; ties go to the lexicographically smallest
/// id set. Throws TooLarge above 24 connections, PreconditionError on a
/// negative weight.
[[nodiscard]] std::vector<ConnectionId> match_max_weight(const SwitchFabric& fabric,
                                                         const std::map<ConnectionId, double>& weights);

/// Metric k of the internal path in_port -> connection -> out_port.
[[nodiscard]] double fabric_route_value(const SwitchFabric& fabric, PortId in, PortId out, int k);

/// Square matrix of 0/1/2/3 (none/cross/merge/diverge), one row per line.
[[nodiscard]] std::string conflict_matrix_text(const SwitchFabric& fabric);

}  // namespace tisim
