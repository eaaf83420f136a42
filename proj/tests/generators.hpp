#pragma once

// Random inputs and small fixed networks shared by the unit tests and the
// acceptance suite.

#include <map>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tisim/codec.hpp"
#include "tisim/control.hpp"
#include "tisim/error.hpp"
#include "tisim/hierarchy.hpp"
#include "tisim/routing.hpp"

namespace gen {

using namespace tisim;

struct Network {
    RoadGraph g;
    NetworkHierarchy h;
};

// Three TAS of `per` nodes each. Intra links form a bidirectional ring plus
// random chords; `bridges` external links join consecutive TAS (both ways).
inline Network random_three_tas(std::mt19937_64& rng, int per, int bridges) {
    RoadGraph::Builder b;
    b.metric("distance", MetricKind::additive);
    b.metric("time", MetricKind::additive);
    b.metric("capacity", MetricKind::concave_min, Direction::maximize);
    std::uniform_int_distribution<int> val(1, 20), cap(1, 10), local(0, per - 1);
    std::map<NodeId, TasId> assign;
    std::vector<std::vector<NodeId>> tas(3);
    for (int t = 0; t < 3; ++t) {
        for (int i = 0; i < per; ++i) {
            NodeId n = b.node("t" + std::to_string(t) + "n" + std::to_string(i), i == 0 ? NodeKind::terminal : NodeKind::intersection);
            tas[static_cast<std::size_t>(t)].push_back(n);
            assign[n] = TasId{t + 1};
        }
    }
    int count = 0;
    auto link = [&](NodeId x, NodeId y) {
        const double len = val(rng);
        b.link("l" + std::to_string(count++), x, y, len,
               {len, static_cast<double>(val(rng)), static_cast<double>(cap(rng))});
    };
    for (const auto& members : tas) {
        for (int i = 0; i < per; ++i) {
            link(members[static_cast<std::size_t>(i)], members[static_cast<std::size_t>((i + 1) % per)]);
            link(members[static_cast<std::size_t>((i + 1) % per)], members[static_cast<std::size_t>(i)]);
        }
        for (int c = 0; c < per / 2; ++c) {
            int x = local(rng), y = local(rng);
            if (x != y) link(members[static_cast<std::size_t>(x)], members[static_cast<std::size_t>(y)]);
        }
    }
    for (int t = 0; t < 2; ++t) {
        for (int k = 0; k < bridges; ++k) {
            NodeId x = tas[static_cast<std::size_t>(t)][static_cast<std::size_t>(local(rng))];
            NodeId y = tas[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(local(rng))];
            link(x, y);
            link(y, x);
        }
    }
    Network net;
    net.g = b.build();
    net.h = partition_into_tas(net.g, assign);
    return net;
}

// Chain of three TAS joined by one link each way.
inline Network chain() {
    RoadGraph::Builder b;
    b.metric("distance", MetricKind::additive).metric("time", MetricKind::additive);
    std::vector<NodeId> n;
    for (int i = 0; i < 9; ++i) n.push_back(b.node("n" + std::to_string(i)));
    auto both = [&](int x, int y, double len, double time) {
        b.link("f" + std::to_string(x) + "_" + std::to_string(y), n[static_cast<std::size_t>(x)],
               n[static_cast<std::size_t>(y)], len, {len, time});
        b.link("r" + std::to_string(x) + "_" + std::to_string(y), n[static_cast<std::size_t>(y)],
               n[static_cast<std::size_t>(x)], len, {len, time});
    };
    // TAS1 = {0,1,2}, TAS2 = {3,4,5}, TAS3 = {6,7,8}
    both(0, 1, 4, 2);
    both(1, 2, 3, 5);
    both(0, 2, 9, 1);
    both(2, 3, 2, 2);  // external
    both(3, 4, 5, 1);
    both(4, 5, 1, 6);
    both(3, 5, 7, 3);
    both(5, 6, 2, 2);  // external
    both(6, 7, 1, 1);
    both(7, 8, 1, 1);
    both(6, 8, 3, 1);
    Network net;
    net.g = b.build();
    std::map<NodeId, TasId> assign;
    for (int i = 0; i < 9; ++i) assign[n[static_cast<std::size_t>(i)]] = TasId{i / 3 + 1};
    net.h = partition_into_tas(net.g, assign);
    return net;
}

inline SignalPlan random_plan(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> phases(1, 4), half_seconds(0, 40), conn(0, 11), count(0, 4);
    SignalPlan p;
    p.intersection = NodeId{std::uniform_int_distribution<int>(0, 50)(rng)};
    const int n = phases(rng);
    double total = 0;
    for (int i = 0; i < n; ++i) {
        PhaseSpec s;
        s.id = PhaseId{10 * i + 3};
        for (int k = count(rng); k > 0; --k) s.connections.push_back(ConnectionId{conn(rng)});
        s.green = 0.5 * (half_seconds(rng) + 1);
        s.yellow = 0.5 * (half_seconds(rng) % 10);
        s.red = 0.5 * half_seconds(rng);
        total += s.length();
        p.phases.push_back(s);
    }
    p.cycle_length = total;
    p.offset = std::uniform_real_distribution<double>(0, total)(rng);
    return p;
}

inline Message random_message(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> small(0, 100), pick(0, 3);
    std::uniform_real_distribution<double> real(-1e6, 1e6);
    auto id = [&] { return small(rng); };
    switch (pick(rng)) {
        case 0:
            return VehicleReport{VehicleId{id()}, static_cast<VehicleClass>(small(rng) % 3), LinkId{id()}, small(rng) % 3,
                                 id(), small(rng) % 3, small(rng) % 3 - 1, small(rng) % 3 - 1,
                                 static_cast<std::uint64_t>(small(rng)) * 1'000'003u};
        case 1: {
            FlowTableBatch batch;
            for (int n = small(rng) % 5; n > 0; --n) {
                FlowTableEntry e;
                e.id = static_cast<std::uint64_t>(id());
                if (small(rng) % 2) e.match.road = LinkId{id()};
                if (small(rng) % 2) e.match.lane = small(rng) % 3;
                if (small(rng) % 2) e.match.vehicle = VehicleId{id()};
                if (small(rng) % 2) e.match.vehicle_class = static_cast<VehicleClass>(small(rng) % 3);
                e.match.window = {real(rng), std::abs(real(rng)) + 1e-3, std::nullopt};
                if (small(rng) % 2) e.match.window.period = std::abs(real(rng)) + 1;
                switch (small(rng) % 4) {
                    case 0: e.action = SetSignal{NodeId{id()}, PhaseId{id()}, static_cast<SignalColor>(small(rng) % 3), {ConnectionId{id()}}}; break;
                    case 1: e.action = SpeedAdvisory{real(rng)}; break;
                    case 2: e.action = LaneAssignment{small(rng) % 3}; break;
                    default: e.action = RouteSegment{{LinkId{id()}, LinkId{id()}}};
                }
                e.priority = small(rng) - 50;
                e.version = static_cast<std::uint64_t>(small(rng));
                batch.push_back(e);
            }
            return batch;
        }
        case 2: return random_plan(rng);
        default: {
            LinkStateRecord r{LinkId{id()}, static_cast<std::uint64_t>(small(rng)), {}};
            for (int k = small(rng) % 4; k > 0; --k) r.values.push_back(real(rng) / 7.0);
            return r;
        }
    }
}

inline oracle::Verdict solve_verdict(const RoadGraph& g, const RouteRequest& r, double& value) {
    try {
        value = constrained_route(g, r).values[static_cast<std::size_t>(r.objective.metric)];
        return oracle::Verdict::ok;
    } catch (const Infeasible&) {
        return oracle::Verdict::infeasible;
    } catch (const NoRoute&) {
        return oracle::Verdict::no_route;
    }
}

inline double weight_of(const std::vector<ConnectionId>& set, const std::map<ConnectionId, double>& w) {
    double total = 0;
    for (ConnectionId c : set) total += w.at(c);
    return total;
}

}  // namespace gen
