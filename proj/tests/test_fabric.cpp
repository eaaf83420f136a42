#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "generators.hpp"
#include "oracles.hpp"
#include "tisim/error.hpp"
#include "tisim/fabric.hpp"
#include "tisim/queueing.hpp"

using namespace tisim;

namespace {

using gen::weight_of;

ConnectionId movement_from(const SwitchFabric& f, int arm, Movement m) {
    for (const auto& c : f.connections) {
        if (f.port(c.in_port).arm == arm && c.movement == m) return c.id;
    }
    throw std::logic_error("movement not found");
}

// Ports 0..n-1 are inputs, each with one connection to its own output, every
// pair of connections crossing.
SwitchFabric all_conflicting(int n) {
    SwitchFabric f;
    for (int i = 0; i < 2 * n; ++i) {
        Port p;
        p.id = PortId{i};
        p.direction = i < n ? PortDirection::input : PortDirection::output;
        f.ports.push_back(p);
    }
    for (int i = 0; i < n; ++i) f.connections.push_back({ConnectionId{i}, PortId{i}, PortId{n + i}, Movement::through, {}});
    f.conflicts = ConflictMatrix(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) f.conflicts.set(ConnectionId{i}, ConnectionId{j}, ConflictKind::cross);
    return f;
}

}  // namespace

TEST(StandardFabric, FourArmSingleLaneCounts) {
    const auto f = build_standard_fabric(4, 1);
    EXPECT_EQ(f.ports.size(), 8u);
    EXPECT_EQ(f.input_ports().size(), 4u);
    EXPECT_EQ(f.connections.size(), 12u);
    for (const auto& c : f.connections) EXPECT_NE(c.movement, Movement::u_turn);
}

TEST(StandardFabric, OpposingThroughMovementsDoNotConflict) {
    const auto f = build_standard_fabric(4, 1);
    EXPECT_EQ(f.conflicts.kind(movement_from(f, 0, Movement::through), movement_from(f, 2, Movement::through)),
              ConflictKind::none);
    EXPECT_EQ(f.conflicts.kind(movement_from(f, 1, Movement::through), movement_from(f, 3, Movement::through)),
              ConflictKind::none);
    EXPECT_EQ(f.conflicts.kind(movement_from(f, 0, Movement::through), movement_from(f, 1, Movement::through)),
              ConflictKind::cross);
}

TEST(StandardFabric, MatrixMatchesSegmentIntersection) {
    for (int arms : {3, 4}) {
        for (int lanes : {1, 2, 3}) {
            const auto f = build_standard_fabric(arms, lanes);
            for (const auto& a : f.connections) {
                EXPECT_EQ(f.conflicts.kind(a.id, a.id), ConflictKind::none);
                for (const auto& b : f.connections) {
                    if (a.id == b.id) continue;
                    EXPECT_EQ(f.conflicts.kind(a.id, b.id), f.conflicts.kind(b.id, a.id));
                    EXPECT_EQ(f.conflicts.kind(a.id, b.id), oracle::geometric_kind(f, a, b))
                        << arms << " arms, " << lanes << " lanes: " << a.id << " vs " << b.id;
                }
            }
        }
    }
}

TEST(StandardFabric, MovementsFollowArmGeometry) {
    const auto f = build_standard_fabric(4, 1);
    for (const auto& c : f.connections) {
        const int turn = (f.port(c.out_port).arm - f.port(c.in_port).arm + 4) % 4;
        const Movement expected = turn == 1 ? Movement::right : turn == 2 ? Movement::through : Movement::left;
        EXPECT_EQ(c.movement, expected);
    }
    EXPECT_EQ(build_standard_fabric(3, 1).connections.size(), 6u);
}

TEST(StandardFabric, RejectsUnsupportedGeometry) {
    EXPECT_THROW((void)build_standard_fabric(5, 1), UnsupportedGeometry);
    EXPECT_THROW((void)build_standard_fabric(4, 0), UnsupportedGeometry);
}

TEST(StandardFabric, MatrixTextIsSquare) {
    const auto f = build_standard_fabric(4, 1);
    const std::string text = conflict_matrix_text(f);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
    EXPECT_EQ(text.substr(0, 1), "0");
}

TEST(NodeFabric, CrossroadsMatchesStandardLayout) {
    RoadGraph::Builder b;
    b.metric("distance", MetricKind::additive).metric("time", MetricKind::additive);
    NodeId c = b.node("C", NodeKind::intersection, {0, 0});
    const Position at[] = {{100, 0}, {0, 100}, {-100, 0}, {0, -100}};
    for (int i = 0; i < 4; ++i) {
        NodeId n = b.node("A" + std::to_string(i), NodeKind::intersection, at[i]);
        b.link("in" + std::to_string(i), n, c, 100);
        b.link("out" + std::to_string(i), c, n, 100);
    }
    const RoadGraph g = b.build();
    const auto f = build_node_fabric(g, c);
    const auto ref = build_standard_fabric(4, 1);
    EXPECT_EQ(f.conflicts, ref.conflicts);
    ASSERT_EQ(f.connections.size(), ref.connections.size());
    for (std::size_t i = 0; i < f.connections.size(); ++i) EXPECT_EQ(f.connections[i].movement, ref.connections[i].movement);
    EXPECT_EQ(f.port(PortId{0}).lane.link, g.find_link("in0"));
}

TEST(NodeFabric, DeadEndTurnsAround) {
    RoadGraph::Builder b;
    b.metric("distance", MetricKind::additive);
    NodeId a = b.node("A", NodeKind::terminal, {0, 0});
    NodeId z = b.node("Z", NodeKind::intersection, {50, 0});
    b.link("az", a, z, 50, {}, 2);
    b.link("za", z, a, 50, {}, 2);
    const auto f = build_node_fabric(b.build(), a);
    ASSERT_EQ(f.connections.size(), 2u);
    for (const auto& c : f.connections) {
        EXPECT_EQ(c.movement, Movement::u_turn);
        EXPECT_EQ(f.port(c.in_port).lane.lane, f.port(c.out_port).lane.lane);
    }
    EXPECT_EQ(f.conflicts.kind(ConnectionId{0}, ConnectionId{1}), ConflictKind::none);
}

TEST(ConflictFreeSets, AllConflictingGivesSingletons) {
    const auto f = all_conflicting(4);
    const auto sets = conflict_free_sets(f);
    ASSERT_EQ(sets.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(sets[i], std::vector<ConnectionId>{ConnectionId{static_cast<int>(i)}});
    EXPECT_TRUE(conflict_free_sets(SwitchFabric{}).empty());
}

TEST(ConflictFreeSets, StandardPhaseGroupsPresent) {
    const auto f = build_standard_fabric(4, 1);
    const auto sets = conflict_free_sets(f);
    EXPECT_EQ(sets, oracle::maximal_compatible_sets(f));
    for (int axis : {0, 1}) {
        std::vector<ConnectionId> group{movement_from(f, axis, Movement::through), movement_from(f, axis, Movement::right),
                                        movement_from(f, axis + 2, Movement::through),
                                        movement_from(f, axis + 2, Movement::right)};
        std::sort(group.begin(), group.end());
        EXPECT_NE(std::find(sets.begin(), sets.end(), group), sets.end());
    }
}

TEST(ConflictFreeSets, MatchesEnumerationOnRandomFabrics) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        auto f = oracle::random_fabric(rng, 4, 4, 12, 0.3);
        f.permissive_right = trial % 2 == 0;
        EXPECT_EQ(conflict_free_sets(f), oracle::maximal_compatible_sets(f));
    }
}

TEST(Matching, EmptyQueuesGrantNothing) {
    const auto f = build_standard_fabric(4, 1);
    EXPECT_TRUE(match_round_robin(f, 0).empty());
    EXPECT_TRUE(match_longest_queue_first(f).empty());
    std::map<ConnectionId, double> zero;
    for (const auto& c : f.connections) zero[c.id] = 0;
    EXPECT_TRUE(match_max_weight(f, zero).empty());
}

TEST(Matching, SingleRequestGranted) {
    auto f = build_standard_fabric(4, 1);
    enqueue(f, VehicleId{1}, ConnectionId{5});
    EXPECT_EQ(match_round_robin(f, 3), std::vector<ConnectionId>{ConnectionId{5}});
    EXPECT_EQ(match_longest_queue_first(f), std::vector<ConnectionId>{ConnectionId{5}});
}

TEST(Matching, RoundRobinServesEveryPort) {
    auto f = build_standard_fabric(4, 1);
    // every approach wants to turn left, and all lefts conflict
    int next = 0;
    for (int arm = 0; arm < 4; ++arm) {
        for (int k = 0; k < 3; ++k) enqueue(f, VehicleId{next++}, movement_from(f, arm, Movement::left));
    }
    std::set<PortId> served;
    const auto inputs = f.input_ports();
    for (std::uint64_t tick = 0; tick < inputs.size(); ++tick) {
        const auto grants = match_round_robin(f, tick);
        for (const auto& r : serve(f, grants)) {
            served.insert(f.connection(r.connection).in_port);
            enqueue(f, r.vehicle, r.connection);
        }
    }
    EXPECT_EQ(served.size(), inputs.size());
}

TEST(Matching, LongestQueueFirstOrder) {
    auto f = all_conflicting(3);
    const int lengths[] = {5, 3, 1};
    int v = 0;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < lengths[i]; ++k) enqueue(f, VehicleId{v++}, ConnectionId{i});
    EXPECT_EQ(match_longest_queue_first(f), std::vector<ConnectionId>{ConnectionId{0}});

    auto g = all_conflicting(3);
    for (int i = 2; i >= 0; --i) enqueue(g, VehicleId{i}, ConnectionId{i});
    EXPECT_EQ(match_longest_queue_first(g), std::vector<ConnectionId>{ConnectionId{0}});
}

TEST(Matching, MaxWeightCrossbar) {
    SwitchFabric f;
    for (int i = 0; i < 4; ++i) {
        Port p;
        p.id = PortId{i};
        p.direction = i < 2 ? PortDirection::input : PortDirection::output;
        f.ports.push_back(p);
    }
    // c0: in0->out0, c1: in0->out1, c2: in1->out0, c3: in1->out1
    for (int i = 0; i < 4; ++i)
        f.connections.push_back({ConnectionId{i}, PortId{i / 2}, PortId{2 + i % 2}, Movement::through, {}});
    f.conflicts = ConflictMatrix(4);
    f.conflicts.set(ConnectionId{0}, ConnectionId{1}, ConflictKind::diverge);
    f.conflicts.set(ConnectionId{2}, ConnectionId{3}, ConflictKind::diverge);
    f.conflicts.set(ConnectionId{0}, ConnectionId{2}, ConflictKind::merge);
    f.conflicts.set(ConnectionId{1}, ConnectionId{3}, ConflictKind::merge);
    const std::map<ConnectionId, double> w{{ConnectionId{0}, 5}, {ConnectionId{1}, 1}, {ConnectionId{2}, 1}, {ConnectionId{3}, 5}};
    const auto m = match_max_weight(f, w);
    EXPECT_EQ(m, (std::vector<ConnectionId>{ConnectionId{0}, ConnectionId{3}}));
    EXPECT_EQ(weight_of(m, w), 10.0);
}

TEST(Matching, MaxWeightMatchesBruteForce) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> wd(0, 9), size(1, 12);
    for (int trial = 0; trial < 100; ++trial) {
        const auto f = oracle::random_fabric(rng, 4, 4, size(rng), 0.35);
        std::map<ConnectionId, double> w;
        for (const auto& c : f.connections) w[c.id] = wd(rng);
        const auto m = match_max_weight(f, w);
        const auto expected = oracle::brute_max_weight(f, w);
        EXPECT_TRUE(f.grant_safe(m));
        EXPECT_EQ(weight_of(m, w), expected.weight);
        EXPECT_EQ(m, expected.set);
    }
}

TEST(Matching, PreconditionsAndLimits) {
    std::mt19937_64 rng(1);
    const auto f = oracle::random_fabric(rng, 6, 6, 30, 0.2);
    std::map<ConnectionId, double> w;
    for (const auto& c : f.connections) w[c.id] = 1;
    EXPECT_THROW((void)match_max_weight(f, w), TooLarge);
    EXPECT_THROW((void)match_max_weight(f, {{ConnectionId{0}, -1.0}}), PreconditionError);
}

TEST(Matching, RandomTicksAreSafeConservingAndFifo) {
    std::mt19937_64 rng(5);
    auto f = build_standard_fabric(4, 2);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(f.connections.size()) - 1), burst(0, 3), algo(0, 2);
    std::map<PortId, std::deque<VehicleId>> arrival_order;
    int next = 0;
    std::size_t enq = 0, deq = 0;
    for (std::uint64_t tick = 0; tick < 2000; ++tick) {
        const std::size_t before = f.queued();
        std::size_t in_tick = 0;
        for (int k = burst(rng); k > 0; --k) {
            const ConnectionId c{pick(rng)};
            enqueue(f, VehicleId{next}, c);
            arrival_order[f.connection(c).in_port].push_back(VehicleId{next});
            ++next;
            ++in_tick;
        }
        std::vector<ConnectionId> grants;
        switch (algo(rng)) {
            case 0: grants = match_round_robin(f, tick); break;
            case 1: grants = match_longest_queue_first(f); break;
            default: {
                std::map<ConnectionId, double> w;
                for (const auto& p : f.ports)
                    if (p.direction == PortDirection::input && !p.queue.empty())
                        w[p.queue.front().connection] = static_cast<double>(p.queue.size());
                grants = match_max_weight(f, w);
                const auto lqf = match_longest_queue_first(f);
                EXPECT_GE(weight_of(grants, w), weight_of(lqf, w));
            }
        }
        ASSERT_TRUE(f.grant_safe(grants));
        if (f.queued() > 0) {
            EXPECT_FALSE(grants.empty());
        }
        const auto served = serve(f, grants);
        for (const auto& r : served) {
            auto& order = arrival_order[f.connection(r.connection).in_port];
            ASSERT_EQ(order.front(), r.vehicle);
            order.pop_front();
        }
        enq += in_tick;
        deq += served.size();
        EXPECT_EQ(f.queued(), before + in_tick - served.size());
    }
    EXPECT_EQ(enq - deq, f.queued());
}

TEST(Matching, LongestQueueFirstIsMaximal) {
    std::mt19937_64 rng(90);
    std::uniform_int_distribution<int> len(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        auto f = oracle::random_fabric(rng, 5, 5, 12, 0.4);
        int v = 0;
        for (const auto& c : f.connections)
            for (int k = len(rng); k > 0; --k) enqueue(f, VehicleId{v++}, c.id);
        const auto m = match_longest_queue_first(f);
        ASSERT_TRUE(f.grant_safe(m));
        for (ConnectionId c : head_of_line(f)) {
            if (std::find(m.begin(), m.end(), c) != m.end()) continue;
            auto extended = m;
            extended.push_back(c);
            EXPECT_FALSE(f.grant_safe(extended));
        }
    }
}

TEST(FabricRouteValue, AggregatesInternalPath) {
    auto f = build_standard_fabric(4, 1);
    f.metrics = {{0, "time", MetricKind::additive, Direction::minimize},
                 {1, "capacity", MetricKind::concave_min, Direction::maximize}};
    const auto& c = f.connections[0];
    f.port(c.in_port).metric_values = {1, 30};
    f.port(c.out_port).metric_values = {1, 40};
    f.connections[0].metric_values = {2, 20};
    EXPECT_EQ(fabric_route_value(f, c.in_port, c.out_port, 0), 4.0);
    EXPECT_EQ(fabric_route_value(f, c.in_port, c.out_port, 1), 20.0);
    const double nodes[] = {30, 40}, edges[] = {20};
    EXPECT_EQ(fabric_route_value(f, c.in_port, c.out_port, 1), aggregate_path(MetricKind::concave_min, nodes, edges));
    EXPECT_THROW((void)fabric_route_value(f, c.out_port, c.in_port, 0), NoConnection);
}

TEST(Queueing, AnalyticValues) {
    EXPECT_EQ(expected_wait_mm1(0, 1), 0.0);
    EXPECT_EQ(expected_wait_md1(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(expected_wait_mm1(0.5, 1), 1.0);
    EXPECT_DOUBLE_EQ(expected_wait_mm1(0.9, 1), 9.0);
    EXPECT_DOUBLE_EQ(expected_wait_md1(0.5, 1), 0.5);
    for (double l : {0.1, 0.4, 0.7}) EXPECT_DOUBLE_EQ(expected_wait_md1(l, 2), expected_wait_mm1(l, 2) / 2);
    EXPECT_THROW((void)expected_wait_mm1(1, 1), UnstableQueue);
    EXPECT_THROW((void)expected_wait_md1(2, 1), UnstableQueue);
}

TEST(Queueing, FormulasMatchLindleyRecursion) {
    for (double rho : {0.3, 0.5, 0.8}) {
        for (auto model : {QueueModel::mm1, QueueModel::md1}) {
            const double analytic = expected_wait(model, rho, 1.0);
            const double sim = oracle::lindley_mean_wait(model, rho, 1.0, 1'000'000, 2024);
            EXPECT_NEAR(sim / analytic, 1.0, 0.05) << "rho " << rho;
        }
    }
}

TEST(Queueing, EventSimulationAgreesWithFormulas) {
    for (auto model : {QueueModel::mm1, QueueModel::md1}) {
        const auto r = simulate_queue(model, 0.5, 1.0, 1'000'000, 99);
        EXPECT_EQ(r.customers, 1'000'000u);
        EXPECT_NEAR(r.mean_wait / expected_wait(model, 0.5, 1.0), 1.0, 0.05);
    }
}
