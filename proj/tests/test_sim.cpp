#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>
#include <tuple>

#include "tisim/error.hpp"
#include "tisim/sim.hpp"

using namespace tisim;

namespace {

// Two terminals joined by one link each way; both ends are dead ends.
std::string line_json(double length, int lanes, const std::string& extra = "", const std::string& sim = "") {
    const std::string len = std::to_string(length), ln = std::to_string(lanes);
    return R"({"version":1,
      "metrics":[{"name":"distance","kind":"additive"},{"name":"time","kind":"additive"}],
      "nodes":[{"name":"a","x":0,"y":0,"terminals":1},{"name":"b","x":)" + len + R"(,"y":0,"terminals":1}],
      "links":[{"name":"ab","from":"a","to":"b","length":)" + len + R"(,"lanes":)" + ln + R"(,"speed_kmh":60},
               {"name":"ba","from":"b","to":"a","length":)" + len + R"(,"lanes":)" + ln + R"(,"speed_kmh":60}])" +
           extra + R"(,"demand":{"vehicles":1},
      "sim":{"p_slow":0,"warmup":100,"duration":600,"measure_interval":100)" + sim + "}}";
}

Scenario line(double length, int lanes, const std::string& extra = "", const std::string& sim = "") {
    return parse_scenario(line_json(length, lanes, extra, sim), "line");
}

Scenario corridor() { return load_scenario("yuhangtang"); }

// Independent check that the lattice and the vehicle table describe the same state.
void expect_bijection(const Simulation& sim, const Scenario& s) {
    std::set<std::tuple<std::uint32_t, int, int>> seen;
    for (std::size_t i = 0; i < sim.vehicles().size(); ++i) {
        const auto& v = sim.vehicles()[i];
        ASSERT_TRUE(seen.emplace(v.link.value, v.lane, v.cell).second) << "shared cell";
        ASSERT_EQ(sim.occupant(v.link, v.lane, v.cell), i);
    }
    std::size_t occupied = 0;
    for (const auto& l : s.graph.links()) {
        for (int lane = 0; lane < l.lane_count; ++lane) {
            for (int c = 0; c < sim.cells(l.id); ++c) occupied += sim.occupant(l.id, lane, c).has_value();
        }
    }
    ASSERT_EQ(occupied, sim.vehicles().size());
}

double mean_follower_gap(VehicleClass cls, std::uint64_t seed) {
    Scenario s = line(7500, 1, "", R"(,"p_slow":0.2)");
    const LinkId ab{0};
    Simulation sim(s, {{ab, 0, 11, cls, 2}, {ab, 0, 10, cls, 2}}, seed);
    double total = 0;
    int n = 0;
    for (int t = 0; t < 450; ++t) {
        sim.step();
        const auto& lead = sim.vehicles()[0];
        const auto& follow = sim.vehicles()[1];
        if (lead.link != ab || follow.link != ab) break;
        if (t >= 50) {
            total += lead.cell - follow.cell - 1;
            ++n;
        }
    }
    return total / n;
}

}  // namespace

TEST(Simulation, LoneVehicleReachesVmaxThenHolds) {
    Scenario s = line(300, 1);
    Simulation sim(s, {{LinkId{0}, 0, 0, VehicleClass::human, 0}}, 1);
    sim.step();
    EXPECT_EQ(sim.vehicles()[0].speed, 1);
    sim.step();
    EXPECT_EQ(sim.vehicles()[0].speed, 2);
    for (int t = 0; t < 10; ++t) {
        sim.step();
        EXPECT_EQ(sim.vehicles()[0].speed, 2);
    }
}

TEST(Simulation, FreeFlowMeasuresLatticeSpeedExactly) {
    Scenario s = line(300, 1);
    Simulation sim(s, {{LinkId{0}, 0, 0, VehicleClass::human, 0}}, 1);
    sim.run();
    ASSERT_EQ(sim.measurements().size(), 6u);
    for (const auto& m : sim.measurements()) {
        ASSERT_TRUE(m.defined);
        EXPECT_EQ(m.mean_speed_kmh, 54.0);
    }
}

TEST(Simulation, ZeroGapBehindStoppedLeaderMeansNoMove) {
    Scenario s = line(300, 1);
    // Updates are parallel, so the follower sees the leader where it stood.
    Simulation sim(s, {{LinkId{0}, 0, 20, VehicleClass::human, 0}, {LinkId{0}, 0, 19, VehicleClass::human, 0}}, 1);
    sim.step();
    EXPECT_EQ(sim.vehicles()[1].speed, 0);
    EXPECT_EQ(sim.vehicles()[1].cell, 19);
}

TEST(Simulation, DriverlessPlatoonKeepsShorterGapThanHumans) {
    double platoon = 0, human = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        platoon += mean_follower_gap(VehicleClass::driverless_connected, seed);
        human += mean_follower_gap(VehicleClass::human, seed);
    }
    EXPECT_LT(platoon, human);
}

TEST(Simulation, ZeroAvFractionMakesNoDriverlessVehicles) {
    Scenario s = corridor();
    s.sim.connected_fraction = 0;
    Simulation sim(s, 0.0, 7);
    ASSERT_EQ(sim.vehicles().size(), 300u);
    for (const auto& v : sim.vehicles()) EXPECT_EQ(v.vehicle_class, VehicleClass::human);
}

TEST(Simulation, AvFractionSetsDriverlessCount) {
    Scenario s = corridor();
    Simulation sim(s, 0.2, 7);
    int driverless = 0;
    for (const auto& v : sim.vehicles()) driverless += v.vehicle_class == VehicleClass::driverless_connected;
    EXPECT_EQ(driverless, 60);
}

TEST(Simulation, CorridorDensityIsAboutElevenPercent) {
    Scenario s = corridor();
    Simulation sim(s, 0.0, 1);
    long cells = 0;
    for (const auto& l : s.graph.links()) cells += static_cast<long>(sim.cells(l.id)) * l.lane_count;
    EXPECT_EQ(cells, 2700);
    EXPECT_NEAR(300.0 / static_cast<double>(cells), 0.11, 0.005);
    for (const auto& v : sim.vehicles()) EXPECT_EQ(v.speed, 0);
}

TEST(Simulation, SameSeedSameInitialState) {
    Scenario s = corridor();
    Simulation a(s, 0.2, 42), b(s, 0.2, 42), c(s, 0.2, 43);
    auto key = [](const Simulation& sim) {
        std::vector<std::tuple<std::uint32_t, int, int, int, std::uint32_t>> out;
        for (const auto& v : sim.vehicles())
            out.emplace_back(v.link.value, v.lane, v.cell, static_cast<int>(v.vehicle_class), v.destination.value);
        return out;
    };
    EXPECT_EQ(key(a), key(b));
    EXPECT_NE(key(a), key(c));
}

TEST(Simulation, TooManyVehiclesIsOvercrowded) {
    Scenario s = corridor();
    s.demand.vehicles = 2701;
    EXPECT_THROW(Simulation(s, 0.0, 1), Overcrowded);
    s.demand.vehicles = 2700;
    EXPECT_NO_THROW(Simulation(s, 0.0, 1));
}

TEST(Simulation, AlwaysGreenSignalDoesNotBlock) {
    const std::string signal =
        R"(,"signals":[{"node":"b","phases":[{"id":0,"green":60,"yellow":0,"red":0,"approaches":["ab"]}]}])";
    Scenario s = line(300, 1, signal);
    Simulation sim(s, {{LinkId{0}, 0, 0, VehicleClass::human, 0}}, 1);
    sim.run();
    for (const auto& m : sim.measurements()) EXPECT_EQ(m.mean_speed_kmh, 54.0);
    EXPECT_EQ(sim.head(NodeId{1}, PhaseId{0}), SignalColor::green);
}

TEST(Simulation, FixedPlanRepeatsEverySixtyFiveTicks) {
    Scenario s = corridor();
    Simulation sim(s, 0.0, 1);
    const NodeId i1 = *s.graph.find_node("i1");
    std::vector<SignalColor> seq;
    for (int t = 0; t < 260; ++t) {
        sim.step();
        seq.push_back(*sim.head(i1, PhaseId{0}));
    }
    for (std::size_t t = 0; t + 65 < seq.size(); ++t) ASSERT_EQ(seq[t], seq[t + 65]) << t;
    EXPECT_EQ(std::count(seq.begin(), seq.begin() + 65, SignalColor::green), 30);
    EXPECT_EQ(std::count(seq.begin(), seq.begin() + 65, SignalColor::yellow), 5);
    EXPECT_EQ(std::count(seq.begin(), seq.begin() + 65, SignalColor::red), 30);
}

TEST(Simulation, NoVehicleLeavesAnApproachOnRed) {
    Scenario s = corridor();
    Simulation sim(s, 0.2, 3);
    std::uint64_t red_ticks_with_queue = 0;
    for (int t = 0; t < 2000; ++t) {
        std::vector<LinkId> before;
        for (const auto& v : sim.vehicles()) before.push_back(v.link);
        sim.step();
        for (std::size_t i = 0; i < before.size(); ++i) {
            const NodeId node = s.graph.link(before[i]).to;
            if (!s.signals.count(node)) continue;
            const auto color = *sim.head(node, PhaseId{0});
            if (color == SignalColor::green) continue;
            ++red_ticks_with_queue;
            ASSERT_EQ(sim.vehicles()[i].link, before[i]) << "vehicle " << i << " crossed on non-green at tick " << t;
        }
    }
    EXPECT_GT(red_ticks_with_queue, 0u);
    EXPECT_EQ(sim.counters().red_crossings, 0u);
}

TEST(Simulation, UnknownSignalIsRejected) {
    Scenario s = corridor();
    Simulation sim(s, 0.0, 1);
    EXPECT_THROW(sim.apply_signals({{*s.graph.find_node("west_end"), PhaseId{0}, SignalColor::green}}),
                 UnknownSignal);
    EXPECT_THROW(sim.apply_signals({{*s.graph.find_node("i1"), PhaseId{9}, SignalColor::green}}), UnknownSignal);
    sim.apply_signals({{*s.graph.find_node("i1"), PhaseId{0}, SignalColor::red}});
    EXPECT_EQ(sim.head(*s.graph.find_node("i1"), PhaseId{0}), SignalColor::red);
}

TEST(Simulation, SingleLaneNeverChangesLane) {
    Scenario s = line(300, 1);
    s.demand.vehicles = 20;
    s.sim.p_slow = 0.3;
    Simulation sim(s, 0.0, 5);
    for (int t = 0; t < 500; ++t) sim.step();
    EXPECT_EQ(sim.counters().lane_changes, 0u);
    for (const auto& v : sim.vehicles()) EXPECT_EQ(v.lane, 0);
}

TEST(Simulation, BlockedVehicleMovesToFreeLane) {
    Scenario s = line(750, 2);
    Simulation sim(s, {{LinkId{0}, 0, 21, VehicleClass::human, 0}, {LinkId{0}, 0, 20, VehicleClass::human, 2}}, 1);
    sim.step();
    EXPECT_EQ(sim.vehicles()[1].lane, 1);
    EXPECT_EQ(sim.counters().lane_changes, 1u);
}

TEST(Simulation, LaneChangeIsUnsafeWithFastFollowerAlongside) {
    Scenario s = line(750, 2);
    // A vehicle right behind the target cell at full speed makes the change unsafe.
    Simulation sim(s,
                   {{LinkId{0}, 0, 21, VehicleClass::human, 0},
                    {LinkId{0}, 0, 20, VehicleClass::human, 2},
                    {LinkId{0}, 1, 19, VehicleClass::human, 2}},
                   1);
    sim.step();
    EXPECT_EQ(sim.vehicles()[1].lane, 0);
}

TEST(Simulation, AdvisoryMapsToFlooredLatticeSpeed) {
    EXPECT_EQ(advisory_cells(36.0, 7.5, 1.0), 1);
    EXPECT_EQ(advisory_cells(54.0, 7.5, 1.0), 2);
    EXPECT_EQ(advisory_cells(53.9, 7.5, 1.0), 1);
    EXPECT_EQ(advisory_cells(5.0, 7.5, 1.0), 1);
}

TEST(Simulation, CorridorInvariantsHoldOverTenThousandTicks) {
    for (bool controlled : {false, true}) {
        Scenario s = corridor();
        s.sim.controlled = controlled;
        Simulation sim(s, 0.6, 11);
        for (int t = 0; t < 10000; ++t) {
            sim.step();
            ASSERT_EQ(sim.counters().arrived + sim.on_network(), sim.counters().injected);
            if (t % 500 == 0) expect_bijection(sim, s);
            for (const auto& v : sim.vehicles()) {
                ASSERT_GE(v.speed, 0);
                ASSERT_LE(v.speed, 2);
                if (v.advisory_cap) {
                    ASSERT_LE(v.speed, *v.advisory_cap);
                }
            }
        }
        const auto& c = sim.counters();
        EXPECT_EQ(c.conservation_violations, 0u);
        EXPECT_EQ(c.double_occupancy, 0u);
        EXPECT_EQ(c.red_crossings, 0u);
        EXPECT_EQ(c.speed_violations, 0u);
        EXPECT_GT(c.arrived, 0u);
        EXPECT_EQ(sim.on_network(), 300u);
    }
}

TEST(Simulation, EmptyNetworkGivesUndefinedMeasurement) {
    Scenario s = line(300, 1);
    s.demand.vehicles = 0;
    Simulation sim(s, 0.0, 1);
    sim.run();
    ASSERT_FALSE(sim.measurements().empty());
    for (const auto& m : sim.measurements()) {
        EXPECT_FALSE(m.defined);
        EXPECT_EQ(m.vehicle_ticks, 0u);
    }
    EXPECT_FALSE(overall_mean_speed(sim.measurements()).has_value());
}

TEST(Simulation, OverallMeanIsWeightedMeanOfClassMeans) {
    Scenario s = corridor();
    s.sim.duration = 1200;
    Simulation sim(s, 0.6, 2);
    sim.run();
    for (const auto& m : sim.measurements()) {
        ASSERT_TRUE(m.defined);
        double sum = 0;
        std::uint64_t n = 0;
        for (const auto& [cls, cm] : m.per_class) {
            sum += cm.mean_speed_kmh * static_cast<double>(cm.vehicle_ticks);
            n += cm.vehicle_ticks;
        }
        EXPECT_EQ(n, m.vehicle_ticks);
        EXPECT_NEAR(sum / static_cast<double>(n), m.mean_speed_kmh, 1e-9);
        EXPECT_EQ(m.vehicle_ticks, 300u * s.sim.measure_interval);
    }
}

TEST(Simulation, SameSeedGivesIdenticalSeries) {
    for (bool controlled : {false, true}) {
        Scenario s = corridor();
        s.sim.controlled = controlled;
        s.sim.duration = 1200;
        Simulation a(s, 0.2, 9), b(s, 0.2, 9);
        a.run();
        b.run();
        ASSERT_EQ(a.measurements().size(), b.measurements().size());
        for (std::size_t i = 0; i < a.measurements().size(); ++i) {
            EXPECT_EQ(a.measurements()[i].mean_speed_kmh, b.measurements()[i].mean_speed_kmh);
            EXPECT_EQ(a.measurements()[i].vehicle_ticks, b.measurements()[i].vehicle_ticks);
        }
        for (std::size_t i = 0; i < a.vehicles().size(); ++i) {
            EXPECT_EQ(a.vehicles()[i].cell, b.vehicles()[i].cell);
            EXPECT_EQ(a.vehicles()[i].link, b.vehicles()[i].link);
        }
    }
}

TEST(Simulation, ConfigValidationRejectsBadValues) {
    Scenario s = corridor();
    s.sim.duration = 1000;  // not a multiple of the interval
    EXPECT_THROW(Simulation(s, 0.0, 1), ValidationError);
    s = corridor();
    s.sim.p_slow = 1.5;
    EXPECT_THROW(Simulation(s, 0.0, 1), ValidationError);
    s = corridor();
    EXPECT_THROW(Simulation(s, 1.5, 1), ValidationError);
}
