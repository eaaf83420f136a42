// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any mandatory check fails. Soft targets are reported but never fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "generators.hpp"
#include "oracles.hpp"
#include "tisim/codec.hpp"
#include "tisim/experiment.hpp"
#include "tisim/fabric.hpp"
#include "tisim/hierarchical.hpp"
#include "tisim/queueing.hpp"
#include "tisim/scenario.hpp"
#include "tisim/sim.hpp"

using namespace tisim;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome routing_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> nodes(2, 8), bound_time(5, 60), bound_cap(1, 7), coin(0, 2);
    int match = 0, total = 0, feasible = 0, infeasible = 0, no_route = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = nodes(rng);
        const int links = std::uniform_int_distribution<int>(n - 1, 14)(rng);
        const RoadGraph g = oracle::random_graph(rng, n, links);
        RouteRequest r{NodeId{0}, NodeId{n - 1}, {coin(rng) == 0 ? 1 : 0, Direction::minimize}, {}, {}};
        if (coin(rng)) r.constraints.push_back({1, static_cast<double>(bound_time(rng)), Sense::at_most});
        if (coin(rng)) r.constraints.push_back({2, static_cast<double>(bound_cap(rng)), Sense::at_least});
        const auto expected = oracle::brute_force(g, r);
        double value = 0;
        const auto got = gen::solve_verdict(g, r, value);
        ++total;
        if (got == expected.verdict && (got != oracle::Verdict::ok || value == expected.value)) ++match;
        feasible += expected.verdict == oracle::Verdict::ok;
        infeasible += expected.verdict == oracle::Verdict::infeasible;
        no_route += expected.verdict == oracle::Verdict::no_route;
    }
    const double secs = seconds_since(t0);
    return {match == total && secs < 10,
            fmt("routing oracle: %d/%d match exhaustive enumeration (%d feasible, %d infeasible, %d no route), "
                "%.2f s (limit 10 s)",
                match, total, feasible, infeasible, no_route, secs)};
}

Outcome matching_oracle() {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> wd(0, 9), size(1, 12);
    int optimal = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto f = oracle::random_fabric(rng, 4, 4, size(rng), 0.35);
        std::map<ConnectionId, double> w;
        for (const auto& c : f.connections) w[c.id] = wd(rng);
        const auto m = match_max_weight(f, w);
        optimal += f.grant_safe(m) && gen::weight_of(m, w) == oracle::brute_max_weight(f, w).weight;
    }

    // Random queue states on standard fabrics, all three schedulers.
    int safe = 0, ticks = 0;
    std::vector<SwitchFabric> fabrics{build_standard_fabric(3, 1), build_standard_fabric(4, 1),
                                      build_standard_fabric(4, 2), build_standard_fabric(4, 3)};
    std::uniform_int_distribution<int> which(0, 3), burst(0, 4);
    int next = 0;
    for (std::uint64_t tick = 0; tick < 10000; ++tick) {
        SwitchFabric& f = fabrics[static_cast<std::size_t>(which(rng))];
        std::uniform_int_distribution<int> pick(0, static_cast<int>(f.connections.size()) - 1);
        for (int k = burst(rng); k > 0; --k) enqueue(f, VehicleId{next++}, ConnectionId{pick(rng)});
        std::map<ConnectionId, double> w;
        for (const auto& p : f.ports) {
            if (p.direction == PortDirection::input && !p.queue.empty())
                w[p.queue.front().connection] = static_cast<double>(p.queue.size());
        }
        const auto rr = match_round_robin(f, tick);
        const auto lqf = match_longest_queue_first(f);
        bool ok = f.grant_safe(rr) && f.grant_safe(lqf);
        if (w.size() <= 24) {
            const auto mw = match_max_weight(f, w);
            ok = ok && f.grant_safe(mw);
        }
        safe += ok;
        ++ticks;
        (void)serve(f, (tick % 3 == 0) ? rr : lqf);
    }
    return {optimal == 100 && safe == ticks,
            fmt("matching oracle: max-weight optimal on %d/100 random fabrics; conflict-free grants in %d/%d ticks",
                optimal, safe, ticks)};
}

Outcome queueing_and_conflicts() {
    std::string detail = "queueing:";
    bool ok = true;
    for (double rho : {0.3, 0.5, 0.8}) {
        for (auto model : {QueueModel::mm1, QueueModel::md1}) {
            const double analytic = expected_wait(model, rho, 1.0);
            const double sim = simulate_queue(model, rho, 1.0, 1'000'000, 7).mean_wait;
            const double rel = std::abs(sim - analytic) / analytic;
            ok = ok && rel < 0.05;
            detail += fmt(" %s@%.1f %.2f%%", model == QueueModel::mm1 ? "M/M/1" : "M/D/1", rho, rel * 100);
        }
    }
    const Scenario fig3 = load_scenario("fig3");
    const auto& f = fig3.fabrics.at(*fig3.graph.find_node("center"));
    int pairs = 0, agree = 0;
    for (const auto& a : f.connections) {
        for (const auto& b : f.connections) {
            if (a.id == b.id) continue;
            ++pairs;
            agree += f.conflicts.kind(a.id, b.id) == oracle::geometric_kind(f, a, b);
        }
    }
    ok = ok && agree == pairs;
    detail += fmt(" (limit 5%%); fig3 fixture conflict matrix matches segment intersection on %d/%d pairs", agree, pairs);
    return {ok, detail};
}

Outcome corridor_experiment() {
    const Scenario s = load_scenario("yuhangtang");
    const auto t0 = Clock::now();
    const auto result = run_experiment(s, experiment_options(s));
    const double secs = seconds_since(t0);
    const std::map<double, double> targets{{0.0, 9.65}, {0.2, 13.59}, {0.6, 20.58}};
    bool increasing = true, positive_at_zero = false, soft = true;
    std::optional<double> prev;
    std::string detail = "corridor sweep:";
    for (const auto& row : result.summary) {
        const double imp = row.improvement_pct.value_or(NAN);
        if (row.fraction == 0.0) positive_at_zero = imp > 0;
        if (prev && !(imp > *prev)) increasing = false;
        prev = imp;
        const auto target = targets.find(row.fraction);
        if (target != targets.end() && !(std::abs(imp - target->second) <= 6.0)) soft = false;
        detail += fmt(" av %.1f %+.2f%% (+/- %.2f, %.2f -> %.2f km/h);", row.fraction, imp,
                      row.improvement_std.value_or(0), row.baseline_kmh.value_or(NAN), row.controlled_kmh.value_or(NAN));
    }
    const bool ok = positive_at_zero && increasing && result.summary.size() == 3 && secs < 300;
    detail += fmt(" positive at 0: %s, strictly increasing: %s, %.1f s (limit 300 s)", positive_at_zero ? "yes" : "no",
                  increasing ? "yes" : "no", secs);
    detail += fmt("\n    soft target within 6 points of 9.65 / 13.59 / 20.58: %s", soft ? "met" : "MISSED (reported, not required)");
    return {ok, detail};
}

std::string fingerprint(const Simulation& sim) {
    std::string out;
    for (const auto& m : sim.measurements()) out += fmt("%llu %a %llu;", static_cast<unsigned long long>(m.interval),
                                                        m.mean_speed_kmh, static_cast<unsigned long long>(m.vehicle_ticks));
    for (const auto& v : sim.vehicles()) out += fmt("%u %d %d %d;", v.link.value, v.lane, v.cell, v.speed);
    return out;
}

Outcome simulation_invariants() {
    Scenario s = load_scenario("yuhangtang");
    s.sim.controlled = true;
    s.sim.warmup = 400;
    s.sim.duration = 9600;
    auto once = [&](SimCounters& c) {
        Simulation sim(s, 0.6, 2024);
        std::uint64_t conservation = 0;
        while (sim.clock() < 10000) {
            sim.step();
            conservation += sim.counters().arrived + sim.on_network() != sim.counters().injected;
        }
        c = sim.counters();
        c.conservation_violations += conservation;
        return fingerprint(sim);
    };
    SimCounters a, b;
    const std::string first = once(a), second = once(b);
    const bool ok = a.conservation_violations == 0 && a.double_occupancy == 0 && a.red_crossings == 0 &&
                    a.speed_violations == 0 && first == second;
    return {ok, fmt("10^4-tick corridor run: %llu conservation, %llu double-occupancy, %llu red-light, %llu speed "
                    "violations; %llu arrivals; rerun %s",
                    static_cast<unsigned long long>(a.conservation_violations),
                    static_cast<unsigned long long>(a.double_occupancy),
                    static_cast<unsigned long long>(a.red_crossings),
                    static_cast<unsigned long long>(a.speed_violations), static_cast<unsigned long long>(a.arrived),
                    first == second ? "byte-identical" : "DIFFERS")};
}

Outcome ring_road() {
    const Scenario s = load_scenario("ring");
    ExperimentOptions o = experiment_options(s);
    o.replications = 10;
    const auto result = run_experiment(s, o);
    bool ok = !result.summary.empty();
    std::string detail = "ring road, 10 seeds:";
    for (const auto& row : result.summary) {
        ok = ok && row.controlled_kmh && row.baseline_kmh && *row.controlled_kmh > *row.baseline_kmh;
        detail += fmt(" av %.1f baseline %.3f km/h, controlled %.3f km/h (%+.2f%%)", row.fraction,
                      row.baseline_kmh.value_or(NAN), row.controlled_kmh.value_or(NAN),
                      row.improvement_pct.value_or(NAN));
    }
    return {ok, detail};
}

Outcome protocol() {
    std::mt19937_64 rng(4242);
    int round_trips = 0;
    for (int i = 0; i < 10000; ++i) {
        const Message m = gen::random_message(rng);
        const auto frame = encode_message(m);
        try {
            const Message back = decode_message(frame);
            round_trips += back == m && encode_message(back) == frame;
        } catch (const CodecError&) {
        }
    }
    int detected = 0, crc_expected = 0, crc_flagged = 0;
    std::uniform_int_distribution<int> flip(1, 255);
    for (int i = 0; i < 10000; ++i) {
        auto frame = encode_message(gen::random_message(rng));
        const auto at = std::uniform_int_distribution<std::size_t>(0, frame.size() - 1)(rng);
        frame[at] ^= static_cast<std::uint8_t>(flip(rng));
        const bool body = at >= frame_header_size;
        crc_expected += body;
        try {
            (void)decode_message(frame);
        } catch (const BadCrc&) {
            ++detected;
            crc_flagged += body;
        } catch (const CodecError&) {
            ++detected;
        }
    }
    return {round_trips == 10000 && detected == 10000 && crc_flagged == crc_expected,
            fmt("codec: %d/10000 frames round-trip bit-exact; %d/10000 single-byte corruptions detected, "
                "%d/%d payload or checksum corruptions reported as BadCrc (header corruptions raise the "
                "matching header error)",
                round_trips, detected, crc_flagged, crc_expected)};
}

Outcome hierarchical() {
    const Scenario s = load_scenario("three_tas");
    int pairs = 0, equal = 0;
    for (const auto& a : s.graph.nodes()) {
        for (const auto& b : s.graph.nodes()) {
            if (s.hierarchy.tas_of(a.id) == s.hierarchy.tas_of(b.id)) continue;
            for (int k : {0, 1}) {
                const RouteRequest r{a.id, b.id, {k, Direction::minimize}, {}, {}};
                ++pairs;
                const auto h = hierarchical_route(s.hierarchy, s.graph, r);
                const auto flat = constrained_route(s.graph, r);
                equal += h.path.values[static_cast<std::size_t>(k)] == flat.values[static_cast<std::size_t>(k)];
            }
        }
    }
    std::mt19937_64 rng(808);
    int valid = 0, trials = 0;
    for (int t = 0; t < 50; ++t) {
        const auto net = gen::random_three_tas(rng, 5, 2);
        const RouteRequest r{NodeId{0}, NodeId{14}, {0, Direction::minimize}, {}, {}};
        ++trials;
        try {
            const auto h = hierarchical_route(net.h, net.g, r);
            const auto flat = constrained_route(net.g, r);
            valid += is_valid_path(net.g, h.path, r.source, r.destination) && h.path.values[0] >= flat.values[0];
        } catch (const Error&) {
        }
    }
    return {equal == pairs && valid == trials,
            fmt("hierarchical routing: equals flat optimum on %d/%d cross-TAS requests of the single-border fixture; "
                "valid path no better than flat on %d/%d random 3-TAS networks",
                equal, pairs, valid, trials)};
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, routing_oracle},        {2, matching_oracle}, {3, queueing_and_conflicts}, {4, corridor_experiment},
        {5, simulation_invariants}, {6, ring_road},       {7, protocol},               {8, hierarchical},
    };
    int failed = 0;
    for (const auto& [n, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("raised ") + e.what()};
        }
        failed += !o.pass;
        std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
