#include "tisim/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "tisim/error.hpp"
#include "tisim/experiment.hpp"
#include "tisim/hierarchical.hpp"
#include "tisim/queueing.hpp"
#include "tisim/routing.hpp"
#include "tisim/scenario.hpp"
#include "tisim/sim.hpp"

namespace tisim {

namespace {

std::string num(double v, int digits = 6) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void write_file(const std::string& path, const std::string& text) {
    std::error_code ec;
    const auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir, ec);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << text;
    if (!f.flush()) throw IoError("cannot write '" + path + "'");
}

/// runs.csv -> runs_summary.csv
std::string summary_path(const std::string& out) {
    std::filesystem::path p(out);
    const std::string stem = p.stem().string();
    const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
    return (p.parent_path() / (stem + "_summary" + ext)).string();
}

struct Common {
    std::string scenario;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::string out;
};

Scenario load(const Common& c) {
    Scenario s = load_scenario(c.scenario);
    for (const auto& o : c.overrides) apply_override(s, o);
    return s;
}

NodeId resolve_node(const Scenario& s, const std::string& ref) {
    if (auto n = s.graph.find_node(ref)) return *n;
    if (std::count(ref.begin(), ref.end(), '.') >= 1 && std::isdigit(static_cast<unsigned char>(ref.front()))) {
        if (auto n = s.hierarchy.resolve(s.graph, parse_address(ref))) return *n;
    }
    throw UnknownNode("no node or address '" + ref + "'");
}

std::pair<int, double> metric_bound(const RoadGraph& g, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ValidationError("constraint '" + spec + "' is not metric=value");
    const auto k = g.metric_index(spec.substr(0, eq));
    if (!k) throw ValidationError("unknown metric '" + spec.substr(0, eq) + "'");
    try {
        std::size_t used = 0;
        const double v = std::stod(spec.substr(eq + 1), &used);
        if (used != spec.size() - eq - 1) throw std::invalid_argument("trailing");
        return {*k, v};
    } catch (const std::logic_error&) {
        throw ValidationError("constraint '" + spec + "' has no numeric bound");
    }
}

void print_path(const Scenario& s, const Path& p, std::ostream& out) {
    out << "path:";
    for (std::size_t i = 0; i < p.nodes.size(); ++i) out << (i ? " -> " : " ") << s.graph.node(p.nodes[i]).name;
    out << "\nlinks:";
    for (auto l : p.links) out << ' ' << s.graph.link(l).name;
    out << '\n';
    const auto specs = s.graph.metric_specs();
    for (std::size_t k = 0; k < specs.size() && k < p.values.size(); ++k) {
        out << specs[k].name << " = " << num(p.values[k], 10) << '\n';
    }
}

int cmd_validate(const Common& c, std::ostream& out) {
    out << summary_line(load(c)) << '\n';
    return exit_ok;
}

struct RouteArgs {
    std::string from, to, objective;
    std::vector<std::string> at_most, at_least;
    bool hierarchical = false;
};

int cmd_route(const Common& c, const RouteArgs& a, std::ostream& out) {
    const Scenario s = load(c);
    RouteRequest req;
    req.source = resolve_node(s, a.from);
    req.destination = resolve_node(s, a.to);
    if (!a.objective.empty()) {
        const auto k = s.graph.metric_index(a.objective);
        if (!k) throw ValidationError("unknown metric '" + a.objective + "'");
        req.objective.metric = *k;
    }
    req.objective.direction = s.graph.metric_specs()[static_cast<std::size_t>(req.objective.metric)].direction;
    for (const auto& spec : a.at_most) {
        auto [k, v] = metric_bound(s.graph, spec);
        req.constraints.push_back({k, v, Sense::at_most});
    }
    for (const auto& spec : a.at_least) {
        auto [k, v] = metric_bound(s.graph, spec);
        req.constraints.push_back({k, v, Sense::at_least});
    }
    if (a.hierarchical) {
        const auto r = hierarchical_route(s.hierarchy, s.graph, req);
        print_path(s, r.path, out);
        out << "tas:";
        for (auto t : r.tas_sequence) out << ' ' << t.value;
        out << '\n';
    } else {
        print_path(s, constrained_route(s.graph, req), out);
    }
    return exit_ok;
}

int cmd_simulate(const Common& c, bool controlled, std::ostream& out) {
    Scenario s = load(c);
    s.sim.controlled = controlled;
    const std::uint64_t seed = c.seed.value_or(s.sim.seed);
    Simulation sim(s, s.demand.av_fraction, seed);
    sim.run();
    out << s.name << ": " << s.demand.vehicles << " vehicles, av_fraction " << fixed(s.demand.av_fraction, 2)
        << ", " << (controlled ? "controlled" : "baseline") << ", seed " << seed << '\n';
    for (const auto& m : sim.measurements()) {
        out << "interval " << m.interval << ": "
            << (m.defined ? fixed(m.mean_speed_kmh, 3) + " km/h" : std::string("undefined")) << '\n';
    }
    const auto overall = overall_mean_speed(sim.measurements());
    out << "mean speed: " << (overall ? fixed(*overall, 3) + " km/h" : std::string("undefined")) << '\n';
    const auto& k = sim.counters();
    out << "arrivals " << k.arrived << ", lane changes " << k.lane_changes << ", green extensions "
        << k.green_extensions << ", advisories " << k.advisories << '\n';
    out << "violations: conservation " << k.conservation_violations << ", occupancy " << k.double_occupancy
        << ", red " << k.red_crossings << ", speed " << k.speed_violations << '\n';
    if (!c.out.empty()) {
        RunRecord r{s.demand.av_fraction, controlled, seed, sim.measurements(), overall};
        write_file(c.out, runs_csv({r}));
    }
    return exit_ok;
}

struct ExperimentArgs {
    std::string fractions;
    std::optional<int> replications;
    bool controlled = false;
    bool baseline = false;
};

std::vector<double> parse_fractions(const std::string& text) {
    Scenario scratch;
    apply_override(scratch, "experiment.fractions=" + text);
    return scratch.experiment.fractions;
}

int cmd_experiment(const Common& c, const ExperimentArgs& a, std::ostream& out) {
    const Scenario s = load(c);
    ExperimentOptions o = experiment_options(s);
    if (!a.fractions.empty()) o.fractions = parse_fractions(a.fractions);
    if (a.replications) o.replications = *a.replications;
    if (c.seed) o.base_seed = *c.seed;
    if (a.controlled || a.baseline) {
        o.controlled = a.controlled;
        o.baseline = a.baseline;
    }
    const auto result = run_experiment(s, o);
    for (const auto& r : result.summary) {
        out << "fraction " << fixed(r.fraction, 2) << ": ";
        if (r.baseline_kmh) out << "baseline " << fixed(*r.baseline_kmh, 3) << " km/h";
        if (r.baseline_kmh && r.controlled_kmh) out << ", ";
        if (r.controlled_kmh) out << "controlled " << fixed(*r.controlled_kmh, 3) << " km/h";
        if (r.improvement_pct) {
            out << ", improvement " << (*r.improvement_pct >= 0 ? "+" : "") << fixed(*r.improvement_pct, 2) << "% +/- "
                << fixed(*r.improvement_std, 2);
        }
        out << " (" << r.replications << " seeds)\n";
    }
    if (!c.out.empty()) {
        write_file(c.out, runs_csv(result.runs));
        write_file(summary_path(c.out), summary_csv(result.summary));
        out << "wrote " << c.out << " and " << summary_path(c.out) << '\n';
    }
    return exit_ok;
}

char conflict_letter(ConflictKind k) {
    switch (k) {
        case ConflictKind::none: return '.';
        case ConflictKind::cross: return 'X';
        case ConflictKind::merge: return 'M';
        case ConflictKind::diverge: return 'D';
    }
    return '?';
}

int cmd_conflicts(const Common& c, const std::string& node_ref, std::ostream& out) {
    const Scenario s = load(c);
    if (s.fabrics.empty()) throw ValidationError("scenario has no intersection");
    const SwitchFabric* f = nullptr;
    if (!node_ref.empty()) {
        const NodeId n = resolve_node(s, node_ref);
        auto it = s.fabrics.find(n);
        if (it == s.fabrics.end()) throw ValidationError("node '" + node_ref + "' has no switching fabric");
        f = &it->second;
    } else {
        for (const auto& [_, fab] : s.fabrics) {
            if (!f || fab.connections.size() > f->connections.size()) f = &fab;
        }
    }
    const auto lane = [&](PortId p) {
        const auto& b = f->port(p).lane;
        return s.graph.link(b.link).name + "/" + std::to_string(b.lane);
    };
    out << "node " << s.graph.node(f->node).name << ": " << f->connections.size() << " connections\n";
    for (const auto& con : f->connections) {
        out << "c" << con.id.value << ": " << lane(con.in_port) << " -> " << lane(con.out_port) << " ("
            << to_string(con.movement) << ")\n";
    }
    std::string csv = "a,b,kind\n";
    for (const auto& a : f->connections) {
        std::string row;
        for (const auto& b : f->connections) {
            const auto k = f->conflicts.kind(a.id, b.id);
            row += conflict_letter(k);
            if (a.id < b.id && k != ConflictKind::none) {
                csv += std::to_string(a.id.value) + ',' + std::to_string(b.id.value) + ',' +
                       std::string(to_string(k)) + '\n';
            }
        }
        out << row << '\n';
    }
    if (!c.out.empty()) write_file(c.out, csv);
    return exit_ok;
}

struct QueueArgs {
    std::string model;
    double lambda = 0, mu = 0;
    bool simulate = false;
    std::uint64_t arrivals = 1000000;
};

int cmd_queue(const Common& c, const QueueArgs& a, std::ostream& out) {
    QueueModel m;
    if (a.model == "mm1") m = QueueModel::mm1;
    else if (a.model == "md1") m = QueueModel::md1;
    else throw ValidationError("model must be mm1 or md1");
    const double wq = expected_wait(m, a.lambda, a.mu);
    out << "W_q = " << num(wq, 10) << '\n';
    if (a.simulate) {
        const auto sim = simulate_queue(m, a.lambda, a.mu, a.arrivals, c.seed.value_or(1));
        const double rel = wq > 0 ? std::abs(sim.mean_wait - wq) / wq * 100 : 0.0;
        out << "simulated W_q = " << num(sim.mean_wait, 10) << " over " << sim.customers << " arrivals\n";
        out << "relative error = " << fixed(rel, 3) << "%\n";
    }
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Transportation network routing, switching and traffic simulation", "tisim"};
    app.require_subcommand(1);
    Common c;

    auto common = [&](CLI::App* sub, bool scenario) {
        if (scenario) {
            sub->add_option("--scenario", c.scenario, "Scenario file or bundled fixture name")->required();
            sub->add_option("--set", c.overrides, "Override key=value (repeatable)");
        }
        sub->add_option("--seed", c.seed, "Random seed");
        sub->add_option("--out", c.out, "Output file");
    };

    auto* validate = app.add_subcommand("validate", "Check a scenario and print its size");
    common(validate, true);

    RouteArgs ra;
    auto* route = app.add_subcommand("route", "Best route between two nodes");
    common(route, true);
    route->add_option("from", ra.from, "Source node name or tas.node.terminal address")->required();
    route->add_option("to", ra.to, "Destination node name or address")->required();
    route->add_option("--objective", ra.objective, "Metric to optimize (default: first metric)");
    route->add_option("--max", ra.at_most, "Upper bound metric=value (repeatable)");
    route->add_option("--min", ra.at_least, "Lower bound metric=value (repeatable)");
    route->add_flag("--hierarchical", ra.hierarchical, "Route across TAS through border summaries");

    bool controlled = false;
    auto* simulate = app.add_subcommand("simulate", "One traffic simulation run");
    common(simulate, true);
    simulate->add_flag("--controlled,!--baseline", controlled, "Controller policies on (default off)");

    ExperimentArgs ea;
    auto* experiment = app.add_subcommand("experiment", "Baseline vs controlled sweep over driverless fractions");
    common(experiment, true);
    experiment->add_option("--fractions", ea.fractions, "Comma-separated driverless fractions");
    experiment->add_option("--replications", ea.replications, "Seeds per fraction and mode")
        ->check(CLI::PositiveNumber);
    experiment->add_flag("--controlled", ea.controlled, "Run the controlled mode");
    experiment->add_flag("--baseline", ea.baseline, "Run the baseline mode");

    std::string node_ref;
    auto* conflicts = app.add_subcommand("conflict-matrix", "Turning movements and their conflicts at a node");
    common(conflicts, true);
    conflicts->add_option("--node", node_ref, "Node name (default: the node with most connections)");

    QueueArgs qa;
    auto* queue = app.add_subcommand("queue-calc", "Mean queueing delay of an M/M/1 or M/D/1 queue");
    common(queue, false);
    queue->add_option("model", qa.model, "mm1 or md1")->required();
    queue->add_option("lambda", qa.lambda, "Arrival rate")->required();
    queue->add_option("mu", qa.mu, "Service rate")->required();
    queue->add_flag("--simulate", qa.simulate, "Also run a discrete-event simulation");
    queue->add_option("--arrivals", qa.arrivals, "Simulated arrivals");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_invalid;
    }

    try {
        if (validate->parsed()) return cmd_validate(c, out);
        if (route->parsed()) return cmd_route(c, ra, out);
        if (simulate->parsed()) return cmd_simulate(c, controlled, out);
        if (experiment->parsed()) return cmd_experiment(c, ea, out);
        if (conflicts->parsed()) return cmd_conflicts(c, node_ref, out);
        if (queue->parsed()) return cmd_queue(c, qa, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const NoRoute& e) {
        err << "no route: " << e.what() << '\n';
        return exit_no_route;
    } catch (const Infeasible& e) {
        err << "infeasible: " << e.what() << '\n';
        return exit_infeasible;
    } catch (const UnstableQueue& e) {
        err << "unstable queue: " << e.what() << '\n';
        return exit_unstable;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return exit_invalid;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_invalid;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return exit_io;
    }
    return exit_invalid;
}

}  // namespace tisim
