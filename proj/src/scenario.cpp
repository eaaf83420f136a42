#include "tisim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "tisim/error.hpp"

namespace tisim {

using nlohmann::json;

// Generated from scenarios/*.json at configure time.
extern const std::map<std::string_view, std::string_view> bundled_fixtures;

namespace {

std::string where(std::string_view source, const std::string& path) { return std::string(source) + ": " + path; }

template <class T>
T get_as(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ParseError(path + ": wrong type " + std::string(j.type_name()));
    }
}

const json& required(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw ParseError(path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + ": missing '" + key + "'");
    return *it;
}

template <class T>
T optional_field(const json& obj, const char* key, T fallback, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    return get_as<T>(*it, path + "." + key);
}

const json& array_field(const json& obj, const char* key, const std::string& path, bool need = true) {
    static const json empty = json::array();
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (need) throw ParseError(path + ": missing '" + key + "'");
        return empty;
    }
    if (!it->is_array()) throw ParseError(path + "." + key + ": expected an array");
    return *it;
}

double as_number(const json& v, const std::string& key) {
    if (!v.is_number()) throw ValidationError(key + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(key + ": not finite");
    return d;
}

std::uint64_t as_count(const json& v, const std::string& key) {
    const double d = as_number(v, key);
    if (d < 0 || d != std::floor(d)) throw ValidationError(key + ": expected a nonnegative integer");
    return static_cast<std::uint64_t>(d);
}

int as_int(const json& v, const std::string& key) {
    const double d = as_number(v, key);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw ValidationError(key + ": expected an integer");
    return static_cast<int>(d);
}

bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) throw ValidationError(key + ": expected true or false");
    return v.get<bool>();
}

using Setter = std::function<void(Scenario&, const json&, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = [] {
        std::map<std::string, Setter, std::less<>> t;
        auto num = [&t](const char* key, auto member) {
            t[key] = [member](Scenario& s, const json& v, const std::string& k) { member(s) = as_number(v, k); };
        };
        auto count = [&t](const char* key, auto member) {
            t[key] = [member](Scenario& s, const json& v, const std::string& k) { member(s) = as_count(v, k); };
        };
        auto integer = [&t](const char* key, auto member) {
            t[key] = [member](Scenario& s, const json& v, const std::string& k) { member(s) = as_int(v, k); };
        };
        auto flag = [&t](const char* key, auto member) {
            t[key] = [member](Scenario& s, const json& v, const std::string& k) { member(s) = as_bool(v, k); };
        };
        // Lambdas returning references keep the table declarative.
        num("sim.cell_length", [](Scenario& s) -> double& { return s.sim.cell_length; });
        num("sim.tick", [](Scenario& s) -> double& { return s.sim.tick; });
        integer("sim.vmax_human", [](Scenario& s) -> int& { return s.sim.vmax_human; });
        integer("sim.vmax_driverless", [](Scenario& s) -> int& { return s.sim.vmax_driverless; });
        num("sim.p_slow", [](Scenario& s) -> double& { return s.sim.p_slow; });
        count("sim.seed", [](Scenario& s) -> std::uint64_t& { return s.sim.seed; });
        count("sim.warmup", [](Scenario& s) -> std::uint64_t& { return s.sim.warmup; });
        count("sim.duration", [](Scenario& s) -> std::uint64_t& { return s.sim.duration; });
        count("sim.measure_interval", [](Scenario& s) -> std::uint64_t& { return s.sim.measure_interval; });
        num("sim.connected_fraction", [](Scenario& s) -> double& { return s.sim.connected_fraction; });
        integer("sim.approach_cells", [](Scenario& s) -> int& { return s.sim.approach_cells; });
        integer("sim.platoon_gap", [](Scenario& s) -> int& { return s.sim.platoon_gap; });
        flag("sim.lane_changes", [](Scenario& s) -> bool& { return s.sim.lane_changes; });
        flag("sim.platooning", [](Scenario& s) -> bool& { return s.sim.platooning; });
        flag("sim.controlled", [](Scenario& s) -> bool& { return s.sim.controlled; });
        count("sim.central_period", [](Scenario& s) -> std::uint64_t& { return s.sim.central_period; });
        num("sim.density_threshold", [](Scenario& s) -> double& { return s.sim.cooperative.density_threshold; });
        num("sim.max_extension", [](Scenario& s) -> double& { return s.sim.cooperative.max_extension; });
        num("sim.lookahead", [](Scenario& s) -> double& { return s.sim.cooperative.lookahead; });
        num("sim.min_advisory_kmh", [](Scenario& s) -> double& { return s.sim.min_advisory_kmh; });
        integer("demand.vehicles", [](Scenario& s) -> int& { return s.demand.vehicles; });
        num("demand.av_fraction", [](Scenario& s) -> double& { return s.demand.av_fraction; });
        integer("experiment.replications", [](Scenario& s) -> int& { return s.experiment.replications; });
        count("experiment.base_seed", [](Scenario& s) -> std::uint64_t& { return s.experiment.base_seed; });
        t["experiment.fractions"] = [](Scenario& s, const json& v, const std::string& k) {
            std::vector<double> f;
            if (v.is_array()) {
                for (const auto& x : v) f.push_back(as_number(x, k));
            } else {
                f.push_back(as_number(v, k));
            }
            s.experiment.fractions = std::move(f);
        };
        t["fabric.service_time"] = [](Scenario& s, const json& v, const std::string& k) {
            const double d = as_number(v, k);
            if (d < 0) throw ValidationError(k + ": must be nonnegative");
            for (auto& [_, f] : s.fabrics) f.service_time = d;
        };
        t["fabric.permissive_right"] = [](Scenario& s, const json& v, const std::string& k) {
            const bool b = as_bool(v, k);
            for (auto& [_, f] : s.fabrics) f.permissive_right = b;
        };
        return t;
    }();
    return table;
}

void set_key(Scenario& s, const std::string& key, const json& value) {
    const auto& t = setters();
    auto it = t.find(key);
    if (it == t.end()) throw ValidationError("unknown configuration key '" + key + "'");
    it->second(s, value, key);
}

void check_scenario(const Scenario& s) {
    s.sim.validate();
    if (s.demand.vehicles < 0) throw ValidationError("demand.vehicles: must be nonnegative");
    if (!(s.demand.av_fraction >= 0 && s.demand.av_fraction <= 1))
        throw ValidationError("demand.av_fraction: must lie in [0, 1]");
    if (s.experiment.replications < 1) throw ValidationError("experiment.replications: must be at least 1");
    if (s.experiment.fractions.empty()) throw ValidationError("experiment.fractions: empty");
    for (double f : s.experiment.fractions) {
        if (!(f >= 0 && f <= 1)) throw ValidationError("experiment.fractions: values must lie in [0, 1]");
    }
}

NodeId node_ref(const RoadGraph& g, const json& v, const std::string& path) {
    const auto name = get_as<std::string>(v, path);
    auto n = g.find_node(name);
    if (!n) throw ValidationError(path + ": unknown node '" + name + "'");
    return *n;
}

LinkId link_ref(const RoadGraph& g, const json& v, const std::string& path) {
    const auto name = get_as<std::string>(v, path);
    auto l = g.find_link(name);
    if (!l) throw ValidationError(path + ": unknown link '" + name + "'");
    return *l;
}

std::vector<double> values_of(const json& obj, const std::string& path) {
    std::vector<double> out;
    for (const auto& [i, v] : array_field(obj, "values", path, false).items()) {
        out.push_back(get_as<double>(v, path + ".values[" + i + "]"));
    }
    return out;
}

SignalPlan parse_plan(const RoadGraph& g, const SwitchFabric& fabric, NodeId node, const json& js,
                      const std::string& path) {
    SignalPlan plan;
    plan.intersection = node;
    plan.offset = optional_field<double>(js, "offset", 0.0, path);
    for (const auto& [i, ph] : array_field(js, "phases", path).items()) {
        const std::string pp = path + ".phases[" + i + "]";
        PhaseSpec p;
        p.id = PhaseId{optional_field<int>(ph, "id", static_cast<int>(plan.phases.size()), pp)};
        p.green = get_as<double>(required(ph, "green", pp), pp + ".green");
        p.yellow = optional_field<double>(ph, "yellow", 0.0, pp);
        p.red = optional_field<double>(ph, "red", 0.0, pp);
        std::vector<ConnectionId> conns;
        for (const auto& [j, a] : array_field(ph, "approaches", pp, false).items()) {
            const std::string ap = pp + ".approaches[" + j + "]";
            const LinkId l = link_ref(g, a, ap);
            if (g.link(l).to != node) throw ValidationError(ap + ": link does not enter the signal's node");
            auto c = connections_from(fabric, l);
            conns.insert(conns.end(), c.begin(), c.end());
        }
        for (const auto& [j, m] : array_field(ph, "movements", pp, false).items()) {
            const std::string mp = pp + ".movements[" + j + "]";
            if (!m.is_array() || m.size() != 2) throw ParseError(mp + ": expected [in_link, out_link]");
            const LinkId in = link_ref(g, m[0], mp);
            const LinkId out = link_ref(g, m[1], mp);
            auto c = connections_from(fabric, in, out);
            if (c.empty()) throw ValidationError(mp + ": no such movement at the node");
            conns.insert(conns.end(), c.begin(), c.end());
        }
        std::sort(conns.begin(), conns.end());
        conns.erase(std::unique(conns.begin(), conns.end()), conns.end());
        p.connections = std::move(conns);
        plan.phases.push_back(std::move(p));
    }
    double total = 0;
    for (const auto& p : plan.phases) total += p.length();
    plan.cycle_length = optional_field<double>(js, "cycle", total, path);
    try {
        validate_plan(plan, fabric);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return plan;
}

}  // namespace

void SimConfig::validate() const {
    if (!(cell_length > 0)) throw ValidationError("sim.cell_length: must be positive");
    if (!(tick > 0)) throw ValidationError("sim.tick: must be positive");
    if (vmax_human < 1 || vmax_driverless < 1) throw ValidationError("sim.vmax: must be at least 1 cell per tick");
    if (!(p_slow >= 0 && p_slow <= 1)) throw ValidationError("sim.p_slow: must lie in [0, 1]");
    if (!(connected_fraction >= 0 && connected_fraction <= 1))
        throw ValidationError("sim.connected_fraction: must lie in [0, 1]");
    if (measure_interval == 0) throw ValidationError("sim.measure_interval: must be positive");
    if (duration % measure_interval != 0)
        throw ValidationError("sim.duration: must be a multiple of sim.measure_interval");
    if (approach_cells < 1) throw ValidationError("sim.approach_cells: must be positive");
    if (platoon_gap < 0) throw ValidationError("sim.platoon_gap: must be nonnegative");
    if (central_period == 0) throw ValidationError("sim.central_period: must be positive");
    if (!(min_advisory_kmh > 0)) throw ValidationError("sim.min_advisory_kmh: must be positive");
    if (!(cooperative.max_extension >= 0) || !(cooperative.lookahead >= 0))
        throw ValidationError("sim: cooperative bounds must be nonnegative");
}

std::vector<ConnectionId> connections_from(const SwitchFabric& fabric, LinkId in, std::optional<LinkId> out) {
    std::vector<ConnectionId> r;
    for (const auto& c : fabric.connections) {
        if (fabric.port(c.in_port).lane.link != in) continue;
        if (out && fabric.port(c.out_port).lane.link != *out) continue;
        r.push_back(c.id);
    }
    return r;
}

Scenario parse_scenario(std::string_view text, std::string_view source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(where(source, "byte " + std::to_string(e.byte)) + ": malformed document");
    }
    const std::string root(source);
    if (!doc.is_object()) throw ParseError(root + ": expected an object at top level");
    const auto version = get_as<int>(required(doc, "version", root), root + ".version");
    if (version != 1) throw ParseError(root + ".version: unsupported version " + std::to_string(version));

    Scenario s;
    s.name = optional_field<std::string>(doc, "name", root, root);

    RoadGraph::Builder b;
    for (const auto& [i, m] : array_field(doc, "metrics", root).items()) {
        const std::string p = root + ".metrics[" + i + "]";
        try {
            b.metric(get_as<std::string>(required(m, "name", p), p + ".name"),
                     parse_metric_kind(get_as<std::string>(required(m, "kind", p), p + ".kind")),
                     parse_direction(optional_field<std::string>(m, "direction", "minimize", p)));
        } catch (const ParseError& e) {
            throw ParseError(p + ": " + e.what());
        }
    }

    std::map<std::string, NodeId> names;
    std::map<NodeId, TasId> assignment;
    const auto& nodes = array_field(doc, "nodes", root);
    for (const auto& [i, n] : nodes.items()) {
        const std::string p = root + ".nodes[" + i + "]";
        RoadNode node;
        node.id = NodeId{static_cast<int>(names.size())};
        node.name = get_as<std::string>(required(n, "name", p), p + ".name");
        try {
            node.kind = parse_node_kind(optional_field<std::string>(n, "kind", "intersection", p));
        } catch (const ParseError& e) {
            throw ParseError(p + ": " + e.what());
        }
        node.position = {optional_field<double>(n, "x", 0.0, p), optional_field<double>(n, "y", 0.0, p)};
        node.terminal_count = optional_field<int>(n, "terminals", 0, p);
        node.metric_values = values_of(n, p);
        if (node.metric_values.empty()) node.metric_values.assign(b.metric_count(), 0.0);
        if (!names.emplace(node.name, node.id).second) throw ValidationError(p + ": duplicate node '" + node.name + "'");
        assignment[node.id] = TasId{optional_field<int>(n, "tas", 1, p)};
        b.add_node(std::move(node));
    }

    std::set<std::string> link_names;
    for (const auto& [i, l] : array_field(doc, "links", root).items()) {
        const std::string p = root + ".links[" + i + "]";
        const auto name = get_as<std::string>(required(l, "name", p), p + ".name");
        if (!link_names.insert(name).second) throw ValidationError(p + ": duplicate link '" + name + "'");
        auto endpoint = [&](const char* key) {
            const auto n = get_as<std::string>(required(l, key, p), p + "." + key);
            auto it = names.find(n);
            if (it == names.end()) throw ValidationError(p + " ('" + name + "'): unknown node '" + n + "'");
            return it->second;
        };
        const NodeId from = endpoint("from");
        const NodeId to = endpoint("to");
        b.link(name, from, to, get_as<double>(required(l, "length", p), p + ".length"), values_of(l, p),
               optional_field<int>(l, "lanes", 1, p), optional_field<double>(l, "speed_kmh", 50.0, p));
    }
    s.graph = b.build();
    for (const auto& m : {"distance", "time"}) {
        if (!s.graph.metric_index(m)) throw ValidationError(root + ".metrics: the '" + std::string(m) + "' metric is required");
    }

    std::map<TasId, TasProfile> profiles;
    for (const auto& [i, t] : array_field(doc, "tas", root, false).items()) {
        const std::string p = root + ".tas[" + i + "]";
        const TasId id{get_as<int>(required(t, "id", p), p + ".id")};
        try {
            profiles[id] = {parse_tas_kind(optional_field<std::string>(t, "kind", "transit", p)),
                            parse_tier(optional_field<std::string>(t, "tier", "man", p))};
        } catch (const ParseError& e) {
            throw ParseError(p + ": " + e.what());
        }
    }
    s.hierarchy = partition_into_tas(s.graph, assignment, profiles);

    for (const auto& n : s.graph.nodes()) {
        if (s.graph.in_links(n.id).empty() || s.graph.out_links(n.id).empty()) continue;
        try {
            s.fabrics.emplace(n.id, build_node_fabric(s.graph, n.id));
        } catch (const UnsupportedGeometry& e) {
            throw ValidationError(root + ": node '" + n.name + "': " + e.what());
        }
    }

    for (const auto& [i, sig] : array_field(doc, "signals", root, false).items()) {
        const std::string p = root + ".signals[" + i + "]";
        const NodeId node = node_ref(s.graph, required(sig, "node", p), p + ".node");
        auto fit = s.fabrics.find(node);
        if (fit == s.fabrics.end()) throw ValidationError(p + ": node has no approaches");
        if (s.signals.contains(node)) throw ValidationError(p + ": node already signalized");
        s.signals.emplace(node, parse_plan(s.graph, fit->second, node, sig, p));
        fit->second.signalized = true;
    }

    auto section = [&](const char* name) {
        auto it = doc.find(name);
        if (it == doc.end()) return;
        if (!it->is_object()) throw ParseError(root + "." + name + ": expected an object");
        for (const auto& [k, v] : it->items()) {
            try {
                set_key(s, std::string(name) + "." + k, v);
            } catch (const ValidationError& e) {
                throw ValidationError(root + ": " + e.what());
            }
        }
    };
    section("fabric");
    section("demand");
    section("sim");
    section("experiment");
    check_scenario(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        if (auto text = fixture_text(path.string())) return parse_scenario(*text, path.string());
        throw IoError("cannot open " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    return parse_scenario(ss.str(), path.filename().string());
}

std::vector<std::string> fixture_names() {
    std::vector<std::string> r;
    for (const auto& [name, _] : bundled_fixtures) r.emplace_back(name);
    return r;
}

std::optional<std::string_view> fixture_text(std::string_view name) {
    auto it = bundled_fixtures.find(name);
    if (it == bundled_fixtures.end()) return std::nullopt;
    return it->second;
}

void apply_override(Scenario& s, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ValidationError("override '" + std::string(assignment) + "': expected key=value");
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    json value;
    if (key == "experiment.fractions") {
        value = json::array();
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                value.push_back(json::parse(item));
            } catch (const json::exception&) {
                throw ValidationError(key + ": bad number '" + item + "'");
            }
        }
    } else {
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw;
        }
    }
    set_key(s, key, value);
    check_scenario(s);
}

std::string summary_line(const Scenario& s) {
    std::ostringstream os;
    os << s.graph.node_count() << " nodes, " << s.graph.link_count() << " links, " << s.hierarchy.areas().size()
       << " TAS, " << s.signals.size() << " signals";
    return os.str();
}

}  // namespace tisim
