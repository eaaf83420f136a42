#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tisim/control.hpp"
#include "tisim/fabric.hpp"
#include "tisim/graph.hpp"
#include "tisim/hierarchy.hpp"

namespace tisim {

/// Cellular-automaton and controller parameters. Every field is a
/// calibration knob that a scenario or a `--set sim.<name>=...` can override.
struct SimConfig {
    double cell_length = 7.5;  // meters
    double tick = 1.0;         // seconds
    int vmax_human = 2;        // cells per tick
    int vmax_driverless = 2;
    double p_slow = 0.2;  // humans only; driverless vehicles never dawdle
    std::uint64_t seed = 1;
    std::uint64_t warmup = 600;    // ticks run before measuring
    std::uint64_t duration = 3600; // measured ticks
    std::uint64_t measure_interval = 600;
    /// Share of human drivers with a connected device.
    double connected_fraction = 0.2;
    /// Cells before the stop line where vehicles queue at a fabric port and
    /// discretionary lane changes stop.
    int approach_cells = 10;
    /// Largest gap, in cells, between consecutive members of a detected platoon.
    int platoon_gap = 3;
    bool lane_changes = true;
    bool platooning = true;
    /// Controller policies: cooperative signals, advisories, dynamic routes.
    bool controlled = false;
    std::uint64_t central_period = 10;
    CooperativeParams cooperative;
    double min_advisory_kmh = 20.0;

    /// Throws ValidationError.
    void validate() const;
};

struct DemandSpec {
    int vehicles = 0;
    /// Share of driverless (always connected) vehicles.
    double av_fraction = 0.0;
};

struct ExperimentSpec {
    std::vector<double> fractions{0.0, 0.2, 0.6};
    int replications = 10;
    std::uint64_t base_seed = 1;
};

struct Scenario {
    std::string name;
    RoadGraph graph;
    NetworkHierarchy hierarchy;
    /// One fabric per node with at least one approach and one exit.
    std::map<NodeId, SwitchFabric> fabrics;
    std::map<NodeId, SignalPlan> signals;
    DemandSpec demand;
    SimConfig sim;
    ExperimentSpec experiment;
};

/// Builds a scenario from its JSON text. `source` names the document in error
/// messages. Throws ParseError for malformed or unversioned documents and
/// ValidationError for documents violating a model invariant.
[[nodiscard]] Scenario parse_scenario(std::string_view text, std::string_view source = "scenario");
/// Reads a file, or a bundled fixture when `path` is a fixture name and no
/// such file exists. Throws IoError, ParseError, ValidationError.
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);

/// Names of the bundled fixtures, sorted.
[[nodiscard]] std::vector<std::string> fixture_names();
/// JSON text of a bundled fixture, or nullopt.
[[nodiscard]] std::optional<std::string_view> fixture_text(std::string_view name);

/// Applies one `key=value` override, e.g. `sim.p_slow=0.1`,
/// `demand.vehicles=200`, `fabric.service_time=3`, `experiment.replications=5`.
/// Throws ValidationError for unknown keys or bad values.
void apply_override(Scenario& s, std::string_view assignment);

/// "7 nodes, 12 links, 1 TAS, 5 signals"
[[nodiscard]] std::string summary_line(const Scenario& s);

/// Connections of `fabric` leaving any lane of link `in`, optionally only
/// those onto link `out`.
[[nodiscard]] std::vector<ConnectionId> connections_from(const SwitchFabric& fabric, LinkId in,
                                                         std::optional<LinkId> out = std::nullopt);

}  // namespace tisim
