#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "tisim/hierarchy.hpp"

namespace tisim {

/// Sequence-numbered state of one link as flooded between routers.
struct LinkStateRecord {
    LinkId link;
    std::uint64_t sequence = 0;
    std::vector<double> values;

    friend bool operator==(const LinkStateRecord&, const LinkStateRecord&) = default;
};

/// Border-to-border digest of one TAS: for every metric, the optimal value over
/// intra-TAS paths from `entry` to `exit`, endpoint nodes excluded. Each metric
/// is optimized on its own, so the vector need not belong to a single path.
struct TasSummary {
    TasId tas;
    NodeId entry;
    NodeId exit;
    std::uint64_t sequence = 0;
    std::vector<double> values;

    friend bool operator==(const TasSummary&, const TasSummary&) = default;
};

using SummaryKey = std::tuple<TasId, NodeId, NodeId>;

struct RouterDatabase {
    NodeId router;
    TasId tas;
    /// Intra-TAS link state (plus external links for border routers).
    std::map<LinkId, LinkStateRecord> links;
    /// Border-to-border summaries of every TAS.
    std::map<SummaryKey, TasSummary> summaries;

    friend bool operator==(const RouterDatabase&, const RouterDatabase&) = default;
};

/// Summaries of `tas` computed from `graph`'s current values, for every
/// ordered pair of distinct border nodes joined inside the TAS.
[[nodiscard]] std::vector<TasSummary> compute_tas_summaries(const RoadGraph& graph, const NetworkHierarchy& h, TasId tas);

/// Summaries for arbitrary entry/exit node sets within one TAS.
[[nodiscard]] std::vector<TasSummary> compute_tas_summaries(const RoadGraph& graph, const NetworkHierarchy& h, TasId tas,
                                                            const std::set<NodeId>& entries,
                                                            const std::set<NodeId>& exits);

/// Initial databases: every router holds its TAS's link state at sequence 1,
/// border routers also hold every external link, and everyone holds the
/// summaries of every TAS. Indexed by router (node) id.
[[nodiscard]] std::vector<RouterDatabase> initial_databases(const RoadGraph& graph, const NetworkHierarchy& h);

/// Records a new local measurement at the owning router (the link's tail),
/// bumping its sequence number. The change reaches other routers on the next sync.
void originate(std::vector<RouterDatabase>& dbs, const RoadGraph& graph, LinkId link, std::vector<double> values);

/// One flooding round for the `changed` links. Intra-TAS records reach every
/// router of the owning TAS, external records reach every border router; a
/// record replaces the stored one only with a higher sequence number. Border
/// routers of every touched TAS then recompute its summaries, which replace
/// older summaries in every router. Idempotent.
void link_state_sync(std::vector<RouterDatabase>& dbs, const RoadGraph& graph, const NetworkHierarchy& h,
                     const std::set<LinkId>& changed);

/// `graph` with link metric values replaced by those in `db` (links absent from
/// the database keep their values).
[[nodiscard]] RoadGraph apply_link_state(const RoadGraph& graph, const RouterDatabase& db);

}  // namespace tisim
