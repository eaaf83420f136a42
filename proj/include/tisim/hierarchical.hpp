#pragma once

#include <vector>

#include "tisim/hierarchy.hpp"
#include "tisim/routing.hpp"

namespace tisim {

/// A route composed across TAS: the concrete path plus its split into
/// intra-domain segments (p_i) and external links (p_e).
struct HierarchicalRoute {
    Path path;
    std::vector<std::vector<LinkId>> intra_segments;
    std::vector<LinkId> external_links;
    std::vector<TasId> tas_sequence;
};

/// Two-level route. Source and destination in one TAS: solved on that TAS's
/// subgraph. Otherwise the request is solved on the quotient graph of border
/// nodes (external links plus per-TAS border-to-border summaries) and every
/// summary hop is expanded to an objective-optimal intra-TAS path. If the
/// expansion breaks an end-to-end constraint, the request is re-solved over
/// the TAS the quotient route visits. Throws NoRoute, Infeasible.
[[nodiscard]] HierarchicalRoute hierarchical_route(const NetworkHierarchy& h, const RoadGraph& g,
                                                   const RouteRequest& request);

}  // namespace tisim
