#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tisim/graph.hpp"

namespace tisim {

enum class TasKind { stub, transit };
enum class Tier { lan, man, wan };

[[nodiscard]] std::string_view to_string(TasKind k);
[[nodiscard]] std::string_view to_string(Tier t);
[[nodiscard]] TasKind parse_tas_kind(std::string_view s);
[[nodiscard]] Tier parse_tier(std::string_view s);

/// Hierarchical logical address tas.node.terminal; terminal 0 is the node itself.
struct TransportAddress {
    int tas = 0;
    int node = 0;
    int terminal = 0;

    friend auto operator<=>(const TransportAddress&, const TransportAddress&) = default;
};

[[nodiscard]] std::string to_string(const TransportAddress& a);
/// Parses "tas.node.terminal" or "tas.node". Throws ParseError.
[[nodiscard]] TransportAddress parse_address(std::string_view s);

struct TasDescriptor {
    TasId id;
    TasKind kind = TasKind::transit;
    Tier tier = Tier::man;
    std::set<NodeId> member_nodes;
    std::set<NodeId> border_nodes;

    friend bool operator==(const TasDescriptor&, const TasDescriptor&) = default;
};

struct TasProfile {
    TasKind kind = TasKind::transit;
    Tier tier = Tier::man;
};

/// H = (G_i, E_e): the TAS areas plus the external links joining them.
class NetworkHierarchy {
public:
    NetworkHierarchy() = default;
    NetworkHierarchy(std::vector<TasDescriptor> areas, std::set<LinkId> external_links, std::vector<TasId> node_tas);

    [[nodiscard]] const std::vector<TasDescriptor>& areas() const { return areas_; }
    [[nodiscard]] const std::set<LinkId>& external_links() const { return external_; }
    [[nodiscard]] bool is_external(LinkId l) const { return external_.contains(l); }
    [[nodiscard]] TasId tas_of(NodeId n) const;
    /// Throws ValidationError for unknown ids.
    [[nodiscard]] const TasDescriptor& area(TasId id) const;

    [[nodiscard]] TransportAddress address_of(const RoadGraph& g, NodeId n) const;
    /// Node addressed by `a`, or nullopt if the (tas, node, terminal) triple does not exist.
    [[nodiscard]] std::optional<NodeId> resolve(const RoadGraph& g, const TransportAddress& a) const;

    /// Induced subgraph of one area. Node and link ids are renumbered densely;
    /// `node_map`/`link_map` (optional) receive sub id -> original id.
    [[nodiscard]] RoadGraph area_subgraph(const RoadGraph& g, TasId id, std::vector<NodeId>* node_map = nullptr,
                                          std::vector<LinkId>* link_map = nullptr) const;

    friend bool operator==(const NetworkHierarchy&, const NetworkHierarchy&) = default;

private:
    std::vector<TasDescriptor> areas_;
    std::set<LinkId> external_;
    std::vector<TasId> node_tas_;
};

/// Splits the graph into TAS areas. `assignment[node]` gives each node's TAS;
/// `profiles` gives kind and tier per TAS (missing entries default to transit/MAN).
/// Throws ValidationError for a partial assignment, an empty TAS or a stub TAS
/// without a terminal node.
[[nodiscard]] NetworkHierarchy partition_into_tas(const RoadGraph& graph, const std::map<NodeId, TasId>& assignment,
                                                  const std::map<TasId, TasProfile>& profiles = {});

/// Induced subgraph over `keep` (a node-id set); ids renumbered in original order.
[[nodiscard]] RoadGraph induced_subgraph(const RoadGraph& g, const std::set<NodeId>& keep,
                                         std::vector<NodeId>* node_map = nullptr,
                                         std::vector<LinkId>* link_map = nullptr);

}  // namespace tisim
