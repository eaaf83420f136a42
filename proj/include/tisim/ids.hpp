#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace tisim {

// Tagged integer identifier. Ordering is the plain integer ordering, which is
// what every "deterministic id order" iteration in the library relies on.
template <class Tag>
struct Id {
    std::int32_t value = -1;

    constexpr Id() = default;
    constexpr explicit Id(std::int32_t v) : value(v) {}

    [[nodiscard]] constexpr bool valid() const { return value >= 0; }
    [[nodiscard]] constexpr std::size_t index() const { return static_cast<std::size_t>(value); }

    friend constexpr auto operator<=>(const Id&, const Id&) = default;
    friend std::ostream& operator<<(std::ostream& os, const Id& id) { return os << id.value; }
};

struct NodeTag {};
struct LinkTag {};
struct TasTag {};
struct PortTag {};
struct ConnectionTag {};
struct VehicleTag {};
struct PhaseTag {};

using NodeId = Id<NodeTag>;
using LinkId = Id<LinkTag>;
using TasId = Id<TasTag>;
using PortId = Id<PortTag>;
using ConnectionId = Id<ConnectionTag>;
using VehicleId = Id<VehicleTag>;
using PhaseId = Id<PhaseTag>;

}  // namespace tisim

template <class Tag>
struct std::hash<tisim::Id<Tag>> {
    std::size_t operator()(const tisim::Id<Tag>& id) const noexcept { return std::hash<std::int32_t>{}(id.value); }
};
