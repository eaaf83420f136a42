#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "tisim/control.hpp"
#include "tisim/link_state.hpp"

namespace tisim {

using FlowTableBatch = std::vector<FlowTableEntry>;
using Message = std::variant<VehicleReport, FlowTableBatch, SignalPlan, LinkStateRecord>;

enum class MessageType : std::uint8_t { vehicle_report = 1, flow_table_batch = 2, signal_plan = 3, link_state = 4 };

inline constexpr std::uint8_t codec_version = 1;
inline constexpr std::size_t frame_header_size = 10;
inline constexpr std::size_t frame_trailer_size = 4;

/// Frame layout:
///   "OTRF" | version (1 byte) | type tag (1 byte) | payload length (4 bytes, big endian)
///   | payload (compact JSON, keys sorted) | CRC32 of everything before it (4 bytes, big endian)
/// Values must be finite.
[[nodiscard]] std::vector<std::uint8_t> encode_message(const Message& msg);

/// Throws Truncated, BadMagic, UnknownVersion, BadCrc, or CodecError for an
/// unknown type tag, trailing bytes, or a malformed payload.
[[nodiscard]] Message decode_message(const std::vector<std::uint8_t>& bytes);

[[nodiscard]] MessageType message_type(const Message& msg);

}  // namespace tisim
