#include "tisim/codec.hpp"

#include <zlib.h>

#include <cmath>
#include <json.hpp>
#include <string>

#include "tisim/error.hpp"

namespace tisim {

using nlohmann::json;

namespace {

json finite(double v) {
    if (!std::isfinite(v)) throw CodecError("cannot encode a non-finite value");
    return v;
}

json values_json(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(finite(x));
    return a;
}

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class Tag>
json opt_id(const std::optional<Id<Tag>>& v) {
    return v ? json(v->value) : json(nullptr);
}

json ids_json(const std::vector<ConnectionId>& ids) {
    json a = json::array();
    for (auto c : ids) a.push_back(c.value);
    return a;
}

std::vector<ConnectionId> connections_from(const json& j) {
    std::vector<ConnectionId> out;
    for (const auto& x : j) out.push_back(ConnectionId{x.get<int>()});
    return out;
}

json to_json(const VehicleReport& r) {
    return {{"vehicle", r.vehicle.value}, {"class", std::string(to_string(r.vehicle_class))},
            {"link", r.link.value},       {"lane", r.lane},
            {"cell", r.cell},             {"speed", r.speed},
            {"acceleration", r.acceleration}, {"steering", r.steering},
            {"timestamp", r.timestamp}};
}

VehicleReport report_from(const json& j) {
    VehicleReport r;
    r.vehicle = VehicleId{j.at("vehicle").get<int>()};
    r.vehicle_class = parse_vehicle_class(j.at("class").get<std::string>());
    r.link = LinkId{j.at("link").get<int>()};
    r.lane = j.at("lane").get<int>();
    r.cell = j.at("cell").get<int>();
    r.speed = j.at("speed").get<int>();
    r.acceleration = j.at("acceleration").get<int>();
    r.steering = j.at("steering").get<int>();
    r.timestamp = j.at("timestamp").get<std::uint64_t>();
    return r;
}

json to_json(const FlowTableEntry& e) {
    const auto& m = e.match;
    json match = {{"road", opt_id(m.road)},
                  {"lane", opt(m.lane)},
                  {"start", finite(m.window.start)},
                  {"duration", finite(m.window.duration)},
                  {"period", m.window.period ? finite(*m.window.period) : json(nullptr)},
                  {"vehicle", opt_id(m.vehicle)},
                  {"class", m.vehicle_class ? json(std::string(to_string(*m.vehicle_class))) : json(nullptr)}};
    json action = std::visit(
        [](const auto& a) -> json {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, SetSignal>) {
                return {{"type", "set_signal"},
                        {"intersection", a.intersection.value},
                        {"phase", a.phase.value},
                        {"color", std::string(to_string(a.color))},
                        {"connections", ids_json(a.connections)}};
            } else if constexpr (std::is_same_v<A, SpeedAdvisory>) {
                return {{"type", "speed_advisory"}, {"kmh", finite(a.kmh)}};
            } else if constexpr (std::is_same_v<A, LaneAssignment>) {
                return {{"type", "lane_assignment"}, {"lane", a.lane}};
            } else {
                json links = json::array();
                for (auto l : a.next_links) links.push_back(l.value);
                return {{"type", "route_segment"}, {"next_links", links}};
            }
        },
        e.action);
    return {{"id", e.id}, {"match", match}, {"action", action}, {"priority", e.priority}, {"version", e.version}};
}

FlowTableEntry entry_from(const json& j) {
    FlowTableEntry e;
    e.id = j.at("id").get<std::uint64_t>();
    e.priority = j.at("priority").get<int>();
    e.version = j.at("version").get<std::uint64_t>();
    const json& m = j.at("match");
    if (!m.at("road").is_null()) e.match.road = LinkId{m.at("road").get<int>()};
    if (!m.at("lane").is_null()) e.match.lane = m.at("lane").get<int>();
    e.match.window.start = m.at("start").get<double>();
    e.match.window.duration = m.at("duration").get<double>();
    if (!m.at("period").is_null()) e.match.window.period = m.at("period").get<double>();
    if (!m.at("vehicle").is_null()) e.match.vehicle = VehicleId{m.at("vehicle").get<int>()};
    if (!m.at("class").is_null()) e.match.vehicle_class = parse_vehicle_class(m.at("class").get<std::string>());
    const json& a = j.at("action");
    const std::string type = a.at("type").get<std::string>();
    if (type == "set_signal") {
        e.action = SetSignal{NodeId{a.at("intersection").get<int>()}, PhaseId{a.at("phase").get<int>()},
                             parse_signal_color(a.at("color").get<std::string>()), connections_from(a.at("connections"))};
    } else if (type == "speed_advisory") {
        e.action = SpeedAdvisory{a.at("kmh").get<double>()};
    } else if (type == "lane_assignment") {
        e.action = LaneAssignment{a.at("lane").get<int>()};
    } else if (type == "route_segment") {
        RouteSegment r;
        for (const auto& l : a.at("next_links")) r.next_links.push_back(LinkId{l.get<int>()});
        e.action = r;
    } else {
        throw CodecError("unknown flow action '" + type + "'");
    }
    return e;
}

json to_json(const SignalPlan& p) {
    json phases = json::array();
    for (const auto& ph : p.phases) {
        phases.push_back({{"id", ph.id.value},
                          {"connections", ids_json(ph.connections)},
                          {"green", finite(ph.green)},
                          {"yellow", finite(ph.yellow)},
                          {"red", finite(ph.red)}});
    }
    return {{"intersection", p.intersection.value},
            {"cycle_length", finite(p.cycle_length)},
            {"offset", finite(p.offset)},
            {"phases", phases}};
}

SignalPlan plan_from(const json& j) {
    SignalPlan p;
    p.intersection = NodeId{j.at("intersection").get<int>()};
    p.cycle_length = j.at("cycle_length").get<double>();
    p.offset = j.at("offset").get<double>();
    for (const auto& ph : j.at("phases")) {
        p.phases.push_back({PhaseId{ph.at("id").get<int>()}, connections_from(ph.at("connections")),
                            ph.at("green").get<double>(), ph.at("yellow").get<double>(), ph.at("red").get<double>()});
    }
    return p;
}

json to_json(const LinkStateRecord& r) {
    return {{"link", r.link.value}, {"sequence", r.sequence}, {"values", values_json(r.values)}};
}

LinkStateRecord record_from(const json& j) {
    LinkStateRecord r;
    r.link = LinkId{j.at("link").get<int>()};
    r.sequence = j.at("sequence").get<std::uint64_t>();
    for (const auto& v : j.at("values")) r.values.push_back(v.get<double>());
    return r;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | in[at + i];
    return v;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

constexpr std::uint8_t magic[4] = {'O', 'T', 'R', 'F'};

}  // namespace

MessageType message_type(const Message& msg) {
    return static_cast<MessageType>(msg.index() + 1);
}

std::vector<std::uint8_t> encode_message(const Message& msg) {
    const json payload = std::visit(
        [](const auto& m) -> json {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, FlowTableBatch>) {
                json a = json::array();
                for (const auto& e : m) a.push_back(to_json(e));
                return a;
            } else {
                return to_json(m);
            }
        },
        msg);
    const std::string text = payload.dump();
    std::vector<std::uint8_t> out(magic, magic + 4);
    out.push_back(codec_version);
    out.push_back(static_cast<std::uint8_t>(message_type(msg)));
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    put_u32(out, crc_of(out.data(), out.size()));
    return out;
}

Message decode_message(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) throw Truncated("frame shorter than its magic");
    if (!std::equal(magic, magic + 4, bytes.begin())) throw BadMagic("frame does not start with OTRF");
    if (bytes.size() < frame_header_size) throw Truncated("frame shorter than its header");
    if (bytes[4] != codec_version) throw UnknownVersion("unsupported frame version " + std::to_string(bytes[4]));
    const std::size_t length = get_u32(bytes, 6);
    const std::size_t total = frame_header_size + length + frame_trailer_size;
    if (bytes.size() < total) throw Truncated("frame declares " + std::to_string(length) + " payload bytes");
    if (get_u32(bytes, frame_header_size + length) != crc_of(bytes.data(), frame_header_size + length))
        throw BadCrc("frame checksum mismatch");
    if (bytes.size() > total) throw CodecError("trailing bytes after frame");

    json payload;
    try {
        payload = json::parse(bytes.begin() + frame_header_size, bytes.begin() + static_cast<std::ptrdiff_t>(frame_header_size + length));
        switch (static_cast<MessageType>(bytes[5])) {
            case MessageType::vehicle_report: return report_from(payload);
            case MessageType::flow_table_batch: {
                FlowTableBatch batch;
                for (const auto& e : payload) batch.push_back(entry_from(e));
                return batch;
            }
            case MessageType::signal_plan: return plan_from(payload);
            case MessageType::link_state: return record_from(payload);
        }
    } catch (const json::exception& e) {
        throw CodecError(std::string("malformed payload: ") + e.what());
    } catch (const ParseError& e) {
        throw CodecError(std::string("malformed payload: ") + e.what());
    }
    throw CodecError("unknown message type " + std::to_string(bytes[5]));
}

}  // namespace tisim
