#include "tisim/metrics.hpp"

#include <algorithm>

#include "tisim/error.hpp"

namespace tisim {

double metric_identity(MetricKind kind) {
    switch (kind) {
        case MetricKind::additive:
            return 0.0;
        case MetricKind::multiplicative:
            return 1.0;
        default:
            throw EmptyPath("concave metric has no identity value");
    }
}

MetricAccumulator::MetricAccumulator(MetricKind kind) : kind_(kind) {
    const bool concave = kind == MetricKind::concave_max || kind == MetricKind::concave_min;
    nodes_ = edges_ = concave ? 0.0 : metric_identity(kind);
}

namespace {

double fold(MetricKind kind, double acc, double v, bool first) {
    switch (kind) {
        case MetricKind::additive:
            return acc + v;
        case MetricKind::multiplicative:
            return acc * v;
        case MetricKind::concave_max:
            return first ? v : std::max(acc, v);
        case MetricKind::concave_min:
            return first ? v : std::min(acc, v);
    }
    return acc;
}

}  // namespace

void MetricAccumulator::add_node(double v) {
    nodes_ = fold(kind_, nodes_, v, !has_node_);
    has_node_ = true;
}

void MetricAccumulator::add_edge(double v) {
    edges_ = fold(kind_, edges_, v, !has_edge_);
    has_edge_ = true;
}

double MetricAccumulator::value() const {
    switch (kind_) {
        case MetricKind::additive:
            return nodes_ + edges_;
        case MetricKind::multiplicative:
            return nodes_ * edges_;
        case MetricKind::concave_max:
        case MetricKind::concave_min:
            if (!has_node_ && !has_edge_) throw EmptyPath("concave aggregate over an empty path");
            if (!has_node_) return edges_;
            if (!has_edge_) return nodes_;
            return kind_ == MetricKind::concave_max ? std::max(nodes_, edges_) : std::min(nodes_, edges_);
    }
    return 0.0;
}

double aggregate_path(MetricKind kind, std::span<const double> node_values, std::span<const double> edge_values) {
    MetricAccumulator acc(kind);
    for (double v : node_values) acc.add_node(v);
    for (double v : edge_values) acc.add_edge(v);
    return acc.value();
}

std::string_view to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::additive:
            return "additive";
        case MetricKind::multiplicative:
            return "multiplicative";
        case MetricKind::concave_max:
            return "concave_max";
        case MetricKind::concave_min:
            return "concave_min";
    }
    return "?";
}

std::string_view to_string(Direction d) { return d == Direction::minimize ? "minimize" : "maximize"; }

MetricKind parse_metric_kind(std::string_view s) {
    if (s == "additive") return MetricKind::additive;
    if (s == "multiplicative") return MetricKind::multiplicative;
    if (s == "concave_max") return MetricKind::concave_max;
    if (s == "concave_min") return MetricKind::concave_min;
    throw ParseError("unknown metric kind '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
    if (s == "minimize" || s == "min") return Direction::minimize;
    if (s == "maximize" || s == "max") return Direction::maximize;
    throw ParseError("unknown direction '" + std::string(s) + "'");
}

}  // namespace tisim
