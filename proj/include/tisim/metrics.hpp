#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tisim {

/// How a path metric is built from the per-element values along the path.
enum class MetricKind {
    additive,        // sum over nodes and links
    multiplicative,  // product over nodes and links
    concave_max,     // max over nodes and links
    concave_min,     // min over nodes and links
};

enum class Direction { minimize, maximize };

struct MetricSpec {
    int index = 0;
    std::string name;
    MetricKind kind = MetricKind::additive;
    Direction direction = Direction::minimize;

    friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

/// Identity element of the kind's combine operation (0 for sums, 1 for products).
/// Concave kinds have none.
[[nodiscard]] double metric_identity(MetricKind kind);

/// w_k(p) from the node values and link values of a path.
///
/// The result is defined as combine(fold(nodes), fold(edges)) where each fold
/// runs in list order; callers that accumulate incrementally reproduce it
/// bit-exactly by keeping the node and edge partials separate.
/// Throws EmptyPath for concave kinds when both lists are empty.
[[nodiscard]] double aggregate_path(MetricKind kind, std::span<const double> node_values,
                                    std::span<const double> edge_values);

/// Running accumulator producing the same bits as aggregate_path.
class MetricAccumulator {
public:
    explicit MetricAccumulator(MetricKind kind);

    void add_node(double v);
    void add_edge(double v);

    [[nodiscard]] bool empty() const { return !has_node_ && !has_edge_; }
    /// Throws EmptyPath for an empty concave accumulator.
    [[nodiscard]] double value() const;
    [[nodiscard]] MetricKind kind() const { return kind_; }

private:
    MetricKind kind_;
    double nodes_;
    double edges_;
    bool has_node_ = false;
    bool has_edge_ = false;
};

[[nodiscard]] std::string_view to_string(MetricKind kind);
[[nodiscard]] std::string_view to_string(Direction d);
/// Throws ParseError on unknown names.
[[nodiscard]] MetricKind parse_metric_kind(std::string_view s);
[[nodiscard]] Direction parse_direction(std::string_view s);

/// True when `a` is strictly better than `b` under `d`.
[[nodiscard]] inline bool better(Direction d, double a, double b) { return d == Direction::minimize ? a < b : a > b; }

}  // namespace tisim
