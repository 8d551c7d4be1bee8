#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "ehrl/error.hpp"

namespace ehrl {

struct NodeId {
    std::int32_t value = -1;

    constexpr NodeId() = default;
    constexpr explicit NodeId(std::int32_t v) : value(v) {}
    constexpr std::size_t index() const { return static_cast<std::size_t>(value); }
    constexpr auto operator<=>(const NodeId&) const = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct NodePlacement {
    NodeId id;
    Point pos;
};

// Static network layout: positions, sink, neighbor sets within range and the
// pairwise distance matrix. Immutable once built.
class Topology {
public:
    std::size_t node_count() const { return positions_.size(); }
    // Devices are every node except the sink.
    std::size_t device_count() const { return positions_.size() - 1; }
    NodeId sink() const { return sink_; }
    double range() const { return range_; }
    bool is_sink(NodeId n) const { return n == sink_; }

    const Point& position(NodeId n) const { return positions_.at(n.index()); }
    double distance(NodeId a, NodeId b) const { return dist_[a.index() * node_count() + b.index()]; }

    // Ascending NodeId order; this order defines the observation's neighbor slots.
    const std::vector<NodeId>& neighbors(NodeId n) const { return neighbors_.at(n.index()); }
    bool are_neighbors(NodeId a, NodeId b) const {
        const auto& nb = neighbors(a);
        return std::binary_search(nb.begin(), nb.end(), b);
    }

    // Non-fatal findings from construction (isolated nodes).
    const std::vector<std::string>& warnings() const { return warnings_; }

    // BFS hop count to the sink; -1 when unreachable.
    const std::vector<int>& hops_to_sink() const { return hops_; }

    // Named structural roles ("corner", "sink_adjacent", "sink_adjacent_neighbor").
    const std::map<std::string, NodeId>& roles() const { return roles_; }
    void set_role(const std::string& name, NodeId n) {
        if (n.value < 0 || n.index() >= node_count()) throw ConfigError("role '" + name + "' names an unknown node");
        roles_[name] = n;
    }

    std::vector<NodePlacement> placements() const {
        std::vector<NodePlacement> out;
        for (std::size_t i = 0; i < positions_.size(); ++i) out.push_back({NodeId(static_cast<std::int32_t>(i)), positions_[i]});
        return out;
    }

private:
    friend Topology build_topology(std::vector<NodePlacement>, NodeId, double);

    std::vector<Point> positions_;
    NodeId sink_;
    double range_ = 0.0;
    std::vector<double> dist_;
    std::vector<std::vector<NodeId>> neighbors_;
    std::vector<std::string> warnings_;
    std::vector<int> hops_;
    std::map<std::string, NodeId> roles_;
};

namespace detail {

inline void derive_roles(Topology& topo) {
    const auto& hops = topo.hops_to_sink();
    const NodeId sink = topo.sink();
    NodeId corner, adjacent, adjacent_nb;

    // Corner: farthest in hops, then lowest degree, then farthest in meters.
    for (std::size_t i = 0; i < topo.node_count(); ++i) {
        NodeId n(static_cast<std::int32_t>(i));
        if (n == sink || hops[i] < 0) continue;
        if (corner.value < 0) { corner = n; continue; }
        auto key = [&](NodeId m) {
            return std::tuple(hops[m.index()], -static_cast<int>(topo.neighbors(m).size()), topo.distance(m, sink));
        };
        if (key(n) > key(corner)) corner = n;
    }

    // Sink-adjacent central node: sink neighbor closest to the device centroid.
    Point c{};
    for (std::size_t i = 0; i < topo.node_count(); ++i) {
        if (NodeId(static_cast<std::int32_t>(i)) == sink) continue;
        c.x += topo.position(NodeId(static_cast<std::int32_t>(i))).x;
        c.y += topo.position(NodeId(static_cast<std::int32_t>(i))).y;
    }
    c.x /= static_cast<double>(topo.device_count());
    c.y /= static_cast<double>(topo.device_count());
    double best = std::numeric_limits<double>::infinity();
    for (NodeId n : topo.neighbors(sink)) {
        const auto& p = topo.position(n);
        double d = std::hypot(p.x - c.x, p.y - c.y);
        if (d < best) { best = d; adjacent = n; }
    }

    // Its best-connected neighbor that is not itself sink-adjacent.
    if (adjacent.value >= 0) {
        std::size_t deg = 0;
        for (NodeId n : topo.neighbors(adjacent)) {
            if (n == sink || topo.are_neighbors(n, sink)) continue;
            if (topo.neighbors(n).size() > deg) { deg = topo.neighbors(n).size(); adjacent_nb = n; }
        }
    }
    if (corner.value >= 0) topo.set_role("corner", corner);
    if (adjacent.value >= 0) topo.set_role("sink_adjacent", adjacent);
    if (adjacent_nb.value >= 0) topo.set_role("sink_adjacent_neighbor", adjacent_nb);
}

} // namespace detail

// Builds a topology from placements. Node ids must be unique and cover 0..n-1.
// Pairs at exactly `range_m` are neighbors.
inline Topology build_topology(std::vector<NodePlacement> placements, NodeId sink, double range_m) {
    if (placements.empty()) throw ConfigError("topology has no nodes");
    if (!(std::isfinite(range_m) && range_m > 0.0)) throw ConfigError("transmission range must be a positive finite number");

    const std::size_t n = placements.size();
    std::vector<bool> seen(n, false);
    Topology topo;
    topo.positions_.resize(n);
    for (const auto& p : placements) {
        if (p.id.value < 0 || p.id.index() >= n)
            throw ConfigError("node id " + std::to_string(p.id.value) + " outside contiguous range 0.." + std::to_string(n - 1));
        if (seen[p.id.index()]) throw ConfigError("duplicate node id " + std::to_string(p.id.value));
        if (!std::isfinite(p.pos.x) || !std::isfinite(p.pos.y))
            throw ConfigError("node " + std::to_string(p.id.value) + " has a non-finite coordinate");
        seen[p.id.index()] = true;
        topo.positions_[p.id.index()] = p.pos;
    }
    if (sink.value < 0 || sink.index() >= n) throw ConfigError("sink id " + std::to_string(sink.value) + " is not a node");

    topo.sink_ = sink;
    topo.range_ = range_m;
    topo.dist_.assign(n * n, 0.0);
    topo.neighbors_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& a = topo.positions_[i];
            const auto& b = topo.positions_[j];
            double d = std::hypot(a.x - b.x, a.y - b.y);
            if (d == 0.0)
                throw ConfigError("nodes " + std::to_string(i) + " and " + std::to_string(j) + " are coincident");
            topo.dist_[i * n + j] = d;
            topo.dist_[j * n + i] = d;
            if (d <= range_m) {
                topo.neighbors_[i].push_back(NodeId(static_cast<std::int32_t>(j)));
                topo.neighbors_[j].push_back(NodeId(static_cast<std::int32_t>(i)));
            }
        }
    }
    for (auto& nb : topo.neighbors_) std::sort(nb.begin(), nb.end());

    topo.hops_.assign(n, -1);
    topo.hops_[sink.index()] = 0;
    std::deque<NodeId> frontier{sink};
    while (!frontier.empty()) {
        NodeId u = frontier.front();
        frontier.pop_front();
        for (NodeId v : topo.neighbors_[u.index()]) {
            if (topo.hops_[v.index()] >= 0) continue;
            topo.hops_[v.index()] = topo.hops_[u.index()] + 1;
            frontier.push_back(v);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (topo.neighbors_[i].empty())
            topo.warnings_.push_back("node " + std::to_string(i) + " has no neighbors and can never deliver data");
        else if (topo.hops_[i] < 0)
            topo.warnings_.push_back("node " + std::to_string(i) + " has no path to the sink");
    }
    detail::derive_roles(topo);
    return topo;
}

// The 15-device evaluation layout (100 m x 60 m field, sink id 15). Device ids
// increase with distance to the sink. Roles: node 14 is the low-degree corner
// four hops out, node 0 the central sink neighbor, node 8 its western neighbor.
inline std::vector<NodePlacement> fixture_15_device_placements() {
    const double xy[16][2] = {
        {55, 30}, {80, 48}, {84, 14}, {92, 32}, {64, 6},  {60, 56}, {42, 16}, {96, 54},
        {40, 42}, {40, 58}, {24, 30}, {22, 52}, {20, 10}, {8, 40},  {4, 4},   {72, 30},
    };
    std::vector<NodePlacement> out;
    for (std::int32_t i = 0; i < 16; ++i) out.push_back({NodeId(i), Point{xy[i][0], xy[i][1]}});
    return out;
}

inline Topology fixture_15_device_topology(double range_m = 25.0) {
    Topology t = build_topology(fixture_15_device_placements(), NodeId(15), range_m);
    t.set_role("corner", NodeId(14));
    t.set_role("sink_adjacent", NodeId(0));
    t.set_role("sink_adjacent_neighbor", NodeId(8));
    return t;
}

} // namespace ehrl
