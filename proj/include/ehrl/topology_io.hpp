#pragma once

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ehrl/error.hpp"
#include "ehrl/topology.hpp"
#include "ehrl/yaml_util.hpp"

namespace ehrl {

// Topology document:
//
//   sink: 15
//   nodes:
//     - {id: 0, x: 55, y: 30}
//   roles: {corner: 14, sink_adjacent: 0, sink_adjacent_neighbor: 8}   # optional
inline Topology parse_topology(const YAML::Node& doc, double range_m, const std::string& source) {
    if (!doc || !doc.IsMap()) throw ConfigError(source + ": topology document must be a mapping");
    yaml::check_keys(doc, {"sink", "nodes", "roles"}, source, "topology");
    if (!doc["sink"]) throw ConfigError(source + ": topology needs a 'sink' id");
    if (!doc["nodes"] || !doc["nodes"].IsSequence()) throw ConfigError(source + ": topology needs a 'nodes' list");
    int sink = -1;
    yaml::read(doc, "sink", sink, source);
    std::vector<NodePlacement> placements;
    for (const auto& n : doc["nodes"]) {
        yaml::check_keys(n, {"id", "x", "y"}, source, "node entry");
        if (!n["id"] || !n["x"] || !n["y"]) throw ConfigError(yaml::where(n, source) + ": node entries need id, x and y");
        int id = -1;
        double x = 0, y = 0;
        yaml::read(n, "id", id, source);
        yaml::read(n, "x", x, source);
        yaml::read(n, "y", y, source);
        placements.push_back({NodeId(id), Point{x, y}});
    }
    Topology topo = build_topology(std::move(placements), NodeId(sink), range_m);
    if (const auto roles = doc["roles"]) {
        yaml::check_keys(roles, {"corner", "sink_adjacent", "sink_adjacent_neighbor"}, source, "roles");
        for (const auto& kv : roles) {
            int id = -1;
            try {
                id = kv.second.as<int>();
            } catch (const YAML::Exception&) {
                throw ConfigError(yaml::where(kv.second, source) + ": role ids must be integers");
            }
            if (id < 0 || static_cast<std::size_t>(id) >= topo.node_count() || topo.is_sink(NodeId(id)))
                throw ConfigError(yaml::where(kv.second, source) + ": role '" + kv.first.as<std::string>() + "' names an invalid device id");
            topo.set_role(kv.first.as<std::string>(), NodeId(id));
        }
    }
    return topo;
}

inline Topology load_topology(const std::string& path, double range_m) {
    return parse_topology(yaml::load_file(path), range_m, path);
}

inline std::string topology_to_yaml(const Topology& topo) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "sink" << YAML::Value << topo.sink().value;
    out << YAML::Key << "nodes" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : topo.placements()) {
        out << YAML::Flow << YAML::BeginMap << YAML::Key << "id" << YAML::Value << p.id.value << YAML::Key << "x" << YAML::Value
            << p.pos.x << YAML::Key << "y" << YAML::Value << p.pos.y << YAML::EndMap;
    }
    out << YAML::EndSeq;
    if (!topo.roles().empty()) {
        out << YAML::Key << "roles" << YAML::Value << YAML::BeginMap;
        for (const auto& [name, id] : topo.roles()) out << YAML::Key << name << YAML::Value << id.value;
        out << YAML::EndMap;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

inline void save_topology(const std::string& path, const Topology& topo) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << topology_to_yaml(topo);
}

// Random connected layout: devices scattered uniformly in a square around a
// central sink, redrawn until every device reaches the sink.
inline Topology random_topology(std::size_t devices, double side_m, double range_m, std::uint64_t seed, int max_tries = 1000) {
    if (devices < 1) throw ConfigError("need at least one device");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, side_m);
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        std::vector<NodePlacement> pl;
        for (std::size_t i = 0; i < devices; ++i) pl.push_back({NodeId(static_cast<std::int32_t>(i)), Point{u(rng), u(rng)}});
        pl.push_back({NodeId(static_cast<std::int32_t>(devices)), Point{side_m / 2, side_m / 2}});
        Topology t;
        try {
            t = build_topology(pl, NodeId(static_cast<std::int32_t>(devices)), range_m);
        } catch (const ConfigError&) {
            continue; // coincident draw
        }
        if (t.warnings().empty()) return t;
    }
    throw ConfigError("no connected layout found; enlarge the range or shrink the area");
}

} // namespace ehrl
