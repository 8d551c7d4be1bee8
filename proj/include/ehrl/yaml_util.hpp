#pragma once

#include <yaml-cpp/yaml.h>

#include <set>
#include <string>
#include <vector>

#include "ehrl/error.hpp"

namespace ehrl::yaml {

inline std::string where(const YAML::Node& n, const std::string& source) {
    const auto m = n.Mark();
    if (m.line < 0) return source;
    return source + ":" + std::to_string(m.line + 1);
}

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
inline void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& source,
                       const std::string& section) {
    if (!map) return;
    if (!map.IsMap()) throw ConfigError(where(map, source) + ": '" + section + "' must be a mapping");
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ConfigError(where(kv.first, source) + ": unknown key '" + key + "' in " + section);
    }
}

template <typename T>
inline void read(const YAML::Node& map, const char* key, T& out, const std::string& source) {
    const YAML::Node v = map[key];
    if (!v) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where(v, source) + ": value of '" + key + "' has the wrong type");
    }
}

inline YAML::Node load_file(const std::string& path) {
    try {
        return YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        throw IoError("cannot open " + path);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
}

inline YAML::Node load_string(const std::string& text, const std::string& source) {
    try {
        return YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
}

} // namespace ehrl::yaml
