#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ehrl/error.hpp"
#include "ehrl/topology.hpp"

namespace ehrl {

inline constexpr double seconds_per_hour = 3600.0;

// 64-bit mixer used to derive independent stream seeds from (seed, node, day).
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    return mix_seed(mix_seed(mix_seed(base ^ mix_seed(a)) ^ mix_seed(b + 0x51)) ^ mix_seed(c + 0xa3));
}

// Time-ordered harvested-power samples with step-hold interpolation.
class HarvestTrace {
public:
    HarvestTrace() = default;
    HarvestTrace(std::vector<double> t, std::vector<double> p, bool zero_outside = false)
        : t_(std::move(t)), p_(std::move(p)), zero_outside_(zero_outside) {
        if (t_.size() != p_.size()) throw ConfigError("trace time and power columns differ in length");
        if (t_.empty()) throw ConfigError("trace has no samples");
        for (std::size_t i = 0; i < t_.size(); ++i) {
            if (!std::isfinite(t_[i]) || !std::isfinite(p_[i])) throw ConfigError("trace sample " + std::to_string(i) + " is not finite");
            if (p_[i] < 0.0) throw ConfigError("trace sample " + std::to_string(i) + " has negative power");
            if (i > 0 && !(t_[i] > t_[i - 1])) throw ConfigError("trace timestamps must be strictly increasing (sample " + std::to_string(i) + ")");
        }
    }

    // Value of the latest sample at or before t. Generated traces read as zero
    // outside their sampled span; recorded traces reject t before the first sample.
    double power_at(double t) const {
        auto it = std::upper_bound(t_.begin(), t_.end(), t);
        if (it == t_.begin()) {
            if (zero_outside_) return 0.0;
            throw ContractError("time " + std::to_string(t) + " precedes the first trace sample");
        }
        if (zero_outside_ && it == t_.end() && t > t_.back()) return 0.0;
        return p_[static_cast<std::size_t>(it - t_.begin()) - 1];
    }

    const std::vector<double>& times() const { return t_; }
    const std::vector<double>& powers() const { return p_; }
    bool generated() const { return zero_outside_; }
    bool operator==(const HarvestTrace&) const = default;

private:
    std::vector<double> t_;
    std::vector<double> p_;
    bool zero_outside_ = false;
};

struct SyntheticTraceParams {
    double p_peak_w = 0.08;
    double day_start_s = 8 * seconds_per_hour;
    double day_end_s = 17 * seconds_per_hour;
    double noise_sigma = 0.1;
    double sample_period_s = 60.0;
};

// Half-sine daylight profile sampled every sample_period_s, each sample scaled
// by max(0, 1 + eps) with eps ~ N(0, sigma). Deterministic per seed.
inline HarvestTrace generate_synthetic_trace(const SyntheticTraceParams& prm, std::uint64_t seed) {
    if (prm.p_peak_w < 0.0) throw ConfigError("peak harvest power must be non-negative");
    if (!(prm.day_start_s < prm.day_end_s)) throw ConfigError("trace day start must precede day end");
    if (prm.noise_sigma < 0.0) throw ConfigError("noise sigma must be non-negative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double span = prm.day_end_s - prm.day_start_s;
    std::vector<double> ts, ps;
    for (double t = prm.day_start_s; t <= prm.day_end_s + 1e-9; t += prm.sample_period_s) {
        double base = prm.p_peak_w * std::max(0.0, std::sin(std::numbers::pi * (t - prm.day_start_s) / span));
        double eps = prm.noise_sigma > 0.0 ? prm.noise_sigma * noise(rng) : 0.0;
        ts.push_back(t);
        ps.push_back(base * std::max(0.0, 1.0 + eps));
    }
    // sin(pi) is ~1e-17, not zero; pin the end sample.
    if (std::abs(ts.back() - prm.day_end_s) < 1e-9) ps.back() = 0.0;
    return HarvestTrace(std::move(ts), std::move(ps), true);
}

inline HarvestTrace read_trace_csv(std::istream& in, const std::string& name = "trace") {
    std::vector<double> ts, ps;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        if (std::isalpha(static_cast<unsigned char>(line[first]))) continue; // header row
        auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError(name + ":" + std::to_string(lineno) + ": expected 't_seconds,power_watts'");
        try {
            std::size_t used = 0;
            double t = std::stod(line.substr(0, comma), &used);
            double p = std::stod(line.substr(comma + 1), &used);
            if (p < 0.0) throw ConfigError(name + ":" + std::to_string(lineno) + ": negative power");
            if (!ts.empty() && !(t > ts.back()))
                throw ConfigError(name + ":" + std::to_string(lineno) + ": timestamps must be strictly increasing");
            ts.push_back(t);
            ps.push_back(p);
        } catch (const std::logic_error&) {
            throw ConfigError(name + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    if (ts.empty()) throw ConfigError(name + ": no samples");
    return HarvestTrace(std::move(ts), std::move(ps));
}

inline HarvestTrace load_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file " + path.string());
    return read_trace_csv(in, path.string());
}

inline void write_trace_csv(std::ostream& out, const HarvestTrace& trace) {
    out << "t_seconds,power_watts\n";
    out.precision(17);
    for (std::size_t i = 0; i < trace.times().size(); ++i) out << trace.times()[i] << ',' << trace.powers()[i] << '\n';
}

// Where each node's harvested power comes from on a given day: generated
// half-sine traces (fresh noise per node and day) or recorded traces reused
// every day, either shared or per node.
class HarvestSource {
public:
    static HarvestSource synthetic(SyntheticTraceParams params, std::uint64_t seed) {
        HarvestSource s;
        s.synthetic_ = params;
        s.seed_ = seed;
        return s;
    }
    static HarvestSource recorded(std::optional<HarvestTrace> shared, std::map<std::int32_t, HarvestTrace> per_node = {}) {
        if (!shared && per_node.empty()) throw ConfigError("recorded harvest source needs at least one trace");
        HarvestSource s;
        s.shared_ = std::move(shared);
        s.per_node_ = std::move(per_node);
        return s;
    }

    // Reads trace_<id>.csv per node where present, trace.csv as the shared fallback.
    // A path to a single file is a shared trace.
    static HarvestSource load(const std::filesystem::path& path, std::size_t node_count) {
        if (std::filesystem::is_regular_file(path)) return recorded(load_trace_csv(path));
        if (!std::filesystem::is_directory(path)) throw IoError("trace path " + path.string() + " does not exist");
        std::optional<HarvestTrace> shared;
        if (std::filesystem::exists(path / "trace.csv")) shared = load_trace_csv(path / "trace.csv");
        std::map<std::int32_t, HarvestTrace> per;
        for (std::size_t i = 0; i < node_count; ++i) {
            auto f = path / ("trace_" + std::to_string(i) + ".csv");
            if (std::filesystem::exists(f)) per.emplace(static_cast<std::int32_t>(i), load_trace_csv(f));
        }
        if (!shared) {
            for (std::size_t i = 0; i < node_count; ++i)
                if (!per.count(static_cast<std::int32_t>(i)))
                    throw ConfigError("trace directory " + path.string() + " lacks trace.csv and trace_" + std::to_string(i) + ".csv");
        }
        return recorded(std::move(shared), std::move(per));
    }

    bool is_synthetic() const { return synthetic_.has_value(); }
    const std::optional<SyntheticTraceParams>& synthetic_params() const { return synthetic_; }

    HarvestTrace trace_for(NodeId node, int day) const {
        if (synthetic_) return generate_synthetic_trace(*synthetic_, derive_seed(seed_, static_cast<std::uint64_t>(node.value), static_cast<std::uint64_t>(day)));
        if (auto it = per_node_.find(node.value); it != per_node_.end()) return it->second;
        return *shared_;
    }

    std::vector<HarvestTrace> traces_for_day(std::size_t node_count, int day) const {
        std::vector<HarvestTrace> out;
        out.reserve(node_count);
        for (std::size_t i = 0; i < node_count; ++i) out.push_back(trace_for(NodeId(static_cast<std::int32_t>(i)), day));
        return out;
    }

private:
    std::optional<SyntheticTraceParams> synthetic_;
    std::uint64_t seed_ = 0;
    std::optional<HarvestTrace> shared_;
    std::map<std::int32_t, HarvestTrace> per_node_;
};

inline double harvest_power_at(const HarvestTrace& trace, double t) { return trace.power_at(t); }

} // namespace ehrl
