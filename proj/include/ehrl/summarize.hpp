#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ehrl/config.hpp"
#include "ehrl/csv.hpp"
#include "ehrl/experiment.hpp"
#include "ehrl/yaml_util.hpp"

namespace ehrl {

inline const std::vector<std::string>& summary_metrics() {
    static const std::vector<std::string> m{"total_reward", "sink_bits", "sensed_bits", "delivery_rate"};
    return m;
}

struct Stat {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation; 0 for a single value
    std::size_t n = 0;
};

inline Stat mean_std(const std::vector<double>& v) {
    Stat s;
    s.n = v.size();
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

struct RunSeries {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::map<std::string, std::vector<double>> metrics; // per day, index 0 = day 1
};

struct AlgorithmSummary {
    std::string algorithm;
    std::map<std::string, std::vector<Stat>> per_day;
    double final5_sink_bits = 0.0;     // mean over seeds of the last five days' mean
    double final5_delivery_rate = 0.0;
};

struct SummaryResult {
    std::vector<RunSeries> series;
    std::map<std::string, AlgorithmSummary> algorithms;
    std::optional<double> gap_over_qtable;
    std::optional<double> gap_over_esdsraa;
    std::optional<double> gap_over_gapr;
};

namespace detail {

inline void flatten(const YAML::Node& n, const std::string& prefix, std::map<std::string, std::string>& out) {
    if (n.IsMap()) {
        for (const auto& kv : n) flatten(kv.second, prefix.empty() ? kv.first.as<std::string>() : prefix + "." + kv.first.as<std::string>(), out);
    } else if (n.IsSequence()) {
        std::string s;
        for (const auto& e : n) s += (s.empty() ? "" : ",") + e.as<std::string>();
        out[prefix] = "[" + s + "]";
    } else if (n.IsScalar()) {
        out[prefix] = n.as<std::string>();
    }
}

// Keys that must agree for runs to be comparable: everything that shapes the
// environment and the measurement, not the algorithm's own settings.
inline bool shared_key(const std::string& k) {
    for (const char* p : {"episodes", "topology", "harvest.", "network.", "reward."})
        if (k == p || k.rfind(p, 0) == 0) return true;
    return false;
}

} // namespace detail

inline std::vector<RunSeries> load_run(const std::filesystem::path& dir, std::map<std::string, std::string>& manifest_keys) {
    const auto manifest_path = dir / "manifest.yaml";
    const auto doc = yaml::load_file(manifest_path.string());
    const ExperimentConfig cfg = parse_experiment_config(doc, manifest_path.string());
    detail::flatten(doc, "", manifest_keys);
    std::vector<RunSeries> out;
    for (auto seed : cfg.seeds) {
        const auto t = csv::read((seed_dir(dir, seed) / "episodes.csv").string());
        RunSeries s;
        s.algorithm = algorithm_name(cfg.algorithm);
        s.seed = seed;
        for (const auto& m : summary_metrics())
            for (std::size_t r = 0; r < t.rows.size(); ++r) s.metrics[m].push_back(t.number(r, m));
        out.push_back(std::move(s));
    }
    return out;
}

inline double final_window_mean(const std::vector<double>& v, std::size_t window = 5) {
    if (v.empty()) return 0.0;
    const std::size_t n = std::min(window, v.size());
    double s = 0.0;
    for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
    return s / static_cast<double>(n);
}

inline SummaryResult summarize_series(std::vector<RunSeries> series) {
    SummaryResult res;
    res.series = std::move(series);
    std::map<std::string, std::vector<const RunSeries*>> by_alg;
    for (const auto& s : res.series) by_alg[s.algorithm].push_back(&s);
    for (const auto& [alg, runs] : by_alg) {
        AlgorithmSummary a;
        a.algorithm = alg;
        for (const auto& m : summary_metrics()) {
            std::size_t days = 0;
            for (const auto* r : runs) days = std::max(days, r->metrics.at(m).size());
            for (std::size_t d = 0; d < days; ++d) {
                std::vector<double> v;
                for (const auto* r : runs)
                    if (d < r->metrics.at(m).size()) v.push_back(r->metrics.at(m)[d]);
                a.per_day[m].push_back(mean_std(v));
            }
        }
        std::vector<double> sink, dr;
        for (const auto* r : runs) {
            sink.push_back(final_window_mean(r->metrics.at("sink_bits")));
            dr.push_back(final_window_mean(r->metrics.at("delivery_rate")));
        }
        a.final5_sink_bits = mean_std(sink).mean;
        a.final5_delivery_rate = mean_std(dr).mean;
        res.algorithms[alg] = std::move(a);
    }
    auto ratio = [&](const char* other) -> std::optional<double> {
        if (!res.algorithms.count("gap") || !res.algorithms.count(other)) return std::nullopt;
        const double den = res.algorithms[other].final5_sink_bits;
        if (!(den > 0.0)) return std::nullopt;
        return res.algorithms["gap"].final5_sink_bits / den;
    };
    res.gap_over_qtable = ratio("qtable");
    res.gap_over_esdsraa = ratio("esdsraa");
    res.gap_over_gapr = ratio("gapr");
    return res;
}

// Loads completed run directories, refuses mixes whose environments differ, and
// writes plot_data.csv (long format), summary.csv and comparison.csv to `out`.
inline SummaryResult summarize(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out) {
    if (runs.empty()) throw ConfigError("summarize needs at least one run directory");
    std::vector<RunSeries> series;
    std::optional<std::map<std::string, std::string>> reference;
    std::filesystem::path reference_dir;
    for (const auto& dir : runs) {
        std::map<std::string, std::string> keys;
        auto s = load_run(dir, keys);
        std::map<std::string, std::string> shared;
        for (const auto& [k, v] : keys)
            if (detail::shared_key(k)) shared[k] = v;
        if (!reference) {
            reference = shared;
            reference_dir = dir;
        } else if (shared != *reference) {
            std::string diff;
            std::set<std::string> all;
            for (const auto& kv : shared) all.insert(kv.first);
            for (const auto& kv : *reference) all.insert(kv.first);
            for (const auto& k : all) {
                auto a = reference->find(k);
                auto b = shared.find(k);
                if (a == reference->end() || b == shared.end() || a->second != b->second) diff += (diff.empty() ? "" : ", ") + k;
            }
            throw ConfigError("runs " + reference_dir.string() + " and " + dir.string() + " are not comparable; differing keys: " + diff);
        }
        for (auto& x : s) series.push_back(std::move(x));
    }
    SummaryResult res = summarize_series(std::move(series));

    std::filesystem::create_directories(out);
    csv::Writer plot((out / "plot_data.csv").string());
    plot.row("day", "algorithm", "seed", "metric", "value");
    for (const auto& s : res.series)
        for (const auto& m : summary_metrics())
            for (std::size_t d = 0; d < s.metrics.at(m).size(); ++d)
                plot.row(csv::num(static_cast<int>(d + 1)), s.algorithm, csv::num(s.seed), m, csv::num(s.metrics.at(m)[d]));
    plot.close();

    csv::Writer sum((out / "summary.csv").string());
    sum.row("algorithm", "day", "metric", "mean", "std", "n");
    for (const auto& [alg, a] : res.algorithms)
        for (const auto& m : summary_metrics())
            for (std::size_t d = 0; d < a.per_day.at(m).size(); ++d) {
                const auto& st = a.per_day.at(m)[d];
                sum.row(alg, csv::num(static_cast<int>(d + 1)), m, csv::num(st.mean), csv::num(st.std), csv::num(static_cast<int>(st.n)));
            }
    sum.close();

    csv::Writer cmp((out / "comparison.csv").string());
    cmp.row("algorithm", "label", "final5_sink_bits", "final5_delivery_rate", "gap_sink_ratio");
    for (const auto& [alg, a] : res.algorithms) {
        std::string r;
        if (res.algorithms.count("gap") && a.final5_sink_bits > 0.0) r = csv::num(res.algorithms.at("gap").final5_sink_bits / a.final5_sink_bits);
        cmp.row(alg, algorithm_label(parse_algorithm(alg)), csv::num(a.final5_sink_bits), csv::num(a.final5_delivery_rate), r);
    }
    cmp.close();
    return res;
}

} // namespace ehrl
