#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ehrl/error.hpp"
#include "ehrl/esdsraa.hpp"
#include "ehrl/gap_trainer.hpp"
#include "ehrl/harvest.hpp"
#include "ehrl/qtable.hpp"
#include "ehrl/reward.hpp"
#include "ehrl/topology_io.hpp"
#include "ehrl/world.hpp"
#include "ehrl/yaml_util.hpp"

namespace ehrl {

inline constexpr const char* code_version = "ehrl 1.0.0";
inline constexpr const char* builtin_topology = "builtin:fixture15";

enum class Algorithm { gap, gapr, qtable, esdsraa };

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "gap") return Algorithm::gap;
    if (s == "gapr") return Algorithm::gapr;
    if (s == "qtable") return Algorithm::qtable;
    if (s == "esdsraa") return Algorithm::esdsraa;
    throw ConfigError("unknown algorithm '" + s + "' (expected gap, gapr, qtable or esdsraa)");
}
inline std::string algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::gap: return "gap";
    case Algorithm::gapr: return "gapr";
    case Algorithm::qtable: return "qtable";
    case Algorithm::esdsraa: return "esdsraa";
    }
    return "?";
}
// Label used in outputs; the heuristic is a reconstruction.
inline std::string algorithm_label(Algorithm a) { return a == Algorithm::esdsraa ? "esdsraa-style" : algorithm_name(a); }

struct OutputOptions {
    std::vector<int> detail_days; // empty: the last episode
    bool detail_all_nodes = false;
    int checkpoint_every = 10;    // 0 disables checkpoints
    bool event_log = false;       // per detail day
};

// Everything a run needs. Defaults reproduce the reference network parameters.
struct ExperimentConfig {
    Algorithm algorithm = Algorithm::gap;
    std::vector<std::uint64_t> seeds{1};
    int episodes = 50;
    std::string output_dir = "runs/out";
    std::string topology = builtin_topology;
    double range_m = 25.0;
    std::string trace; // CSV file or directory; empty selects the synthetic generator
    SyntheticTraceParams synthetic;
    WorldConfig world;
    RewardConfig reward;
    TrainerConfig trainer = [] {
        TrainerConfig t;
        t.scheduling = Scheduling::async; // experiments run free; tests pin lockstep
        return t;
    }();
    QTableConfig qtable;
    EsdsraaConfig esdsraa;
    OutputOptions output;
    std::string init_checkpoint; // optional starting weights or tables

    void validate() const {
        if (seeds.empty()) throw ConfigError("at least one seed is required");
        if (episodes < 1) throw ConfigError("episode count must be at least 1");
        if (!(range_m > 0.0)) throw ConfigError("transmission range must be positive");
        if (output_dir.empty()) throw ConfigError("output directory must be set");
        if (synthetic.p_peak_w < 0.0) throw ConfigError("peak harvest power must be non-negative");
        if (synthetic.noise_sigma < 0.0) throw ConfigError("noise sigma must be non-negative");
        if (!(synthetic.sample_period_s > 0.0)) throw ConfigError("trace sample period must be positive");
        for (int d : output.detail_days)
            if (d < 1 || d > episodes) throw ConfigError("detail day " + std::to_string(d) + " is outside 1.." + std::to_string(episodes));
        if (output.checkpoint_every < 0) throw ConfigError("checkpoint interval must be non-negative");
        world.validate();
        reward.validate();
        TrainerConfig t = trainer;
        t.max_episodes = episodes;
        t.validate();
        qtable.validate();
        esdsraa.validate();
    }

    std::vector<int> resolved_detail_days() const { return output.detail_days.empty() ? std::vector<int>{episodes} : output.detail_days; }

    Topology load_topology() const {
        Topology t = topology == builtin_topology ? fixture_15_device_topology(range_m) : ehrl::load_topology(topology, range_m);
        if (t.node_count() > slot_count) throw ConfigError("topology has more nodes than the observation encoding holds");
        return t;
    }

    HarvestSource harvest_source(std::size_t nodes, std::uint64_t seed) const {
        if (trace.empty()) return HarvestSource::synthetic(synthetic, derive_seed(seed, 0x7ace));
        return HarvestSource::load(trace, nodes);
    }

    // Component configs for one seed.
    WorldConfig world_for(std::uint64_t seed) const {
        WorldConfig w = world;
        w.seed = seed;
        return w;
    }
    TrainerConfig trainer_for(std::uint64_t seed) const {
        TrainerConfig t = trainer;
        t.max_episodes = episodes;
        t.seed = seed;
        t.routing_only = algorithm == Algorithm::gapr;
        return t;
    }
    QTableConfig qtable_for(std::uint64_t seed) const {
        QTableConfig q = qtable;
        q.seed = seed;
        return q;
    }
    RewardConfig reward_for(const Topology& topo) const {
        RewardConfig r = reward;
        r.device_count = static_cast<int>(topo.device_count());
        return r;
    }
};

namespace detail {

inline constexpr double seconds_to_hours(double s) { return s / seconds_per_hour; }

inline void parse_power(const YAML::Node& n, PowerProfile& p, const std::string& src) {
    yaml::check_keys(n, {"trans_w", "recv_w", "sleep_w", "sense_w"}, src, "power");
    yaml::read(n, "trans_w", p.trans_w, src);
    yaml::read(n, "recv_w", p.recv_w, src);
    yaml::read(n, "sleep_w", p.sleep_w, src);
    yaml::read(n, "sense_w", p.sense_w, src);
}

inline void parse_rate(const YAML::Node& n, RateModel& r, const std::string& src) {
    yaml::check_keys(n, {"mode", "constant_bps", "bandwidth_hz", "noise_floor_w", "path_loss_exponent", "tx_power_w"}, src, "rate");
    if (n["mode"]) {
        std::string m;
        yaml::read(n, "mode", m, src);
        if (m == "constant") r.mode = RateMode::constant;
        else if (m == "log_distance") r.mode = RateMode::log_distance;
        else throw ConfigError(yaml::where(n["mode"], src) + ": rate mode must be constant or log_distance");
    }
    yaml::read(n, "constant_bps", r.constant_rate_bps, src);
    yaml::read(n, "bandwidth_hz", r.bandwidth_hz, src);
    yaml::read(n, "noise_floor_w", r.noise_floor_w, src);
    yaml::read(n, "path_loss_exponent", r.path_loss_exponent, src);
    yaml::read(n, "tx_power_w", r.tx_power_w, src);
}

template <typename Parse>
inline auto parse_enum(const YAML::Node& map, const char* key, const std::string& src, Parse parse) -> std::optional<decltype(parse(std::string{}))> {
    if (!map[key]) return std::nullopt;
    std::string s;
    yaml::read(map, key, s, src);
    try {
        return parse(s);
    } catch (const ConfigError& e) {
        throw ConfigError(yaml::where(map[key], src) + ": " + e.what());
    }
}

} // namespace detail

// Parses a configuration document; absent keys keep their defaults and unknown
// keys are errors. A run manifest is itself a valid configuration.
inline ExperimentConfig parse_experiment_config(const YAML::Node& doc, const std::string& src) {
    ExperimentConfig c;
    if (!doc || doc.IsNull()) return c;
    if (!doc.IsMap()) throw ConfigError(src + ": configuration must be a mapping");
    yaml::check_keys(doc, {"algorithm", "seeds", "episodes", "output_dir", "topology", "harvest", "network", "reward", "trainer",
                           "qtable", "esdsraa", "output", "init_checkpoint", "code_version"},
                     src, "configuration");
    if (auto a = detail::parse_enum(doc, "algorithm", src, parse_algorithm)) c.algorithm = *a;
    if (doc["seeds"]) {
        if (!doc["seeds"].IsSequence()) throw ConfigError(yaml::where(doc["seeds"], src) + ": seeds must be a list");
        yaml::read(doc, "seeds", c.seeds, src);
    }
    yaml::read(doc, "episodes", c.episodes, src);
    yaml::read(doc, "output_dir", c.output_dir, src);
    yaml::read(doc, "topology", c.topology, src);
    yaml::read(doc, "init_checkpoint", c.init_checkpoint, src);

    if (const auto h = doc["harvest"]) {
        yaml::check_keys(h, {"trace", "peak_w", "noise_sigma", "sample_period_s"}, src, "harvest");
        yaml::read(h, "trace", c.trace, src);
        yaml::read(h, "peak_w", c.synthetic.p_peak_w, src);
        yaml::read(h, "noise_sigma", c.synthetic.noise_sigma, src);
        yaml::read(h, "sample_period_s", c.synthetic.sample_period_s, src);
    }
    if (const auto n = doc["network"]) {
        yaml::check_keys(n, {"range_m", "packet_min_bits", "packet_max_bits", "sense_rate_bps", "queue_capacity_bits", "e_max_j",
                             "power", "max_hops", "expiry_s", "day_start_h", "day_end_h", "tick_s", "reeval_period_s", "rate"},
                         src, "network");
        auto& w = c.world;
        yaml::read(n, "range_m", c.range_m, src);
        yaml::read(n, "packet_min_bits", w.packet_min_bits, src);
        yaml::read(n, "packet_max_bits", w.packet_max_bits, src);
        yaml::read(n, "sense_rate_bps", w.sense_rate_bps, src);
        yaml::read(n, "queue_capacity_bits", w.queue_capacity_bits, src);
        yaml::read(n, "e_max_j", w.e_max_j, src);
        if (n["power"]) detail::parse_power(n["power"], w.power, src);
        yaml::read(n, "max_hops", w.max_hops, src);
        yaml::read(n, "expiry_s", w.expiry_s, src);
        double h0 = detail::seconds_to_hours(w.day_start_s), h1 = detail::seconds_to_hours(w.day_end_s);
        yaml::read(n, "day_start_h", h0, src);
        yaml::read(n, "day_end_h", h1, src);
        w.day_start_s = h0 * seconds_per_hour;
        w.day_end_s = h1 * seconds_per_hour;
        yaml::read(n, "tick_s", w.tick_s, src);
        yaml::read(n, "reeval_period_s", w.reeval_period_s, src);
        if (n["rate"]) detail::parse_rate(n["rate"], w.rate, src);
    }
    // The synthetic daylight window follows the simulated day.
    c.synthetic.day_start_s = c.world.day_start_s;
    c.synthetic.day_end_s = c.world.day_end_s;

    if (const auto r = doc["reward"]) {
        yaml::check_keys(r, {"lambda", "spatial", "normalized_distance"}, src, "reward");
        yaml::read(r, "lambda", c.reward.lambda_base, src);
        yaml::read(r, "spatial", c.reward.spatial, src);
        yaml::read(r, "normalized_distance", c.reward.normalized_distance, src);
    }
    if (const auto t = doc["trainer"]) {
        yaml::check_keys(t, {"gamma", "lr_actor", "lr_critic", "max_step", "clip_norm", "entropy_coef", "scheduling", "upload",
                             "optimizer", "activation", "workers"},
                         src, "trainer");
        auto& tc = c.trainer;
        yaml::read(t, "gamma", tc.gamma, src);
        yaml::read(t, "lr_actor", tc.lr_actor, src);
        yaml::read(t, "lr_critic", tc.lr_critic, src);
        yaml::read(t, "max_step", tc.max_step, src);
        yaml::read(t, "clip_norm", tc.clip_norm, src);
        yaml::read(t, "entropy_coef", tc.entropy_coef, src);
        yaml::read(t, "workers", tc.workers, src);
        if (auto s = detail::parse_enum(t, "scheduling", src, parse_scheduling)) tc.scheduling = *s;
        if (auto u = detail::parse_enum(t, "upload", src, parse_upload_mode)) tc.upload = *u;
        if (auto o = detail::parse_enum(t, "optimizer", src, parse_optimizer)) tc.optimizer.kind = *o;
        if (auto a = detail::parse_enum(t, "activation", src, [](const std::string& s) {
                if (s == "relu") return HiddenActivation::relu;
                if (s == "tanh") return HiddenActivation::tanh;
                throw ConfigError("activation must be relu or tanh");
            }))
            tc.activation = *a;
    }
    if (const auto q = doc["qtable"]) {
        yaml::check_keys(q, {"alpha", "gamma", "eps_start", "eps_end", "eps_decay_episodes"}, src, "qtable");
        yaml::read(q, "alpha", c.qtable.alpha, src);
        yaml::read(q, "gamma", c.qtable.gamma, src);
        yaml::read(q, "eps_start", c.qtable.eps_start, src);
        yaml::read(q, "eps_end", c.qtable.eps_end, src);
        yaml::read(q, "eps_decay_episodes", c.qtable.eps_decay_episodes, src);
    }
    if (const auto e = doc["esdsraa"]) {
        yaml::check_keys(e, {"ewma_alpha", "ewma_initial"}, src, "esdsraa");
        yaml::read(e, "ewma_alpha", c.esdsraa.ewma_alpha, src);
        yaml::read(e, "ewma_initial", c.esdsraa.ewma_initial, src);
    }
    if (const auto o = doc["output"]) {
        yaml::check_keys(o, {"detail_days", "detail_all_nodes", "checkpoint_every", "event_log"}, src, "output");
        yaml::read(o, "detail_days", c.output.detail_days, src);
        yaml::read(o, "detail_all_nodes", c.output.detail_all_nodes, src);
        yaml::read(o, "checkpoint_every", c.output.checkpoint_every, src);
        yaml::read(o, "event_log", c.output.event_log, src);
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(src + ": " + e.what());
    }
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    return parse_experiment_config(yaml::load_file(path), path);
}

// Fully resolved configuration; loading it back yields an identical config.
inline std::string experiment_config_to_yaml(const ExperimentConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "code_version" << YAML::Value << code_version;
    out << YAML::Key << "algorithm" << YAML::Value << algorithm_name(c.algorithm);
    out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.seeds;
    out << YAML::Key << "episodes" << YAML::Value << c.episodes;
    out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
    out << YAML::Key << "topology" << YAML::Value << c.topology;
    if (!c.init_checkpoint.empty()) out << YAML::Key << "init_checkpoint" << YAML::Value << c.init_checkpoint;

    out << YAML::Key << "harvest" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "trace" << YAML::Value << c.trace;
    out << YAML::Key << "peak_w" << YAML::Value << c.synthetic.p_peak_w;
    out << YAML::Key << "noise_sigma" << YAML::Value << c.synthetic.noise_sigma;
    out << YAML::Key << "sample_period_s" << YAML::Value << c.synthetic.sample_period_s;
    out << YAML::EndMap;

    const auto& w = c.world;
    out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "range_m" << YAML::Value << c.range_m;
    out << YAML::Key << "packet_min_bits" << YAML::Value << w.packet_min_bits;
    out << YAML::Key << "packet_max_bits" << YAML::Value << w.packet_max_bits;
    out << YAML::Key << "sense_rate_bps" << YAML::Value << w.sense_rate_bps;
    out << YAML::Key << "queue_capacity_bits" << YAML::Value << w.queue_capacity_bits;
    out << YAML::Key << "e_max_j" << YAML::Value << w.e_max_j;
    out << YAML::Key << "power" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "trans_w" << YAML::Value << w.power.trans_w;
    out << YAML::Key << "recv_w" << YAML::Value << w.power.recv_w;
    out << YAML::Key << "sleep_w" << YAML::Value << w.power.sleep_w;
    out << YAML::Key << "sense_w" << YAML::Value << w.power.sense_w;
    out << YAML::EndMap;
    out << YAML::Key << "max_hops" << YAML::Value << w.max_hops;
    out << YAML::Key << "expiry_s" << YAML::Value << w.expiry_s;
    out << YAML::Key << "day_start_h" << YAML::Value << detail::seconds_to_hours(w.day_start_s);
    out << YAML::Key << "day_end_h" << YAML::Value << detail::seconds_to_hours(w.day_end_s);
    out << YAML::Key << "tick_s" << YAML::Value << w.tick_s;
    out << YAML::Key << "reeval_period_s" << YAML::Value << w.reeval_period_s;
    out << YAML::Key << "rate" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "mode" << YAML::Value << (w.rate.mode == RateMode::constant ? "constant" : "log_distance");
    out << YAML::Key << "constant_bps" << YAML::Value << w.rate.constant_rate_bps;
    out << YAML::Key << "bandwidth_hz" << YAML::Value << w.rate.bandwidth_hz;
    out << YAML::Key << "noise_floor_w" << YAML::Value << w.rate.noise_floor_w;
    out << YAML::Key << "path_loss_exponent" << YAML::Value << w.rate.path_loss_exponent;
    out << YAML::Key << "tx_power_w" << YAML::Value << w.rate.tx_power_w;
    out << YAML::EndMap;
    out << YAML::EndMap;

    out << YAML::Key << "reward" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "lambda" << YAML::Value << c.reward.lambda_base;
    out << YAML::Key << "spatial" << YAML::Value << c.reward.spatial;
    out << YAML::Key << "normalized_distance" << YAML::Value << c.reward.normalized_distance;
    out << YAML::EndMap;

    const auto& t = c.trainer;
    out << YAML::Key << "trainer" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "gamma" << YAML::Value << t.gamma;
    out << YAML::Key << "lr_actor" << YAML::Value << t.lr_actor;
    out << YAML::Key << "lr_critic" << YAML::Value << t.lr_critic;
    out << YAML::Key << "max_step" << YAML::Value << t.max_step;
    out << YAML::Key << "clip_norm" << YAML::Value << t.clip_norm;
    out << YAML::Key << "entropy_coef" << YAML::Value << t.entropy_coef;
    out << YAML::Key << "scheduling" << YAML::Value << scheduling_name(t.scheduling);
    out << YAML::Key << "upload" << YAML::Value << upload_mode_name(t.upload);
    out << YAML::Key << "optimizer" << YAML::Value << optimizer_name(t.optimizer.kind);
    out << YAML::Key << "activation" << YAML::Value << (t.activation == HiddenActivation::relu ? "relu" : "tanh");
    out << YAML::Key << "workers" << YAML::Value << t.workers;
    out << YAML::EndMap;

    out << YAML::Key << "qtable" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "alpha" << YAML::Value << c.qtable.alpha;
    out << YAML::Key << "gamma" << YAML::Value << c.qtable.gamma;
    out << YAML::Key << "eps_start" << YAML::Value << c.qtable.eps_start;
    out << YAML::Key << "eps_end" << YAML::Value << c.qtable.eps_end;
    out << YAML::Key << "eps_decay_episodes" << YAML::Value << c.qtable.eps_decay_episodes;
    out << YAML::EndMap;

    out << YAML::Key << "esdsraa" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "ewma_alpha" << YAML::Value << c.esdsraa.ewma_alpha;
    out << YAML::Key << "ewma_initial" << YAML::Value << c.esdsraa.ewma_initial;
    out << YAML::EndMap;

    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "detail_days" << YAML::Value << YAML::Flow << c.output.detail_days;
    out << YAML::Key << "detail_all_nodes" << YAML::Value << c.output.detail_all_nodes;
    out << YAML::Key << "checkpoint_every" << YAML::Value << c.output.checkpoint_every;
    out << YAML::Key << "event_log" << YAML::Value << c.output.event_log;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

} // namespace ehrl
