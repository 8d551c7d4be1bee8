#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ehrl/checkpoint.hpp"
#include "ehrl/config.hpp"
#include "ehrl/csv.hpp"
#include "ehrl/episode.hpp"
#include "ehrl/esdsraa.hpp"
#include "ehrl/gap_trainer.hpp"
#include "ehrl/qtable.hpp"

namespace ehrl {

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<EpisodeMetrics> episodes;
    std::vector<double> wallclock_s;
    std::optional<Mlp<float>> actor; // learned algorithms only
    std::optional<Mlp<float>> critic;
    std::filesystem::path dir;
};

struct ExperimentResult {
    ExperimentConfig config;
    Topology topology;
    std::vector<SeedRun> runs;
};

// Nodes reported in node detail files: the structural roles unless all nodes
// are requested or the topology names none.
inline std::vector<NodeId> detail_nodes(const Topology& topo, bool all) {
    std::vector<NodeId> out;
    if (!all) {
        for (const char* role : {"corner", "sink_adjacent", "sink_adjacent_neighbor"})
            if (auto it = topo.roles().find(role); it != topo.roles().end()) out.push_back(it->second);
    }
    if (out.empty())
        for (std::size_t i = 0; i < topo.node_count(); ++i)
            if (!topo.is_sink(NodeId(static_cast<std::int32_t>(i)))) out.push_back(NodeId(static_cast<std::int32_t>(i)));
    return out;
}

inline std::string role_of(const Topology& topo, NodeId n) {
    for (const auto& [name, id] : topo.roles())
        if (id == n) return name;
    return "";
}

inline const std::vector<std::string>& episodes_header() {
    static const std::vector<std::string> h{"episode", "total_reward", "sink_bits", "sensed_bits", "delivery_rate"};
    return h;
}

inline const std::vector<std::string>& node_detail_header() {
    static const std::vector<std::string> h{"day", "node", "role", "sensed_bits", "received_bits", "transmitted_bits",
                                            "attempted_bits", "dropped_bits", "queued_end_bits", "in_flight_bits",
                                            "relayed_share", "energy_trans_j", "energy_recv_j", "energy_sleep_j",
                                            "energy_sense_j", "harvested_j", "decisions"};
    return h;
}

inline void write_episodes_csv(const std::filesystem::path& path, const std::vector<EpisodeMetrics>& eps) {
    csv::Writer w(path.string());
    w.row(episodes_header());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const auto& m = eps[i];
        w.row(csv::num(static_cast<int>(i + 1)), csv::num(m.total_reward), csv::num(m.sink_received_bits), csv::num(m.sensed_bits),
              csv::num(m.delivery_rate));
    }
    w.close();
}

inline void write_node_detail_csv(const std::filesystem::path& path, int day, const EpisodeMetrics& m, const Topology& topo, bool all) {
    csv::Writer w(path.string());
    w.row(node_detail_header());
    const double relayed = static_cast<double>(m.relayed_bits_total());
    for (NodeId n : detail_nodes(topo, all)) {
        const auto& s = m.nodes.at(n.index());
        const double share = relayed > 0 ? static_cast<double>(s.received_bits) / relayed : 0.0;
        w.row(csv::num(day), csv::num(n.value), role_of(topo, n), csv::num(s.sensed_bits), csv::num(s.received_bits),
              csv::num(s.transmitted_ok_bits), csv::num(s.attempted_bits), csv::num(s.dropped_bits), csv::num(s.queued_end_bits),
              csv::num(s.in_flight_bits), csv::num(share), csv::num(s.energy_j[static_cast<std::size_t>(Activity::trans)]),
              csv::num(s.energy_j[static_cast<std::size_t>(Activity::recv)]), csv::num(s.energy_j[static_cast<std::size_t>(Activity::sleep)]),
              csv::num(s.energy_j[static_cast<std::size_t>(Activity::sense)]), csv::num(s.harvested_j), csv::num(s.decisions));
    }
    w.close();
}

inline std::filesystem::path seed_dir(const std::filesystem::path& out, std::uint64_t seed) {
    return out / ("seed_" + std::to_string(seed));
}

// Checks every written row against the range and conservation invariants.
inline void validate_run_output(const std::filesystem::path& dir) {
    auto fail = [&](const std::string& what) { throw Error("output validation failed: " + what); };
    const auto eps = csv::read((dir / "episodes.csv").string());
    if (eps.header != episodes_header()) fail((dir / "episodes.csv").string() + " has an unexpected header");
    for (std::size_t r = 0; r < eps.rows.size(); ++r) {
        const double dr = eps.number(r, "delivery_rate");
        if (!(dr >= 0.0 && dr <= 1.0)) fail("delivery rate out of [0, 1] in episode row " + std::to_string(r + 1));
        if (eps.number(r, "sink_bits") > eps.number(r, "sensed_bits") + 0.5)
            fail("sink received more than was sensed in episode row " + std::to_string(r + 1));
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("node_detail_", 0) != 0) continue;
        const auto t = csv::read(entry.path().string());
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double in = t.number(r, "sensed_bits") + t.number(r, "received_bits");
            const double out = t.number(r, "transmitted_bits") + t.number(r, "dropped_bits") + t.number(r, "queued_end_bits") +
                               t.number(r, "in_flight_bits");
            if (std::abs(in - out) > 0.5) fail(name + " row " + std::to_string(r + 1) + " breaks data conservation");
            for (const char* col : {"energy_trans_j", "energy_recv_j", "energy_sleep_j", "energy_sense_j", "harvested_j"})
                if (t.number(r, col) < 0.0) fail(name + " row " + std::to_string(r + 1) + " has negative " + col);
        }
    }
}

// Called after each episode: (seed, episode, metrics).
using ProgressCallback = std::function<void(std::uint64_t, int, const EpisodeMetrics&)>;
// Called with every decision request and the action the controller chose.
using ActionObserver = std::function<void(const DecisionRequest&, const AgentAction&)>;

namespace detail {

class ObservedController final : public Controller {
public:
    ObservedController(Controller& inner, const ActionObserver& obs) : inner_(inner), obs_(obs) {}
    AgentAction act(const World& w, const DecisionRequest& r) override {
        const AgentAction a = inner_.act(w, r);
        obs_(r, a);
        return a;
    }
    void on_day_start(const World& w) override { inner_.on_day_start(w); }
    void on_event(const World& w, const StepEvent& e) override { inner_.on_event(w, e); }
    void on_transition(const World& w, const Transition& t) override { inner_.on_transition(w, t); }
    void on_day_end(const World& w) override { inner_.on_day_end(w); }

private:
    Controller& inner_;
    const ActionObserver& obs_;
};

struct AlgorithmRunner {
    virtual ~AlgorithmRunner() = default;
    virtual Controller& controller() = 0;
    virtual void checkpoint(Checkpoint&) const {}
    virtual void finish(SeedRun&) const {}
};

struct GapRunner final : AlgorithmRunner {
    GapRunner(const TrainerConfig& tc, const RewardConfig& rc, const Topology& topo, std::pair<Mlp<float>, Mlp<float>> init)
        : store(std::move(init.first), std::move(init.second), tc.optimizer), trainer(tc, store, rc, topo) {}
    Controller& controller() override { return trainer; }
    void checkpoint(Checkpoint& c) const override {
        auto s = store.download();
        c.put("actor", *s.actor);
        c.put("critic", *s.critic);
    }
    void finish(SeedRun& r) const override {
        auto s = store.download();
        r.actor = *s.actor;
        r.critic = *s.critic;
    }
    GlobalStore<float> store;
    GapTrainer trainer;
};

struct QTableRunner final : AlgorithmRunner {
    QTableRunner(const QTableConfig& q, const RewardConfig& rc, std::size_t nodes) : ctl(q, rc, nodes) {}
    Controller& controller() override { return ctl; }
    void checkpoint(Checkpoint& c) const override { put_qtables(c, ctl); }
    QTableController ctl;
};

struct EsdsraaRunner final : AlgorithmRunner {
    EsdsraaRunner(const EsdsraaConfig& e, std::size_t nodes) : ctl(e, nodes) {}
    Controller& controller() override { return ctl; }
    EsdsraaController ctl;
};

inline std::unique_ptr<AlgorithmRunner> make_runner(const ExperimentConfig& cfg, const Topology& topo, std::uint64_t seed) {
    const RewardConfig rc = cfg.reward_for(topo);
    switch (cfg.algorithm) {
    case Algorithm::gap:
    case Algorithm::gapr: {
        const TrainerConfig tc = cfg.trainer_for(seed);
        auto init = initial_models(tc);
        if (!cfg.init_checkpoint.empty()) {
            const auto c = Checkpoint::load(cfg.init_checkpoint);
            init = {c.get_mlp<float>("actor"), c.get_mlp<float>("critic")};
            if (!init.first.same_shape(initial_models(tc).first) || !init.second.same_shape(initial_models(tc).second))
                throw ConfigError("initial checkpoint networks have the wrong shape");
        }
        return std::make_unique<GapRunner>(tc, rc, topo, std::move(init));
    }
    case Algorithm::qtable: {
        auto r = std::make_unique<QTableRunner>(cfg.qtable_for(seed), rc, topo.node_count());
        if (!cfg.init_checkpoint.empty()) get_qtables(Checkpoint::load(cfg.init_checkpoint), r->ctl);
        return r;
    }
    case Algorithm::esdsraa: return std::make_unique<EsdsraaRunner>(cfg.esdsraa, topo.node_count());
    }
    throw ConfigError("unknown algorithm");
}

} // namespace detail

// Runs the configured algorithm for every seed. With `write` set, each seed
// gets its own directory of metric files and the run a manifest.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write = true, const ProgressCallback& progress = {},
                                       const ActionObserver& on_action = {}) {
    cfg.validate();
    ExperimentResult result{cfg, cfg.load_topology(), {}};
    const Topology& topo = result.topology;
    const std::filesystem::path out = cfg.output_dir;
    const auto detail_days = cfg.resolved_detail_days();
    if (write) {
        std::filesystem::create_directories(out);
        std::ofstream manifest(out / "manifest.yaml");
        if (!manifest) throw IoError("cannot write " + (out / "manifest.yaml").string());
        manifest << experiment_config_to_yaml(cfg);
    }
    for (std::uint64_t seed : cfg.seeds) {
        SeedRun run;
        run.seed = seed;
        run.dir = seed_dir(out, seed);
        if (write) std::filesystem::create_directories(run.dir);
        World world(topo, cfg.world_for(seed), cfg.harvest_source(topo.node_count(), seed));
        const RewardConfig rc = cfg.reward_for(topo);
        auto runner = detail::make_runner(cfg, topo, seed);
        std::optional<detail::ObservedController> observed;
        if (on_action) observed.emplace(runner->controller(), on_action);
        Controller& ctl = observed ? static_cast<Controller&>(*observed) : runner->controller();
        for (int e = 1; e <= cfg.episodes; ++e) {
            const bool detail = std::find(detail_days.begin(), detail_days.end(), e) != detail_days.end();
            std::ofstream events;
            if (write && detail && cfg.output.event_log) {
                events.open(run.dir / ("events_" + std::to_string(e) + ".csv"));
                if (!events) throw IoError("cannot write event log in " + run.dir.string());
                world.set_event_log(&events);
            }
            const auto t0 = std::chrono::steady_clock::now();
            EpisodeMetrics m = run_episode(world, ctl, e, rc);
            run.wallclock_s.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            world.set_event_log(nullptr);
            if (write && detail) write_node_detail_csv(run.dir / ("node_detail_" + std::to_string(e) + ".csv"), e, m, topo, cfg.output.detail_all_nodes);
            if (write && cfg.output.checkpoint_every > 0 && e % cfg.output.checkpoint_every == 0 && cfg.algorithm != Algorithm::esdsraa) {
                Checkpoint c;
                runner->checkpoint(c);
                std::filesystem::create_directories(run.dir / "checkpoints");
                c.save(run.dir / "checkpoints" / ("episode_" + std::to_string(e) + ".ckpt"));
            }
            if (progress) progress(seed, e, m);
            run.episodes.push_back(std::move(m));
        }
        runner->finish(run);
        if (write) {
            write_episodes_csv(run.dir / "episodes.csv", run.episodes);
            csv::Writer timing((run.dir / "timing.csv").string());
            timing.row("episode", "wallclock_s");
            for (std::size_t i = 0; i < run.wallclock_s.size(); ++i) timing.row(csv::num(static_cast<int>(i + 1)), csv::num(run.wallclock_s[i]));
            timing.close();
            validate_run_output(run.dir);
        }
        result.runs.push_back(std::move(run));
    }
    return result;
}

} // namespace ehrl
