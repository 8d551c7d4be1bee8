// Command-line front end: run experiments, summarize runs, validate configs and
// generate traces or topologies.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ehrl/ehrl.hpp"

namespace {

enum ExitCode { ok = 0, usage = 1, config_error = 2, io_error = 3, runtime_error = 4 };

struct RunOverrides {
    std::string config;
    std::optional<std::string> algorithm;
    std::vector<std::uint64_t> seeds;
    std::optional<int> episodes;
    std::optional<std::string> out;
    std::optional<std::string> topology;
    std::optional<std::string> trace;
    std::optional<double> peak_w;
    std::optional<std::string> scheduling;
    std::optional<std::string> optimizer;
    std::vector<int> detail_days;
    bool all_nodes = false;
    std::optional<int> checkpoint_every;
    bool event_log = false;
    bool quiet = false;
};

ehrl::ExperimentConfig resolve(const RunOverrides& o) {
    ehrl::ExperimentConfig c = o.config.empty() ? ehrl::ExperimentConfig{} : ehrl::load_experiment_config(o.config);
    if (o.algorithm) c.algorithm = ehrl::parse_algorithm(*o.algorithm);
    if (!o.seeds.empty()) c.seeds = o.seeds;
    if (o.episodes) c.episodes = *o.episodes;
    if (o.out) c.output_dir = *o.out;
    if (o.topology) c.topology = *o.topology;
    if (o.trace) c.trace = *o.trace;
    if (o.peak_w) c.synthetic.p_peak_w = *o.peak_w;
    if (o.scheduling) c.trainer.scheduling = ehrl::parse_scheduling(*o.scheduling);
    if (o.optimizer) c.trainer.optimizer.kind = ehrl::parse_optimizer(*o.optimizer);
    if (!o.detail_days.empty()) c.output.detail_days = o.detail_days;
    if (o.all_nodes) c.output.detail_all_nodes = true;
    if (o.checkpoint_every) c.output.checkpoint_every = *o.checkpoint_every;
    if (o.event_log) c.output.event_log = true;
    c.validate();
    return c;
}

void add_run_options(CLI::App* cmd, RunOverrides& o) {
    cmd->add_option("-c,--config", o.config, "experiment configuration (YAML)")->envname("EHRL_CONFIG");
    cmd->add_option("-a,--algorithm", o.algorithm, "gap, gapr, qtable or esdsraa")->envname("EHRL_ALGORITHM");
    cmd->add_option("-s,--seeds", o.seeds, "seed list")->envname("EHRL_SEEDS")->delimiter(',');
    cmd->add_option("-e,--episodes", o.episodes, "simulated days")->envname("EHRL_EPISODES");
    cmd->add_option("-o,--out", o.out, "output directory")->envname("EHRL_OUT");
    cmd->add_option("--topology", o.topology, "topology YAML or builtin:fixture15")->envname("EHRL_TOPOLOGY");
    cmd->add_option("--trace", o.trace, "harvest trace CSV or directory")->envname("EHRL_TRACE");
    cmd->add_option("--peak-w", o.peak_w, "synthetic harvest peak power")->envname("EHRL_PEAK_W");
    cmd->add_option("--scheduling", o.scheduling, "lockstep or async")->envname("EHRL_SCHEDULING");
    cmd->add_option("--optimizer", o.optimizer, "sgd or adam")->envname("EHRL_OPTIMIZER");
    cmd->add_option("--detail-days", o.detail_days, "days with node detail output")->delimiter(',');
    cmd->add_flag("--all-nodes", o.all_nodes, "node detail for every device");
    cmd->add_option("--checkpoint-every", o.checkpoint_every, "checkpoint interval in episodes (0 disables)");
    cmd->add_flag("--event-log", o.event_log, "write the event log on detail days");
}

int run_cmd(const RunOverrides& o) {
    const auto cfg = resolve(o);
    const auto res = ehrl::run_experiment(cfg, true, [&](std::uint64_t seed, int e, const ehrl::EpisodeMetrics& m) {
        if (!o.quiet)
            std::cerr << ehrl::algorithm_label(cfg.algorithm) << " seed " << seed << " day " << e << ": reward " << m.total_reward
                      << ", sink " << m.sink_received_bits << " bits, delivery " << m.delivery_rate << "\n";
    });
    std::cout << "wrote " << cfg.output_dir << " (" << res.runs.size() << " seed" << (res.runs.size() == 1 ? "" : "s") << ")\n";
    return ok;
}

int summarize_cmd(const std::vector<std::string>& dirs, const std::string& out) {
    std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
    const auto res = ehrl::summarize(paths, out);
    std::cout << "algorithm,final5_sink_bits,final5_delivery_rate\n";
    for (const auto& [alg, a] : res.algorithms) std::cout << alg << ',' << a.final5_sink_bits << ',' << a.final5_delivery_rate << '\n';
    if (res.gap_over_qtable) std::cout << "gap/qtable sink ratio: " << *res.gap_over_qtable << '\n';
    if (res.gap_over_esdsraa) std::cout << "gap/esdsraa-style sink ratio: " << *res.gap_over_esdsraa << '\n';
    if (res.gap_over_gapr) std::cout << "gap/gapr sink ratio: " << *res.gap_over_gapr << '\n';
    std::cout << "wrote " << out << '\n';
    return ok;
}

int validate_cmd(const std::string& path) {
    const auto cfg = ehrl::load_experiment_config(path);
    const auto topo = cfg.load_topology();
    for (const auto& w : topo.warnings()) std::cerr << "warning: " << w << '\n';
    if (!cfg.trace.empty()) (void)cfg.harvest_source(topo.node_count(), cfg.seeds.front());
    std::cout << path << ": ok (" << ehrl::algorithm_label(cfg.algorithm) << ", " << topo.device_count() << " devices, "
              << cfg.episodes << " episodes, " << cfg.seeds.size() << " seeds)\n";
    return ok;
}

int gen_trace_cmd(const ehrl::SyntheticTraceParams& p, std::uint64_t seed, const std::string& out) {
    const auto trace = ehrl::generate_synthetic_trace(p, seed);
    if (out.empty() || out == "-") {
        ehrl::write_trace_csv(std::cout, trace);
        return ok;
    }
    std::ofstream f(out);
    if (!f) throw ehrl::IoError("cannot write " + out);
    ehrl::write_trace_csv(f, trace);
    if (!f) throw ehrl::IoError("failed writing " + out);
    return ok;
}

int gen_topology_cmd(bool fixture, std::size_t devices, double side, double range, std::uint64_t seed, const std::string& out) {
    const auto topo = fixture ? ehrl::fixture_15_device_topology(range) : ehrl::random_topology(devices, side, range, seed);
    if (topo.node_count() > ehrl::slot_count) throw ehrl::ConfigError("at most 15 devices fit the observation encoding");
    const auto text = ehrl::topology_to_yaml(topo);
    if (out.empty() || out == "-") {
        std::cout << text;
        return ok;
    }
    std::ofstream f(out);
    if (!f) throw ehrl::IoError("cannot write " + out);
    f << text;
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-harvesting multi-hop routing: simulation, training and baselines"};
    app.require_subcommand(1);

    RunOverrides run;
    auto* run_app = app.add_subcommand("run", "train or run one algorithm for every seed");
    add_run_options(run_app, run);
    run_app->add_flag("-q,--quiet", run.quiet, "no per-day progress");

    std::vector<std::string> dirs;
    std::string summary_out = "summary";
    auto* sum_app = app.add_subcommand("summarize", "aggregate run directories into comparison tables");
    sum_app->add_option("runs", dirs, "run directories")->required();
    sum_app->add_option("-o,--out", summary_out, "output directory")->envname("EHRL_SUMMARY_OUT");

    std::string validate_path;
    auto* val_app = app.add_subcommand("validate-config", "check a configuration file");
    val_app->add_option("config", validate_path, "configuration YAML")->required();

    ehrl::SyntheticTraceParams trace_params;
    std::uint64_t trace_seed = 1;
    std::string trace_out;
    double start_h = 8, end_h = 17;
    auto* trace_app = app.add_subcommand("gen-trace", "write a synthetic harvest trace CSV");
    trace_app->add_option("--peak-w", trace_params.p_peak_w, "peak power in watts");
    trace_app->add_option("--sigma", trace_params.noise_sigma, "relative noise sigma");
    trace_app->add_option("--period", trace_params.sample_period_s, "sample period in seconds");
    trace_app->add_option("--start-h", start_h, "daylight start hour");
    trace_app->add_option("--end-h", end_h, "daylight end hour");
    trace_app->add_option("--seed", trace_seed, "noise seed");
    trace_app->add_option("-o,--out", trace_out, "output file (stdout when omitted)");

    bool fixture = false;
    std::size_t devices = 15;
    double side = 100, range = 25;
    std::uint64_t topo_seed = 1;
    std::string topo_out;
    auto* topo_app = app.add_subcommand("gen-topology", "write a topology YAML");
    topo_app->add_flag("--fixture", fixture, "the built-in 15-device layout");
    topo_app->add_option("--devices", devices, "device count for a random layout");
    topo_app->add_option("--side", side, "square side in meters");
    topo_app->add_option("--range", range, "transmission range in meters");
    topo_app->add_option("--seed", topo_seed, "layout seed");
    topo_app->add_option("-o,--out", topo_out, "output file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : usage;
    }

    try {
        if (*run_app) return run_cmd(run);
        if (*sum_app) return summarize_cmd(dirs, summary_out);
        if (*val_app) return validate_cmd(validate_path);
        if (*trace_app) {
            trace_params.day_start_s = start_h * ehrl::seconds_per_hour;
            trace_params.day_end_s = end_h * ehrl::seconds_per_hour;
            return gen_trace_cmd(trace_params, trace_seed, trace_out);
        }
        if (*topo_app) return gen_topology_cmd(fixture, devices, side, range, topo_seed, topo_out);
    } catch (const ehrl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const ehrl::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return io_error;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return io_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return runtime_error;
    }
    return usage;
}
