#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ehrl/experiment.hpp"
#include "ehrl/summarize.hpp"
#include "ehrl/topology_io.hpp"

using namespace ehrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    fs::path p = fs::temp_directory_path() / "ehrl_tests" / (std::string(info->test_suite_name()) + "_" + info->name()) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Three devices in a line toward the sink, written as a topology file.
std::string small_topology(const fs::path& dir) {
    fs::create_directories(dir);
    const auto t = build_topology({{NodeId(0), {0, 0}}, {NodeId(1), {10, 0}}, {NodeId(2), {20, 0}}, {NodeId(3), {30, 0}}}, NodeId(3), 15);
    const auto path = dir / "line.yaml";
    std::ofstream(path) << topology_to_yaml(t);
    return path.string();
}

ExperimentConfig small_config(Algorithm alg, const fs::path& out, const std::string& topo) {
    ExperimentConfig c;
    c.algorithm = alg;
    c.episodes = 1;
    c.seeds = {3};
    c.output_dir = out.string();
    c.topology = topo;
    c.range_m = 15;
    c.output.checkpoint_every = 0;
    c.trainer.scheduling = Scheduling::lockstep;
    return c;
}

} // namespace

TEST(ExperimentConfig, DefaultsMatchNetworkParameters) {
    const ExperimentConfig c;
    EXPECT_EQ(c.range_m, 25.0);
    EXPECT_EQ(c.world.packet_min_bits, 3720);
    EXPECT_EQ(c.world.packet_max_bits, 5120);
    EXPECT_EQ(c.world.sense_rate_bps, 80.0);
    EXPECT_EQ(c.world.queue_capacity_bits, 15 * 5120);
    EXPECT_EQ(c.world.power.trans_w, 0.1);
    EXPECT_EQ(c.world.power.recv_w, 0.05);
    EXPECT_EQ(c.world.power.sleep_w, 0.0005);
    EXPECT_EQ(c.world.power.sense_w, 0.01);
    EXPECT_EQ(c.world.e_max_j, 1.0);
    EXPECT_EQ(c.reward.lambda_base, 0.1);
    EXPECT_EQ(c.world.expiry_s, 1800.0);
    EXPECT_EQ(c.world.max_hops, 8);
    EXPECT_EQ(c.episodes, 50);
    EXPECT_EQ(c.trainer.scheduling, Scheduling::async);
    EXPECT_EQ(c.trainer.optimizer.kind, OptimizerKind::adam);
    EXPECT_NO_THROW(c.validate());
}

TEST(ExperimentConfig, YamlRoundTrip) {
    ExperimentConfig c;
    c.algorithm = Algorithm::qtable;
    c.seeds = {4, 9};
    c.episodes = 12;
    c.synthetic.p_peak_w = 0.0625;
    c.world.power.trans_w = 0.2;
    c.trainer.optimizer.kind = OptimizerKind::adam;
    c.output.detail_days = {3, 12};
    const std::string text = experiment_config_to_yaml(c);
    const auto back = parse_experiment_config(yaml::load_string(text, "mem"), "mem");
    EXPECT_EQ(experiment_config_to_yaml(back), text);
    EXPECT_EQ(back.algorithm, Algorithm::qtable);
    EXPECT_EQ(back.seeds, (std::vector<std::uint64_t>{4, 9}));
    EXPECT_EQ(back.synthetic.p_peak_w, 0.0625);
}

TEST(ExperimentConfig, StrictKeysAndValues) {
    auto expect_error = [](const std::string& text, const std::string& needle) {
        try {
            parse_experiment_config(yaml::load_string(text, "cfg.yaml"), "cfg.yaml");
            ADD_FAILURE() << "accepted: " << text;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_error("algorithm: gap\nepisodse: 3\n", "episodse");
    expect_error("algorithm: sarsa\n", "sarsa");
    expect_error("network:\n  power:\n    trans_watts: 1\n", "trans_watts");
    expect_error("episodes: 0\n", "episode");
    EXPECT_THROW(load_experiment_config("/nonexistent/cfg.yaml"), Error);
}

TEST(Experiment, EsdsraaSmokeWritesOneRow) {
    const auto out = scratch("run");
    const auto cfg = small_config(Algorithm::esdsraa, out, small_topology(out.parent_path() / "topo"));
    const auto res = run_experiment(cfg);
    ASSERT_EQ(res.runs.size(), 1u);
    const auto t = csv::read((seed_dir(out, 3) / "episodes.csv").string());
    EXPECT_EQ(t.header, episodes_header());
    EXPECT_EQ(t.rows.size(), 1u);
    EXPECT_TRUE(fs::exists(seed_dir(out, 3) / "node_detail_1.csv"));
    EXPECT_TRUE(fs::exists(out / "manifest.yaml"));
    const auto again = run_experiment(small_config(Algorithm::esdsraa, out.parent_path() / "again", cfg.topology));
    EXPECT_EQ(slurp(seed_dir(out, 3) / "episodes.csv"), slurp(seed_dir(out.parent_path() / "again", 3) / "episodes.csv"));
}

TEST(Experiment, LockstepGapIsByteIdenticalAndManifestReproduces) {
    const auto base = scratch("x").parent_path();
    const auto topo = small_topology(base / "topo");
    auto cfg = small_config(Algorithm::gap, base / "a", topo);
    cfg.output.event_log = true;
    run_experiment(cfg);
    cfg.output_dir = (base / "b").string();
    run_experiment(cfg);
    for (const char* f : {"episodes.csv", "node_detail_1.csv", "events_1.csv"})
        EXPECT_EQ(slurp(seed_dir(base / "a", 3) / f), slurp(seed_dir(base / "b", 3) / f)) << f;

    auto from_manifest = load_experiment_config((base / "a" / "manifest.yaml").string());
    from_manifest.output_dir = (base / "c").string();
    run_experiment(from_manifest);
    EXPECT_EQ(slurp(seed_dir(base / "a", 3) / "episodes.csv"), slurp(seed_dir(base / "c", 3) / "episodes.csv"));
}

TEST(Experiment, CheckpointsAreWrittenForLearners) {
    const auto out = scratch("run");
    auto cfg = small_config(Algorithm::qtable, out, small_topology(out.parent_path() / "topo"));
    cfg.episodes = 2;
    cfg.output.checkpoint_every = 1;
    run_experiment(cfg);
    const auto ckpt = Checkpoint::load(seed_dir(out, 3) / "checkpoints" / "episode_2.ckpt");
    EXPECT_TRUE(ckpt.has("qtable/0"));
}

TEST(Experiment, MissingTopologyIsRejectedBeforeRunning) {
    const auto out = scratch("run");
    auto cfg = small_config(Algorithm::esdsraa, out, "/nonexistent/topology.yaml");
    EXPECT_THROW(run_experiment(cfg), Error);
    EXPECT_FALSE(fs::exists(out / "manifest.yaml"));
}

TEST(Summarize, MeanAndSampleStdAcrossSeeds) {
    const auto base = scratch("x").parent_path();
    auto cfg = small_config(Algorithm::esdsraa, base / "run", small_topology(base / "topo"));
    cfg.seeds = {1, 2};
    cfg.episodes = 2;
    const auto res = run_experiment(cfg);
    const auto s = summarize({base / "run"}, base / "summary");
    const auto& per_day = s.algorithms.at("esdsraa").per_day.at("sink_bits");
    ASSERT_EQ(per_day.size(), 2u);
    for (std::size_t d = 0; d < 2; ++d) {
        const double a = static_cast<double>(res.runs[0].episodes[d].sink_received_bits);
        const double b = static_cast<double>(res.runs[1].episodes[d].sink_received_bits);
        EXPECT_NEAR(per_day[d].mean, (a + b) / 2, 1e-9);
        EXPECT_NEAR(per_day[d].std, std::abs(a - b) / std::sqrt(2.0), 1e-9);
        EXPECT_EQ(per_day[d].n, 2u);
    }
    for (const char* f : {"plot_data.csv", "summary.csv", "comparison.csv"}) EXPECT_TRUE(fs::exists(base / "summary" / f)) << f;
    const auto plot = csv::read((base / "summary" / "plot_data.csv").string());
    EXPECT_EQ(plot.header, (std::vector<std::string>{"day", "algorithm", "seed", "metric", "value"}));
    EXPECT_EQ(plot.rows.size(), 2u * 2u * summary_metrics().size());
}

TEST(Summarize, SingleRunEqualsItsEpisodes) {
    const auto mean = mean_std({4.0});
    EXPECT_EQ(mean.mean, 4.0);
    EXPECT_EQ(mean.std, 0.0);
    const auto two = mean_std({1.0, 3.0});
    EXPECT_DOUBLE_EQ(two.std, std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(final_window_mean({1, 2, 3, 4, 5, 6, 7}), 5.0);
    EXPECT_DOUBLE_EQ(final_window_mean({2, 4}), 3.0);
}

TEST(Summarize, RatiosArePresentAndFinite) {
    RunSeries gap{"gap", 1, {}}, esd{"esdsraa", 1, {}};
    for (const auto& m : summary_metrics()) {
        gap.metrics[m] = {1, 1, 1, 1, 12};
        esd.metrics[m] = {1, 1, 1, 1, 10};
    }
    const auto s = summarize_series({gap, esd});
    ASSERT_TRUE(s.gap_over_esdsraa.has_value());
    EXPECT_NEAR(*s.gap_over_esdsraa, 16.0 / 14.0, 1e-12);
    EXPECT_FALSE(s.gap_over_qtable.has_value());
}

TEST(Summarize, MixedEnvironmentsListDifferingKeys) {
    const auto base = scratch("x").parent_path();
    const auto topo = small_topology(base / "topo");
    auto a = small_config(Algorithm::esdsraa, base / "a", topo);
    run_experiment(a);
    auto b = small_config(Algorithm::qtable, base / "b", topo);
    b.synthetic.p_peak_w = 0.05;
    b.world.power.trans_w = 0.2;
    run_experiment(b);
    try {
        summarize({base / "a", base / "b"}, base / "summary");
        FAIL() << "mixed runs accepted";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("harvest.peak_w"), std::string::npos) << msg;
        EXPECT_NE(msg.find("network.power.trans_w"), std::string::npos) << msg;
        EXPECT_EQ(msg.find("algorithm"), std::string::npos) << msg;
    }
    auto c = small_config(Algorithm::qtable, base / "c", topo);
    run_experiment(c);
    EXPECT_NO_THROW(summarize({base / "a", base / "c"}, base / "summary"));
}

TEST(Summarize, RejectsEmptyInput) { EXPECT_THROW(summarize({}, scratch("s")), ConfigError); }
