// Acceptance harness: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Long training runs are shared between the
// learning, comparison, delivery, structure and masking criteria.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ehrl/ehrl.hpp"
#include "gradcheck.hpp"
#include "scripted_scenario.hpp"

using namespace ehrl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Verdict {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

std::vector<Verdict> verdicts;
std::ofstream report;

void log(const std::string& line) {
    std::cout << "  " << line << std::endl;
    if (report) report << "  " << line << std::endl;
}

void verdict(int id, const std::string& name, bool pass, const std::string& detail) {
    verdicts.push_back({id, name, pass, detail});
    const std::string line = fmt("[%s] %d %s: %s", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::cout << line << std::endl;
    if (report) report << line << std::endl;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Relative path to content hash for every CSV below `dir`.
std::map<std::string, std::size_t> csv_hashes(const fs::path& dir) {
    std::map<std::string, std::size_t> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv")
            out[fs::relative(e.path(), dir).string()] = std::hash<std::string>{}(slurp(e.path()));
    return out;
}

ExperimentConfig base_config(Algorithm alg, const fs::path& out, std::vector<std::uint64_t> seeds, int episodes) {
    ExperimentConfig c;
    c.algorithm = alg;
    c.seeds = std::move(seeds);
    c.episodes = episodes;
    c.output_dir = out.string();
    c.trainer.scheduling = Scheduling::lockstep;
    c.output.checkpoint_every = 0;
    return c;
}

// ---------------------------------------------------------------------------

void gradient_fidelity() {
    const auto t0 = Clock::now();
    double critic = 0.0, actor = 0.0;
    std::size_t compared = 0, skipped = 0;
    for (auto act : {HiddenActivation::relu, HiddenActivation::tanh})
        for (std::uint64_t s = 0; s < 100; ++s) {
            const auto d = gradcheck::check_draw(1000 + s, act);
            critic = std::max(critic, d.critic.error);
            actor = std::max(actor, d.actor.error);
            compared += d.critic.compared + d.actor.compared;
            skipped += d.critic.kink_skips + d.actor.kink_skips;
        }
    const double secs = seconds_since(t0);
    verdict(1, "gradient fidelity", critic < 1e-4 && actor < 1e-4 && secs < 10.0,
            fmt("max rel err critic %.3g actor %.3g (< 1e-4) over 100 ReLU and 100 tanh draws, %zu probes compared, %zu ReLU "
                "kink-crossing probes skipped, %.2f s (< 10 s)",
                critic, actor, compared, skipped, secs));
}

void reward_oracle() {
    const auto t0 = Clock::now();
    const RewardConfig cfg;
    const auto rec = scripted::run_scripted_episode(cfg);
    std::set<Outcome> seen;
    for (const auto& e : rec.events) seen.insert(e.outcome);
    int missing = 0;
    for (Outcome o : {Outcome::loop_return, Outcome::hop_expired, Outcome::time_expired, Outcome::receiver_offline,
                      Outcome::queue_overflow, Outcome::delivered_to_sink})
        missing += seen.count(o) == 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < rec.transitions.size(); ++i) {
        const auto& tr = rec.transitions[i];
        worst = std::max(worst, std::abs(rec.local[i] - scripted::oracle_local(tr.event, cfg.lambda_base, cfg.device_count)));
        worst = std::max(worst, std::abs(rec.spatial[i] - scripted::oracle_spatial(tr, rec.events, cfg.lambda_base, cfg.device_count)));
    }
    const double secs = seconds_since(t0);
    verdict(2, "reward oracle", missing == 0 && !rec.transitions.empty() && worst <= 1e-12 && secs < 1.0,
            fmt("%zu transitions, %d outcome kinds missing, max |diff| %.3g (<= 1e-12), %.3f s (< 1 s)", rec.transitions.size(), missing,
                worst, secs));
}

void conservation(const fs::path& work) {
    const auto t0 = Clock::now();
    std::int64_t violations = 0, unconserved = 0, queue_out = 0;
    std::string per_policy;
    for (Algorithm alg : {Algorithm::gap, Algorithm::gapr, Algorithm::qtable, Algorithm::esdsraa}) {
        const auto ta = Clock::now();
        const auto cfg = base_config(alg, work / "conservation" / algorithm_name(alg), {1}, 5);
        const auto res = run_experiment(cfg);
        for (const auto& m : res.runs.at(0).episodes) {
            violations += m.violations.total();
            for (const auto& n : m.nodes) {
                unconserved += !n.conserved();
                queue_out += n.queued_end_bits > cfg.world.queue_capacity_bits;
            }
        }
        per_policy += fmt(" %s %.1fs", algorithm_name(alg).c_str(), seconds_since(ta));
    }
    const double secs = seconds_since(t0);
    verdict(3, "conservation and constraints", violations == 0 && unconserved == 0 && queue_out == 0 && secs < 120.0,
            fmt("%lld violations, %lld unconserved node-days, %lld queue overruns; %.1f s (< 120 s):%s", static_cast<long long>(violations),
                static_cast<long long>(unconserved), static_cast<long long>(queue_out), secs, per_policy.c_str()));
}

void determinism(const fs::path& work) {
    std::vector<std::map<std::string, std::size_t>> hashes;
    for (const char* run : {"a", "b"}) {
        auto cfg = base_config(Algorithm::gap, work / "determinism" / run, {11}, 2);
        cfg.output.detail_days = {1, 2};
        cfg.output.detail_all_nodes = true;
        cfg.output.event_log = true;
        run_experiment(cfg);
        auto h = csv_hashes(work / "determinism" / run);
        h.erase(fs::path("seed_11/timing.csv").string()); // wall-clock seconds
        hashes.push_back(std::move(h));
    }
    std::size_t differing = 0;
    for (const auto& [name, h] : hashes[0]) differing += !hashes[1].count(name) || hashes[1].at(name) != h;
    const bool same = differing == 0 && hashes[0].size() == hashes[1].size() && !hashes[0].empty();
    verdict(8, "determinism", same, fmt("%zu CSV files hashed per run, %zu differ", hashes[0].size(), differing));
}

// ---------------------------------------------------------------------------

struct MainRuns {
    std::map<Algorithm, ExperimentResult> results;
    std::map<Algorithm, fs::path> dirs;
    double gap_seconds = 0.0;
    std::uint64_t sampled = 0, masked = 0;
};

MainRuns main_runs(const fs::path& work, const std::vector<std::uint64_t>& seeds, int episodes) {
    MainRuns out;
    for (Algorithm alg : {Algorithm::esdsraa, Algorithm::qtable, Algorithm::gap, Algorithm::gapr}) {
        const auto dir = work / "main" / algorithm_name(alg);
        const auto cfg = base_config(alg, dir, seeds, episodes);
        const bool neural = alg == Algorithm::gap || alg == Algorithm::gapr;
        ActionObserver audit;
        if (neural)
            audit = [&](const DecisionRequest& r, const AgentAction& a) {
                ++out.sampled;
                out.masked += a.relay_slot < 0 || !r.mask.valid(static_cast<std::size_t>(a.relay_slot));
            };
        const auto progress = [&](std::uint64_t seed, int e, const EpisodeMetrics& m) {
            if (e == 1 || e % 10 == 0)
                log(fmt("%s seed %llu episode %d: reward %.1f sink %lld bits delivery %.3f", algorithm_name(alg).c_str(),
                        static_cast<unsigned long long>(seed), e, m.total_reward, static_cast<long long>(m.sink_received_bits),
                        m.delivery_rate));
        };
        const auto t0 = Clock::now();
        out.results.emplace(alg, run_experiment(cfg, true, progress, audit));
        const double secs = seconds_since(t0);
        if (alg == Algorithm::gap) out.gap_seconds = secs;
        out.dirs[alg] = dir;
        log(fmt("%s: %d episodes x %zu seeds in %.1f s", algorithm_name(alg).c_str(), episodes, seeds.size(), secs));
    }
    return out;
}

double final5(const std::vector<EpisodeMetrics>& eps, const std::function<double(const EpisodeMetrics&)>& f) {
    std::vector<double> v;
    for (const auto& m : eps) v.push_back(f(m));
    return final_window_mean(v);
}

double sink_bits(const EpisodeMetrics& m) { return static_cast<double>(m.sink_received_bits); }
double delivery(const EpisodeMetrics& m) { return m.delivery_rate; }

double seed_mean(const ExperimentResult& r, const std::function<double(const EpisodeMetrics&)>& f) {
    double s = 0.0;
    for (const auto& run : r.runs) s += final5(run.episodes, f);
    return s / static_cast<double>(r.runs.size());
}

void learning_signal(const MainRuns& m, int episodes) {
    const auto& runs = m.results.at(Algorithm::gap).runs;
    std::vector<double> curve(static_cast<std::size_t>(episodes), 0.0);
    for (const auto& run : runs)
        for (int e = 0; e < episodes; ++e) curve[static_cast<std::size_t>(e)] += run.episodes[static_cast<std::size_t>(e)].total_reward / runs.size();
    for (const auto& run : runs) {
        std::vector<double> r;
        for (const auto& ep : run.episodes) r.push_back(ep.total_reward);
        log(fmt("gap seed %llu: episode 1 reward %.1f, final-5 mean %.1f, ratio %.3f", static_cast<unsigned long long>(run.seed), r.front(),
                final_window_mean(r), final_window_mean(r) / r.front()));
    }
    const double first = curve.front();
    const double plateau = final_window_mean(curve);
    double worst_dev = 0.0;
    for (std::size_t e = 9; e < curve.size(); ++e) worst_dev = std::max(worst_dev, std::abs(curve[e] - plateau) / std::abs(plateau));
    const double ratio = plateau / first;
    const bool pass = ratio >= 2.0 && curve.size() >= 10 && worst_dev <= 0.15 && m.gap_seconds <= 1800.0;
    verdict(4, "learning signal", pass,
            fmt("seed-mean final-5 reward %.1f / episode-1 %.1f = %.3f (>= 2); max deviation from plateau over episodes 10-%d %.1f%% "
                "(<= 15%%); GAP runs %.1f s (<= 1800 s)",
                plateau, first, ratio, episodes, 100.0 * worst_dev, m.gap_seconds));
}

void ordinal(const MainRuns& m) {
    const auto& gap = m.results.at(Algorithm::gap);
    bool every_seed = true;
    for (std::size_t s = 0; s < gap.runs.size(); ++s) {
        const double g = final5(gap.runs[s].episodes, sink_bits);
        std::string line = fmt("seed %llu final-5 sink bits: gap %.0f", static_cast<unsigned long long>(gap.runs[s].seed), g);
        for (Algorithm alg : {Algorithm::esdsraa, Algorithm::qtable, Algorithm::gapr}) {
            const double b = final5(m.results.at(alg).runs[s].episodes, sink_bits);
            every_seed = every_seed && g > b;
            line += fmt(", %s %.0f", algorithm_name(alg).c_str(), b);
        }
        log(line);
    }
    const double g = seed_mean(gap, sink_bits);
    const double over_esd = g / seed_mean(m.results.at(Algorithm::esdsraa), sink_bits);
    const double over_q = g / seed_mean(m.results.at(Algorithm::qtable), sink_bits);
    const double over_gapr = g / seed_mean(m.results.at(Algorithm::gapr), sink_bits);
    verdict(5, "ordinal comparison", every_seed && over_esd >= 1.10 && over_q >= 1.15,
            fmt("GAP above every baseline on every seed: %s; GAP/ESDSRAA %.3f (>= 1.10), GAP/Q-table %.3f (>= 1.15), GAP/GAPR %.3f",
                every_seed ? "yes" : "no", over_esd, over_q, over_gapr));
}

void delivery_rates(const MainRuns& m) {
    const double g = seed_mean(m.results.at(Algorithm::gap), delivery);
    const double esd = seed_mean(m.results.at(Algorithm::esdsraa), delivery);
    const double q = seed_mean(m.results.at(Algorithm::qtable), delivery);
    const double r = seed_mean(m.results.at(Algorithm::gapr), delivery);
    const bool pass = g >= 0.85 && std::abs(esd - g) <= 0.10 && g - r >= 0.15 && g - q >= 0.15;
    verdict(6, "delivery rate", pass,
            fmt("final-5 delivery GAP %.3f (>= 0.85), ESDSRAA %.3f (|diff| %.3f <= 0.10), GAPR %.3f (gap %.3f >= 0.15), Q-table %.3f "
                "(gap %.3f >= 0.15)",
                g, esd, std::abs(esd - g), r, g - r, q, g - q));
}

void structure(const MainRuns& m, int episodes) {
    int good = 0, seeds = 0;
    for (const auto& run : m.results.at(Algorithm::gap).runs) {
        ++seeds;
        const auto t = csv::read((run.dir / ("node_detail_" + std::to_string(episodes) + ".csv")).string());
        double corner_share = -1.0, nb_sent = 0.0, nb_sensed = 0.0;
        bool have_nb = false;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::string& role = t.rows[r].at(t.column("role"));
            if (role == "corner") corner_share = t.number(r, "relayed_share");
            if (role == "sink_adjacent_neighbor") {
                have_nb = true;
                nb_sent = t.number(r, "transmitted_bits");
                nb_sensed = t.number(r, "sensed_bits");
            }
        }
        const bool ok = corner_share >= 0.0 && corner_share < 0.05 && have_nb && nb_sent > nb_sensed;
        good += ok;
        log(fmt("seed %llu day %d: corner relayed share %.4f, sink-adjacent neighbor transmitted %.0f vs sensed %.0f bits",
                static_cast<unsigned long long>(run.seed), episodes, corner_share, nb_sent, nb_sensed));
    }
    verdict(7, "structural behavior", 2 * good > seeds,
            fmt("%d of %d seeds show corner share < 5%% and neighbor transmitted > sensed (majority needed)", good, seeds));
}

void masking(const MainRuns& m) {
    verdict(9, "masking safety", m.sampled >= 1000000 && m.masked == 0,
            fmt("%llu sampled training actions (>= 1e6), %llu masked selections", static_cast<unsigned long long>(m.sampled),
                static_cast<unsigned long long>(m.masked)));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string work = "acceptance_runs";
    std::vector<std::uint64_t> seeds{1, 2, 3};
    int episodes = 50;
    app.add_option("--work-dir", work, "directory for run outputs");
    app.add_option("--seeds", seeds, "seeds of the shared training runs")->delimiter(',');
    app.add_option("--episodes", episodes, "episodes of the shared training runs")->check(CLI::Range(10, 1000));
    CLI11_PARSE(app, argc, argv);

    const fs::path dir = work;
    fs::remove_all(dir);
    fs::create_directories(dir);
    report.open(dir / "report.txt");
    const auto t0 = Clock::now();
    try {
        gradient_fidelity();
        reward_oracle();
        determinism(dir);
        conservation(dir);
        const auto m = main_runs(dir, seeds, episodes);
        learning_signal(m, episodes);
        ordinal(m);
        delivery_rates(m);
        structure(m, episodes);
        masking(m);
        std::vector<fs::path> dirs;
        for (const auto& [alg, d] : m.dirs) dirs.push_back(d);
        summarize(dirs, dir / "summary");
    } catch (const std::exception& e) {
        std::cout << "[FAIL] acceptance aborted: " << e.what() << std::endl;
        return 1;
    }

    std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
    int failed = 0;
    std::cout << "\nsummary (" << fmt("%.0f s", seconds_since(t0)) << ")\n";
    if (report) report << "\nsummary\n";
    for (const auto& v : verdicts) {
        failed += !v.pass;
        const std::string line = fmt("%s %d %s", v.pass ? "PASS" : "FAIL", v.id, v.name.c_str());
        std::cout << line << "\n";
        if (report) report << line << "\n";
    }
    std::cout << std::flush;
    return failed == 0 ? 0 : 1;
}
