#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ehrl/episode.hpp"
#include "ehrl/error.hpp"
#include "ehrl/global_store.hpp"
#include "ehrl/losses.hpp"
#include "ehrl/mlp.hpp"
#include "ehrl/optim.hpp"
#include "ehrl/policy.hpp"
#include "ehrl/reward.hpp"
#include "ehrl/thread_pool.hpp"
#include "ehrl/world.hpp"

namespace ehrl {

// lockstep: updates run inline between ticks, runs are bit-reproducible.
// async: updates run on a worker pool while the simulation keeps going.
enum class Scheduling { lockstep, async };
// push: workers send gradients that the store applies to the global weights.
// replace: workers update local copies and overwrite the store.
enum class UploadMode { push, replace };

inline Scheduling parse_scheduling(const std::string& s) {
    if (s == "lockstep") return Scheduling::lockstep;
    if (s == "async") return Scheduling::async;
    throw ConfigError("unknown scheduling mode '" + s + "' (expected lockstep or async)");
}
inline std::string scheduling_name(Scheduling s) { return s == Scheduling::lockstep ? "lockstep" : "async"; }
inline UploadMode parse_upload_mode(const std::string& s) {
    if (s == "push") return UploadMode::push;
    if (s == "replace") return UploadMode::replace;
    throw ConfigError("unknown upload mode '" + s + "' (expected push or replace)");
}
inline std::string upload_mode_name(UploadMode m) { return m == UploadMode::push ? "push" : "replace"; }

struct TrainerConfig {
    int max_episodes = 50;
    double gamma = 0.9;
    double lr_actor = 1e-4;
    double lr_critic = 3e-4;
    int max_step = 50;
    double clip_norm = 5.0;
    double entropy_coef = 0.0;
    Scheduling scheduling = Scheduling::lockstep;
    UploadMode upload = UploadMode::push;
    bool routing_only = false; // energy head ignored, threshold pinned at the lowest level
    OptimizerConfig optimizer{OptimizerKind::adam};
    HiddenActivation activation = HiddenActivation::relu;
    std::uint64_t seed = 1;
    int workers = 0; // async pool size; 0 picks min(devices, hardware threads)

    void validate() const {
        if (max_episodes < 1) throw ConfigError("episode count must be at least 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("discount must lie in (0, 1]");
        if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be positive");
        if (max_step < 1) throw ConfigError("update interval must be at least 1 step");
        if (clip_norm < 0.0) throw ConfigError("clip norm must be non-negative");
        if (entropy_coef < 0.0) throw ConfigError("entropy coefficient must be non-negative");
        if (workers < 0) throw ConfigError("worker count must be non-negative");
    }
};

struct UpdateResult {
    MlpGradients<float> actor_grads;
    MlpGradients<float> critic_grads;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
};

// Gradients of both losses for one agent batch. Pure given its inputs.
inline UpdateResult compute_update(const Mlp<float>& actor, const Mlp<float>& critic, const ExperienceBatch& batch,
                                   const TrainerConfig& cfg) {
    const Mat<float> states = stack_states<float>(batch);
    double bootstrap = 0.0;
    if (!batch.back().terminal)
        bootstrap = static_cast<double>(critic.forward(observation_column<float>(batch.back().next_obs))(0, 0));
    std::vector<double> rewards;
    std::vector<bool> terminal;
    std::vector<NeighborMask> masks;
    std::vector<AgentAction> actions;
    for (const auto& e : batch) {
        rewards.push_back(e.reward);
        terminal.push_back(e.terminal);
        masks.push_back(e.mask);
        actions.push_back(e.action);
    }
    const auto returns = n_step_returns(rewards, bootstrap, cfg.gamma, terminal);
    auto lc = critic_loss_and_grads(critic, states, returns);
    std::vector<double> adv(returns.size());
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = returns[i] - lc.outputs[i];
    auto la = actor_loss_and_grads(actor, states, masks, actions, adv, cfg.routing_only, cfg.entropy_coef);
    clip_global_norm(la.grads, cfg.clip_norm);
    clip_global_norm(lc.grads, cfg.clip_norm);
    return {std::move(la.grads), std::move(lc.grads), la.loss, lc.loss};
}

// Step counters of one virtual agent, for auditing the update cadence.
struct AgentAudit {
    std::uint64_t steps = 0;    // transitions collected
    std::uint64_t consumed = 0; // transitions fed to updates
    std::uint64_t updates = 0;
};

struct AgentContext {
    NodeId node;
    std::shared_ptr<const Mlp<float>> actor;
    std::shared_ptr<const Mlp<float>> critic;
    std::uint64_t version = 0;
    Optimizer<float> actor_opt;  // replace mode only
    Optimizer<float> critic_opt; // replace mode only
    ExperienceBatch batch;
    std::mt19937_64 rng;
    AgentAudit audit;
    std::future<void> inflight;
    std::optional<ModelSnapshot<float>> fresh; // set by an async update when done
    std::mutex fresh_mu;
};

// One virtual agent per device, all sharing the global store. Acts by sampling
// the downloaded actor; every max_step local steps (and at day end) computes
// n-step returns from spatial rewards and uploads.
class GapTrainer final : public Controller {
public:
    GapTrainer(const TrainerConfig& cfg, GlobalStore<float>& store, const RewardConfig& reward, const Topology& topo)
        : cfg_(cfg), store_(store), topo_(topo), rewards_(topo, reward) {
        cfg_.validate();
        agents_.reserve(topo.node_count());
        for (std::size_t i = 0; i < topo.node_count(); ++i) {
            auto a = std::make_unique<AgentContext>();
            a->node = NodeId(static_cast<std::int32_t>(i));
            a->actor_opt = Optimizer<float>(cfg_.optimizer);
            a->critic_opt = Optimizer<float>(cfg_.optimizer);
            agents_.push_back(std::move(a));
        }
        if (cfg_.scheduling == Scheduling::async) {
            std::size_t n = cfg_.workers > 0 ? static_cast<std::size_t>(cfg_.workers)
                                             : std::min<std::size_t>(topo.device_count(), std::max(1u, std::thread::hardware_concurrency()));
            pool_ = std::make_unique<ThreadPool>(n);
        }
    }
    ~GapTrainer() override { drain(false); }

    void on_day_start(const World& world) override {
        rewards_.reset();
        for (auto& a : agents_) {
            a->batch.clear();
            a->rng.seed(derive_seed(cfg_.seed, a->node.index(), static_cast<std::uint64_t>(world.day()), 0xa9e7));
            download(*a);
        }
    }

    AgentAction act(const World&, const DecisionRequest& req) override {
        AgentContext& a = *agents_.at(req.node.index());
        adopt_fresh(a);
        auto p = forward_policy(*a.actor, req.obs, req.mask);
        return sample_action(p, a.rng, cfg_.routing_only);
    }

    void on_event(const World&, const StepEvent& ev) override {
        rewards_.record(ev);
    }

    void on_transition(const World&, const Transition& tr) override {
        AgentContext& a = *agents_.at(tr.node.index());
        const double sr = rewards_.spatial(tr);
        a.batch.push_back(Experience{tr.obs, tr.mask, tr.action, sr, tr.next_obs, tr.next_mask, tr.terminal});
        ++a.audit.steps;
        if (tr.terminal || a.batch.size() >= static_cast<std::size_t>(cfg_.max_step)) update(a);
    }

    void on_day_end(const World&) override { drain(true); }

    const AgentAudit& audit(NodeId n) const { return agents_.at(n.index())->audit; }
    const RewardLedger& ledger() const { return rewards_.ledger(); }
    double last_actor_loss() const { return last_actor_loss_; }
    double last_critic_loss() const { return last_critic_loss_; }

private:
    void download(AgentContext& a) {
        auto s = store_.download();
        a.actor = std::move(s.actor);
        a.critic = std::move(s.critic);
        a.version = s.version;
    }

    void adopt_fresh(AgentContext& a) {
        if (!a.inflight.valid()) return;
        if (a.inflight.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return;
        a.inflight.get();
        std::lock_guard lock(a.fresh_mu);
        if (a.fresh) {
            a.actor = a.fresh->actor;
            a.critic = a.fresh->critic;
            a.version = a.fresh->version;
            a.fresh.reset();
        }
    }

    // Upload, then re-download the current global pair.
    void apply_update(AgentContext& a, const std::shared_ptr<const Mlp<float>>& actor,
                      const std::shared_ptr<const Mlp<float>>& critic, const ExperienceBatch& batch) {
        UpdateResult u = compute_update(*actor, *critic, batch, cfg_);
        last_actor_loss_ = u.actor_loss;
        last_critic_loss_ = u.critic_loss;
        if (cfg_.upload == UploadMode::push) {
            store_.push_gradients(u.actor_grads, u.critic_grads, cfg_.lr_actor, cfg_.lr_critic);
        } else {
            Mlp<float> la = *actor, lc = *critic;
            a.actor_opt.step(la, u.actor_grads, cfg_.lr_actor);
            a.critic_opt.step(lc, u.critic_grads, cfg_.lr_critic);
            store_.upload(la, lc);
        }
    }

    void update(AgentContext& a) {
        if (a.batch.empty()) return;
        ExperienceBatch batch;
        batch.swap(a.batch);
        a.audit.consumed += batch.size();
        ++a.audit.updates;
        if (!pool_) {
            apply_update(a, a.actor, a.critic, batch);
            download(a);
            return;
        }
        // One update in flight per agent; a second full batch waits for the first.
        if (a.inflight.valid()) {
            a.inflight.get();
            std::lock_guard lock(a.fresh_mu);
            a.fresh.reset();
        }
        a.inflight = pool_->submit([this, &a, actor = a.actor, critic = a.critic, batch = std::move(batch)] {
            apply_update(a, actor, critic, batch);
            auto s = store_.download();
            std::lock_guard lock(a.fresh_mu);
            a.fresh = std::move(s);
        });
    }

    // Waits for every in-flight update; rethrows the first worker failure.
    void drain(bool rethrow) {
        std::exception_ptr err;
        for (auto& a : agents_) {
            if (!a->inflight.valid()) continue;
            try {
                a->inflight.get();
            } catch (...) {
                if (!err) err = std::current_exception();
            }
            std::lock_guard lock(a->fresh_mu);
            a->fresh.reset();
        }
        if (err && rethrow) std::rethrow_exception(err);
    }

    TrainerConfig cfg_;
    GlobalStore<float>& store_;
    const Topology& topo_;
    SpatialRewardTracker rewards_;
    std::vector<std::unique_ptr<AgentContext>> agents_;
    std::unique_ptr<ThreadPool> pool_;
    std::atomic<double> last_actor_loss_{0.0};
    std::atomic<double> last_critic_loss_{0.0};
};

struct TrainingResult {
    Mlp<float> actor;
    Mlp<float> critic;
    std::vector<EpisodeMetrics> episodes;
    StoreStats stats;
    std::uint64_t final_version = 0;
};

// Called after each episode with its metrics and the current global models.
using EpisodeCallback = std::function<void(int episode, const EpisodeMetrics&, const ModelSnapshot<float>&)>;

inline std::pair<Mlp<float>, Mlp<float>> initial_models(const TrainerConfig& cfg) {
    return {Mlp<float>(actor_dims(), derive_seed(cfg.seed, 0xac70, 0, 0), cfg.activation),
            Mlp<float>(critic_dims, derive_seed(cfg.seed, 0xc417, 0, 0), cfg.activation)};
}

// Trains the universal actor/critic pair for cfg.max_episodes days on `world`;
// episode e simulates day e.
inline TrainingResult train(const TrainerConfig& cfg, World& world, const RewardConfig& reward,
                            const EpisodeCallback& on_episode = {}, std::optional<std::pair<Mlp<float>, Mlp<float>>> init = {}) {
    cfg.validate();
    reward.validate();
    auto [actor0, critic0] = init ? std::move(*init) : initial_models(cfg);
    GlobalStore<float> store(std::move(actor0), std::move(critic0), cfg.optimizer);
    GapTrainer trainer(cfg, store, reward, world.topology());
    TrainingResult out;
    for (int e = 1; e <= cfg.max_episodes; ++e) {
        EpisodeMetrics m = run_episode(world, trainer, e, reward);
        if (on_episode) on_episode(e, m, store.download());
        out.episodes.push_back(std::move(m));
    }
    auto snap = store.download();
    out.actor = *snap.actor;
    out.critic = *snap.critic;
    out.final_version = snap.version;
    out.stats = store.stats();
    return out;
}

// Routing-only inference: the relay comes from the actor, the threshold is
// always the lowest level.
inline AgentAction gapr_policy(const Mlp<float>& actor, const Observation& obs, NeighborMask mask) {
    AgentAction a = infer_policy(actor, obs, mask);
    a.energy_index = 0;
    return a;
}

// Deploys a trained actor on every device with greedy action selection.
class GreedyActorController final : public Controller {
public:
    GreedyActorController(const Mlp<float>& actor, bool routing_only) : actor_(actor), routing_only_(routing_only) {}
    AgentAction act(const World&, const DecisionRequest& req) override {
        return routing_only_ ? gapr_policy(actor_, req.obs, req.mask) : infer_policy(actor_, req.obs, req.mask);
    }

private:
    const Mlp<float>& actor_;
    bool routing_only_;
};

} // namespace ehrl
