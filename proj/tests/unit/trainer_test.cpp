#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "ehrl/gap_trainer.hpp"

using namespace ehrl;

namespace {

Mlp<float> constant_model(const std::vector<int>& dims, float v) {
    Mlp<float> m(dims, 1);
    for (auto& l : m.layers()) {
        l.w.setConstant(v);
        l.b.setConstant(v);
    }
    return m;
}

// Devices in a line 10 m apart, sink last.
Topology line(int devices) {
    std::vector<NodePlacement> ps;
    for (int i = 0; i <= devices; ++i) ps.push_back({NodeId(i), {10.0 * i, 0.0}});
    return build_topology(ps, NodeId(devices), 15.0);
}

HarvestSource steady(double w) { return HarvestSource::recorded(HarvestTrace({0.0}, {w})); }

TrainerConfig small_config(int episodes) {
    TrainerConfig c;
    c.max_episodes = episodes;
    c.seed = 7;
    return c;
}

void expect_same_model(const Mlp<float>& a, const Mlp<float>& b) {
    ASSERT_TRUE(a.same_shape(b));
    for (std::size_t l = 0; l < a.layers().size(); ++l) {
        EXPECT_EQ(std::memcmp(a.layers()[l].w.data(), b.layers()[l].w.data(), sizeof(float) * a.layers()[l].w.size()), 0);
        EXPECT_EQ(std::memcmp(a.layers()[l].b.data(), b.layers()[l].b.data(), sizeof(float) * a.layers()[l].b.size()), 0);
    }
}

} // namespace

TEST(GlobalStore, IdentityUploadBumpsVersionOnly) {
    GlobalStore<float> store(constant_model({3, 4, 2}, 0.5f), constant_model({3, 4, 1}, 0.25f));
    const auto before = store.download();
    EXPECT_EQ(store.upload(*before.actor, *before.critic), 1u);
    const auto after = store.download();
    EXPECT_EQ(after.version, 1u);
    EXPECT_TRUE(*after.actor == *before.actor);
    EXPECT_TRUE(*after.critic == *before.critic);
    EXPECT_EQ(store.push_gradients(after.actor->zero_gradients(), after.critic->zero_gradients(), 0.1, 0.1), 2u);
    EXPECT_TRUE(*store.download().actor == *before.actor);
}

TEST(GlobalStore, RejectsShapeMismatch) {
    GlobalStore<float> store(constant_model({3, 4, 2}, 0.5f), constant_model({3, 4, 1}, 0.25f));
    EXPECT_THROW(store.upload(constant_model({3, 5, 2}, 0.0f), constant_model({3, 4, 1}, 0.0f)), ContractError);
    EXPECT_EQ(store.version(), 0u);
}

TEST(GlobalStore, ConcurrentWritersNeverTearThePair) {
    // Every writer publishes an actor and critic filled with the same value, so
    // a torn download would show two different values.
    GlobalStore<float> store(constant_model({4, 8, 3}, 0.0f), constant_model({4, 8, 1}, 0.0f));
    std::atomic<bool> stop{false};
    std::atomic<int> torn{0}, reads{0};
    std::vector<std::thread> threads;
    for (int w = 0; w < 4; ++w)
        threads.emplace_back([&, w] {
            for (int i = 1; i <= 300; ++i) {
                const float v = static_cast<float>(w * 1000 + i);
                store.upload(constant_model({4, 8, 3}, v), constant_model({4, 8, 1}, v));
            }
        });
    for (int r = 0; r < 2; ++r)
        threads.emplace_back([&] {
            while (!stop) {
                const auto s = store.download();
                if (s.actor->layers()[0].w(0, 0) != s.critic->layers()[0].w(0, 0)) ++torn;
                ++reads;
            }
        });
    for (int w = 0; w < 4; ++w) threads[static_cast<std::size_t>(w)].join();
    stop = true;
    for (std::size_t t = 4; t < threads.size(); ++t) threads[t].join();
    EXPECT_EQ(torn.load(), 0);
    EXPECT_GT(reads.load(), 0);
    EXPECT_EQ(store.version(), 1200u);
    EXPECT_EQ(store.stats().uploads, 1200u);
}

TEST(GlobalStore, ConcurrentPushesAreAllApplied) {
    GlobalStore<float> store(constant_model({2, 1}, 0.0f), constant_model({2, 1}, 0.0f));
    auto g = store.download().actor->zero_gradients();
    g.layers[0].b(0) = -1.0f;
    std::vector<std::thread> threads;
    for (int w = 0; w < 4; ++w)
        threads.emplace_back([&] {
            for (int i = 0; i < 250; ++i) store.push_gradients(g, g, 1.0, 1.0);
        });
    for (auto& t : threads) t.join();
    EXPECT_EQ(store.download().actor->layers()[0].b(0), 1000.0f);
    EXPECT_EQ(store.stats().pushes, 1000u);
}

TEST(Trainer, ConfigValidation) {
    TrainerConfig c;
    c.max_step = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainerConfig{};
    c.gamma = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainerConfig{};
    c.lr_actor = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(parse_scheduling("sometimes"), ConfigError);
    EXPECT_THROW(parse_upload_mode("merge"), ConfigError);
}

TEST(Trainer, ComputeUpdateOnTerminalBatchIgnoresBootstrap) {
    const auto [actor, critic] = initial_models(small_config(1));
    ExperienceBatch batch(3);
    for (auto& e : batch) {
        e.mask = NeighborMask{1};
        e.next_mask = NeighborMask{1};
        e.reward = 1.0;
    }
    batch.back().terminal = true;
    const auto u = compute_update(actor, critic, batch, small_config(1));
    EXPECT_TRUE(std::isfinite(u.actor_loss));
    EXPECT_TRUE(std::isfinite(u.critic_loss));
    EXPECT_LE(u.actor_grads.norm(), 5.0 + 1e-4);
    EXPECT_LE(u.critic_grads.norm(), 5.0 + 1e-4);
    // Same returns with any next_obs once the last step is terminal.
    batch.back().next_obs.values.fill(1.0f);
    EXPECT_EQ(compute_update(actor, critic, batch, small_config(1)).critic_loss, u.critic_loss);
}

TEST(Trainer, SingleSinkNeighborSmokeRun) {
    const auto topo = line(1);
    World w(topo, WorldConfig{}, steady(0.05));
    const auto cfg = small_config(2);
    const auto [a0, c0] = initial_models(cfg);
    GlobalStore<float> store(a0, c0, cfg.optimizer);
    GapTrainer trainer(cfg, store, RewardConfig{}, topo);
    for (int day = 1; day <= 2; ++day) {
        const auto m = run_episode(w, trainer, day, RewardConfig{});
        EXPECT_GT(m.sink_received_bits, 0);
        EXPECT_GT(m.delivery_rate, 0.9);
        EXPECT_EQ(m.violations.total(), 0);
    }
    const auto& audit = trainer.audit(NodeId(0));
    EXPECT_GT(audit.steps, 0u);
    EXPECT_EQ(audit.consumed, audit.steps);
    EXPECT_GE(audit.updates, audit.steps / static_cast<std::uint64_t>(cfg.max_step));
    EXPECT_EQ(store.version(), audit.updates);
    EXPECT_FALSE(*store.download().actor == a0);
    EXPECT_TRUE(std::isfinite(trainer.last_actor_loss()));
    EXPECT_TRUE(std::isfinite(trainer.last_critic_loss()));
}

TEST(Trainer, LockstepRunsAreBitIdentical) {
    const auto topo = line(3);
    auto run = [&] {
        World w(topo, WorldConfig{}, steady(0.03));
        return train(small_config(2), w, RewardConfig{});
    };
    const auto a = run();
    const auto b = run();
    ASSERT_EQ(a.episodes.size(), 2u);
    for (std::size_t e = 0; e < 2; ++e) {
        EXPECT_EQ(a.episodes[e].total_reward, b.episodes[e].total_reward);
        EXPECT_EQ(a.episodes[e].sink_received_bits, b.episodes[e].sink_received_bits);
        EXPECT_EQ(a.episodes[e].decisions, b.episodes[e].decisions);
    }
    EXPECT_EQ(a.final_version, b.final_version);
    expect_same_model(a.actor, b.actor);
    expect_same_model(a.critic, b.critic);
}

TEST(Trainer, AsyncRunConsumesEveryStep) {
    const auto topo = line(3);
    World w(topo, WorldConfig{}, steady(0.03));
    auto cfg = small_config(1);
    cfg.scheduling = Scheduling::async;
    cfg.workers = 2;
    const auto [a0, c0] = initial_models(cfg);
    GlobalStore<float> store(a0, c0, cfg.optimizer);
    std::uint64_t updates = 0;
    {
        GapTrainer trainer(cfg, store, RewardConfig{}, topo);
        const auto m = run_episode(w, trainer, 1, RewardConfig{});
        EXPECT_EQ(m.violations.total(), 0);
        for (int i = 0; i < 3; ++i) {
            const auto& audit = trainer.audit(NodeId(i));
            EXPECT_EQ(audit.consumed, audit.steps) << "node " << i;
            updates += audit.updates;
        }
    }
    EXPECT_EQ(store.version(), updates);
}

TEST(Trainer, AblationsRun) {
    const auto topo = line(2);
    RewardConfig no_sr;
    no_sr.spatial = false;
    auto cfg = small_config(1);
    {
        World w(topo, WorldConfig{}, steady(0.03));
        const auto r = train(cfg, w, no_sr);
        EXPECT_GT(r.final_version, 0u);
        EXPECT_EQ(r.episodes[0].violations.total(), 0);
    }
    cfg.upload = UploadMode::replace;
    cfg.optimizer.kind = OptimizerKind::adam;
    {
        World w(topo, WorldConfig{}, steady(0.03));
        const auto r = train(cfg, w, RewardConfig{});
        EXPECT_EQ(r.stats.uploads, r.final_version);
        EXPECT_EQ(r.stats.pushes, 0u);
    }
}

TEST(Trainer, RoutingOnlyNeverRaisesThreshold) {
    const auto topo = line(3);
    auto cfg = small_config(1);
    cfg.routing_only = true;
    const auto [a0, c0] = initial_models(cfg);
    GlobalStore<float> store(a0, c0, cfg.optimizer);
    struct Spy final : Controller {
        GapTrainer& inner;
        int raised = 0, acts = 0;
        explicit Spy(GapTrainer& t) : inner(t) {}
        AgentAction act(const World& w, const DecisionRequest& r) override {
            const auto a = inner.act(w, r);
            raised += a.energy_index != 0;
            ++acts;
            return a;
        }
        void on_day_start(const World& w) override { inner.on_day_start(w); }
        void on_event(const World& w, const StepEvent& e) override { inner.on_event(w, e); }
        void on_transition(const World& w, const Transition& t) override { inner.on_transition(w, t); }
        void on_day_end(const World& w) override { inner.on_day_end(w); }
    };
    GapTrainer trainer(cfg, store, RewardConfig{}, topo);
    Spy spy(trainer);
    World w(topo, WorldConfig{}, steady(0.03));
    run_episode(w, spy, 1, RewardConfig{});
    EXPECT_GT(spy.acts, 0);
    EXPECT_EQ(spy.raised, 0);
}
