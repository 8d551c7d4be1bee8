#pragma once

#include <cstdint>
#include <memory>
#include <mutex>

#include "ehrl/error.hpp"
#include "ehrl/mlp.hpp"
#include "ehrl/optim.hpp"

namespace ehrl {

template <typename Scalar>
struct ModelSnapshot {
    std::shared_ptr<const Mlp<Scalar>> actor;
    std::shared_ptr<const Mlp<Scalar>> critic;
    std::uint64_t version = 0;
};

struct StoreStats {
    std::uint64_t uploads = 0;
    std::uint64_t pushes = 0;
    double last_actor_grad_norm = 0.0;
    double last_critic_grad_norm = 0.0;
};

// Shared actor/critic pair. Published models are immutable; every write builds
// a new pair and swaps it in under the lock, so a download is always a whole
// pair that was current at some version.
template <typename Scalar>
class GlobalStore {
public:
    GlobalStore(Mlp<Scalar> actor, Mlp<Scalar> critic, OptimizerConfig opt = {})
        : actor_(std::make_shared<const Mlp<Scalar>>(std::move(actor))),
          critic_(std::make_shared<const Mlp<Scalar>>(std::move(critic))), actor_opt_(opt), critic_opt_(opt) {}

    ModelSnapshot<Scalar> download() const {
        std::lock_guard lock(mu_);
        return {actor_, critic_, version_};
    }

    std::uint64_t version() const {
        std::lock_guard lock(mu_);
        return version_;
    }

    StoreStats stats() const {
        std::lock_guard lock(mu_);
        return stats_;
    }

    // Replaces both models with the uploaded values.
    std::uint64_t upload(const Mlp<Scalar>& actor, const Mlp<Scalar>& critic) {
        auto a = std::make_shared<const Mlp<Scalar>>(actor);
        auto c = std::make_shared<const Mlp<Scalar>>(critic);
        std::lock_guard lock(mu_);
        if (!a->same_shape(*actor_) || !c->same_shape(*critic_)) throw ContractError("uploaded model shape does not match the store");
        actor_ = std::move(a);
        critic_ = std::move(c);
        ++stats_.uploads;
        return ++version_;
    }

    // Applies worker gradients to the current global weights.
    std::uint64_t push_gradients(const MlpGradients<Scalar>& ga, const MlpGradients<Scalar>& gc, double lr_actor,
                                 double lr_critic) {
        std::lock_guard lock(mu_);
        if (!actor_->same_shape(ga) || !critic_->same_shape(gc)) throw ContractError("gradient shape does not match the store");
        actor_ = std::make_shared<const Mlp<Scalar>>(actor_opt_.stepped(*actor_, ga, lr_actor));
        critic_ = std::make_shared<const Mlp<Scalar>>(critic_opt_.stepped(*critic_, gc, lr_critic));
        ++stats_.pushes;
        stats_.last_actor_grad_norm = ga.norm();
        stats_.last_critic_grad_norm = gc.norm();
        return ++version_;
    }

private:
    mutable std::mutex mu_;
    std::shared_ptr<const Mlp<Scalar>> actor_;
    std::shared_ptr<const Mlp<Scalar>> critic_;
    Optimizer<Scalar> actor_opt_;
    Optimizer<Scalar> critic_opt_;
    std::uint64_t version_ = 0;
    StoreStats stats_;
};

} // namespace ehrl
