#pragma once

#include <algorithm>
#include <array>
#include <cstddef>

#include "ehrl/error.hpp"

namespace ehrl {

enum class Activity : std::size_t { trans = 0, recv = 1, sleep = 2, sense = 3 };
inline constexpr std::size_t activity_count = 4;

struct PowerProfile {
    double trans_w = 0.1;
    double recv_w = 0.05;
    double sleep_w = 0.0005;
    double sense_w = 0.01;

    double power(Activity a) const {
        switch (a) {
        case Activity::trans: return trans_w;
        case Activity::recv: return recv_w;
        case Activity::sleep: return sleep_w;
        case Activity::sense: return sense_w;
        }
        return 0.0;
    }
};

// Power drawn per activity over an interval; several activities may be active
// at once (the sensor runs alongside the radio).
struct ActivityLoad {
    std::array<double, activity_count> watts{};

    static ActivityLoad single(const PowerProfile& p, Activity a) {
        ActivityLoad l;
        l.watts[static_cast<std::size_t>(a)] = p.power(a);
        return l;
    }
    ActivityLoad& add(const PowerProfile& p, Activity a) {
        watts[static_cast<std::size_t>(a)] += p.power(a);
        return *this;
    }
    double total() const { return watts[0] + watts[1] + watts[2] + watts[3]; }
};

struct EnergyState {
    double e_res = 1.0;
    double e_max = 1.0;
    double e_init = 1.0;
    std::array<double, activity_count> consumed{};
    double harvested = 0.0;
    double clipped = 0.0;

    static EnergyState full(double capacity) {
        EnergyState s;
        s.e_res = s.e_max = s.e_init = capacity;
        return s;
    }
    double consumed_total() const { return consumed[0] + consumed[1] + consumed[2] + consumed[3]; }
    double consumed_by(Activity a) const { return consumed[static_cast<std::size_t>(a)]; }
    // e_init + harvested - clipped - consumed; equals e_res up to round-off.
    double balance() const { return e_init + harvested - clipped - consumed_total(); }
};

enum class EnergyOutcome { ok, depleted, clipped };

struct EnergyStep {
    EnergyOutcome outcome = EnergyOutcome::ok;
    // Time within [0, dt] at which the store hit zero; dt when it did not.
    double powered_time = 0.0;
};

// Integrates harvest minus load over dt. The store is clamped to [0, e_max]:
// surplus above capacity is counted as clipped; on depletion the interval is cut
// at the exact crossing and nothing after it is charged or harvested.
inline EnergyStep advance_energy(EnergyState& s, const ActivityLoad& load, double harvest_w, double dt) {
    if (!(dt > 0.0)) throw ContractError("energy step requires dt > 0");
    const double draw = load.total();
    const double net = harvest_w - draw;
    EnergyStep step{EnergyOutcome::ok, dt};

    double span = dt;
    if (net < 0.0 && s.e_res + net * dt <= 0.0) {
        span = s.e_res / -net;
        step = {EnergyOutcome::depleted, span};
    }
    for (std::size_t a = 0; a < activity_count; ++a) s.consumed[a] += load.watts[a] * span;
    s.harvested += harvest_w * span;

    if (step.outcome == EnergyOutcome::depleted) {
        s.e_res = 0.0;
        return step;
    }
    double next = s.e_res + net * span;
    if (next > s.e_max) {
        s.clipped += next - s.e_max;
        next = s.e_max;
        step.outcome = EnergyOutcome::clipped;
    }
    s.e_res = std::max(0.0, next);
    return step;
}

inline EnergyStep advance_energy(EnergyState& s, Activity a, const PowerProfile& p, double harvest_w, double dt) {
    return advance_energy(s, ActivityLoad::single(p, a), harvest_w, dt);
}

} // namespace ehrl
