#pragma once

#include <cmath>
#include <string>

#include "ehrl/error.hpp"
#include "ehrl/topology.hpp"

namespace ehrl {

enum class RateMode { constant, log_distance };

// Link-rate model. Constant mode gives every link the same rate; log-distance
// mode uses bandwidth * log2(1 + P_tx * d^-alpha / noise).
struct RateModel {
    RateMode mode = RateMode::constant;
    double constant_rate_bps = 2560.0;
    double bandwidth_hz = 1000.0;
    double noise_floor_w = 1e-4;
    double path_loss_exponent = 2.0;
    double tx_power_w = 0.1;

    double rate_at_distance(double d) const {
        if (mode == RateMode::constant) return constant_rate_bps;
        double snr = tx_power_w * std::pow(d, -path_loss_exponent) / noise_floor_w;
        return bandwidth_hz * std::log2(1.0 + snr);
    }
};

inline double transmission_rate(const Topology& topo, const RateModel& model, NodeId from, NodeId to) {
    if (!topo.are_neighbors(from, to))
        throw ContractError("no link between node " + std::to_string(from.value) + " and node " + std::to_string(to.value));
    double r = model.rate_at_distance(topo.distance(from, to));
    if (!(r > 0.0) || !std::isfinite(r)) throw ContractError("rate model produced a non-positive rate");
    return r;
}

inline double transmission_time(double packet_bits, double rate_bps) {
    if (!(rate_bps > 0.0)) throw ContractError("transmission rate must be positive");
    if (!(packet_bits > 0.0)) throw ContractError("packet size must be positive");
    return packet_bits / rate_bps;
}

} // namespace ehrl
