#pragma once

#include <array>
#include <bit>
#include <cstdint>

namespace ehrl {

// Observation layout: 16 energy slots (self, then neighbors by ascending id),
// 16 queue-fill slots in the same order, a 16-wide one-hot of the head packet's
// source id, and the time-of-day fraction.
inline constexpr std::size_t slot_count = 16;
inline constexpr std::size_t obs_dim = 3 * slot_count + 1;
inline constexpr std::size_t energy_choices = 4;
inline constexpr std::size_t relay_choices = slot_count;
inline constexpr std::array<double, energy_choices> energy_levels{0.0, 0.3, 0.6, 0.9};

static_assert(obs_dim == 49);

struct Observation {
    std::array<float, obs_dim> values{};

    float& energy(std::size_t slot) { return values[slot]; }
    float& queue(std::size_t slot) { return values[slot_count + slot]; }
    float& source(std::size_t id) { return values[2 * slot_count + id]; }
    float& time_frac() { return values[3 * slot_count]; }
    float energy(std::size_t slot) const { return values[slot]; }
    float queue(std::size_t slot) const { return values[slot_count + slot]; }
    float source(std::size_t id) const { return values[2 * slot_count + id]; }
    float time_frac() const { return values[3 * slot_count]; }

    bool operator==(const Observation&) const = default;
};

// Valid relay slots; relay slot r is the r-th neighbor in ascending id order.
struct NeighborMask {
    std::uint16_t bits = 0;

    bool valid(std::size_t slot) const { return slot < relay_choices && ((bits >> slot) & 1u); }
    int count() const { return std::popcount(bits); }
    bool empty() const { return bits == 0; }
    static NeighborMask first(std::size_t n) {
        return NeighborMask{static_cast<std::uint16_t>(n >= 16 ? 0xFFFFu : ((1u << n) - 1u))};
    }
    bool operator==(const NeighborMask&) const = default;
};

struct AgentAction {
    int energy_index = 0; // into energy_levels
    int relay_slot = 0;

    double threshold() const { return energy_levels.at(static_cast<std::size_t>(energy_index)); }
    bool operator==(const AgentAction&) const = default;
};

} // namespace ehrl
