#pragma once

#include <cstdint>
#include <deque>

#include "ehrl/error.hpp"
#include "ehrl/topology.hpp"

namespace ehrl {

struct Packet {
    std::uint64_t id = 0;
    NodeId source;
    std::int64_t size_bits = 0;
    int hops = 0;              // hops taken so far
    double elapsed_s = 0.0;    // time since sensed, as of arrival at the current holder
    double sensed_at = 0.0;
};

// FIFO buffer bounded by total queued bits.
class TransmitQueue {
public:
    TransmitQueue() = default;
    explicit TransmitQueue(std::int64_t capacity_bits) : capacity_(capacity_bits) {}

    bool fits(std::int64_t bits) const { return bits_ + bits <= capacity_; }
    void push(const Packet& p) {
        if (!fits(p.size_bits)) throw ContractError("packet does not fit in queue");
        bits_ += p.size_bits;
        items_.push_back(p);
    }
    const Packet& front() const { return items_.front(); }
    Packet pop() {
        Packet p = items_.front();
        items_.pop_front();
        bits_ -= p.size_bits;
        return p;
    }
    void clear() {
        items_.clear();
        bits_ = 0;
    }

    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }
    std::int64_t bits() const { return bits_; }
    std::int64_t capacity() const { return capacity_; }
    double fill() const { return capacity_ > 0 ? static_cast<double>(bits_) / static_cast<double>(capacity_) : 0.0; }
    const std::deque<Packet>& items() const { return items_; }

private:
    std::deque<Packet> items_;
    std::int64_t bits_ = 0;
    std::int64_t capacity_ = 0;
};

} // namespace ehrl
