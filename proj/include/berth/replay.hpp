#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "berth/vessel.hpp"

namespace berth {

struct Transition {
    VesselState s;
    ControlAction a;
    double r = 0.0;
    VesselState s_next;
    bool terminal = false;
};

// Replay item carrying the expert label a^E alongside the executed action.
struct AugmentedTransition {
    VesselState s;
    ControlAction a;
    ControlAction a_expert;
    double r = 0.0;
    VesselState s_next;
    bool terminal = false;
};

// Fixed-capacity FIFO buffer with uniform random sampling.
template <typename T>
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("RingBuffer: zero capacity");
        items_.reserve(capacity_);
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    const T& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

    void push(const T& item) {
        if (items_.size() < capacity_) {
            items_.push_back(item);
        } else {
            items_[head_] = item;
            head_ = (head_ + 1) % capacity_;
        }
    }

    // n items drawn uniformly; distinct indices when size >= n, otherwise
    // with replacement.
    std::vector<T> sample(std::size_t n, std::mt19937_64& rng) const {
        if (items_.empty()) throw std::runtime_error("RingBuffer::sample: empty buffer");
        std::vector<T> out;
        out.reserve(n);
        if (items_.size() >= n) {
            // Partial Fisher-Yates over index space.
            std::vector<std::size_t> idx(items_.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            for (std::size_t i = 0; i < n; ++i) {
                std::uniform_int_distribution<std::size_t> d(i, idx.size() - 1);
                std::swap(idx[i], idx[d(rng)]);
                out.push_back(items_[idx[i]]);
            }
        } else {
            std::uniform_int_distribution<std::size_t> d(0, items_.size() - 1);
            for (std::size_t i = 0; i < n; ++i) out.push_back(items_[d(rng)]);
        }
        return out;
    }

private:
    std::size_t capacity_;
    std::vector<T> items_;
    std::size_t head_ = 0;  // oldest element once full
};

}  // namespace berth
