#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>

#include "netpen/frame.hpp"

namespace netpen {

/// Backpressure policy for a full queue. Live inspection wants the newest
/// view of the net (DropOldest); offline file processing wants completeness
/// (Block).
enum class OverflowPolicy { DropOldest, Block };

/// Bounded MPSC frame queue between the source reader and detection workers.
class BoundedFrameQueue {
public:
    BoundedFrameQueue(size_t capacity, OverflowPolicy policy)
        : capacity_(capacity == 0 ? 1 : capacity), policy_(policy) {}

    /// Returns the evicted frame when DropOldest had to make room.
    /// The frame being processed by a worker is never a candidate; only
    /// queued frames are evicted.
    std::optional<FramePacket> push(FramePacket&& frame) {
        std::unique_lock lock(mutex_);
        if (policy_ == OverflowPolicy::Block) {
            space_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
            if (closed_) return std::nullopt;
            queue_.push_back(std::move(frame));
            filled_.notify_one();
            return std::nullopt;
        }
        std::optional<FramePacket> evicted;
        if (queue_.size() >= capacity_) {
            evicted = std::move(queue_.front());
            queue_.pop_front();
        }
        queue_.push_back(std::move(frame));
        filled_.notify_one();
        return evicted;
    }

    /// Blocks until a frame arrives; nullopt once closed and drained.
    std::optional<FramePacket> pop() {
        std::unique_lock lock(mutex_);
        filled_.wait(lock, [&] { return !queue_.empty() || closed_; });
        if (queue_.empty()) return std::nullopt;
        FramePacket f = std::move(queue_.front());
        queue_.pop_front();
        space_.notify_one();
        return f;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        filled_.notify_all();
        space_.notify_all();
    }

    size_t size() const {
        std::lock_guard lock(mutex_);
        return queue_.size();
    }

private:
    const size_t capacity_;
    const OverflowPolicy policy_;
    mutable std::mutex mutex_;
    std::condition_variable filled_;
    std::condition_variable space_;
    std::deque<FramePacket> queue_;
    bool closed_ = false;
};

}  // namespace netpen
