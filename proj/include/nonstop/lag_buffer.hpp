#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace nonstop {

/// Fixed-capacity ring of the most recent observations; lag(1) is the newest.
template <class T>
class LagBuffer {
public:
    explicit LagBuffer(std::size_t capacity = 0) : slots_(capacity) {}

    std::size_t capacity() const noexcept { return slots_.size(); }
    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }

    void push(T value) {
        if (slots_.empty()) return;
        slots_[head_] = std::move(value);
        head_ = (head_ + 1) % slots_.size();
        if (size_ < slots_.size()) ++size_;
    }

    /// i-th most recent entry, 1 <= i <= size().
    const T& lag(std::size_t i) const noexcept {
        return slots_[(head_ + slots_.size() - i) % slots_.size()];
    }

    bool has_lag(std::size_t i) const noexcept { return i >= 1 && i <= size_; }

    void clear() noexcept {
        head_ = 0;
        size_ = 0;
    }

private:
    std::vector<T> slots_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

}  // namespace nonstop
