#pragma once

#include <mutex>
#include <optional>

namespace cascade::sim {

/// Latest-value mailbox: writers overwrite, readers take the newest value
/// without blocking the writer. Exactly-once delivery is not provided and
/// not needed; freshness is monotone via the sequence counter.
template <typename T>
class Mailbox {
 public:
  void publish(T value) {
    std::lock_guard<std::mutex> lock(mutex_);
    value_ = std::move(value);
    ++seq_;
  }

  /// Newest value and its sequence number, if any was ever published.
  std::optional<std::pair<T, unsigned long>> read() const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (seq_ == 0) return std::nullopt;
    return std::make_pair(value_, seq_);
  }

  unsigned long sequence() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return seq_;
  }

 private:
  mutable std::mutex mutex_;
  T value_{};
  unsigned long seq_ = 0;
};

}  // namespace cascade::sim
