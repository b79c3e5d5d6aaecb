#pragma once

// Stop-the-world barrier for measurements on real threads. Workers call
// checkpoint() between operations; the driver calls pause(), inspects the
// now-quiescent structure, then resume(). Workers that exit or park inside
// an operation call leave() so pause() does not wait for them.

#include <atomic>
#include <condition_variable>
#include <mutex>

namespace mvgc::verify {

class PauseGate {
 public:
  explicit PauseGate(int workers) : workers_(workers) {}

  void checkpoint() {
    if (!requested_.load(std::memory_order_acquire)) return;
    std::unique_lock lock(m_);
    ++waiting_;
    cv_.notify_all();
    cv_.wait(lock, [&] { return !requested_.load(std::memory_order_relaxed); });
    --waiting_;
  }

  void leave() {
    std::lock_guard lock(m_);
    ++gone_;
    cv_.notify_all();
  }

  void pause() {
    std::unique_lock lock(m_);
    requested_.store(true, std::memory_order_release);
    cv_.wait(lock, [&] { return waiting_ + gone_ >= workers_; });
  }

  void resume() {
    std::lock_guard lock(m_);
    requested_.store(false, std::memory_order_release);
    cv_.notify_all();
  }

 private:
  const int workers_;
  std::atomic<bool> requested_{false};
  std::mutex m_;
  std::condition_variable cv_;
  int waiting_ = 0;
  int gone_ = 0;
};

}  // namespace mvgc::verify
