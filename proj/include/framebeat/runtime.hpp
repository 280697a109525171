#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

namespace framebeat {

/// Where the orchestrator's work happens. All callbacks posted to a runtime
/// run on one logical owner (the session queue), in due-time order, FIFO
/// among equal times.
class Runtime {
 public:
  virtual ~Runtime() = default;

  /// Seconds since the runtime started (virtual or wall).
  virtual double now() const = 0;
  /// True when time is simulated and pipeline compute is not on the clock.
  virtual bool simulated() const { return false; }
  virtual void post_at(double at, std::function<void()> fn) = 0;
  void post(std::function<void()> fn) { post_at(now(), std::move(fn)); }
  void post_after(double delay, std::function<void()> fn) { post_at(now() + delay, std::move(fn)); }

  /// Runs `work` off the owner and delivers `done` on the owner once the
  /// latency `work` reports has elapsed since submission.
  virtual void run_async(std::function<double()> work, std::function<void()> done) = 0;

  /// Runs `fn` on the owner and waits for it.
  virtual void invoke(const std::function<void()>& fn) = 0;
};

/// Deterministic discrete-event runtime. Backend calls run inline and their
/// reported latency is simulated on the virtual clock.
class VirtualRuntime final : public Runtime {
 public:
  double now() const override { return now_; }
  bool simulated() const override { return true; }
  void post_at(double at, std::function<void()> fn) override;
  void run_async(std::function<double()> work, std::function<void()> done) override;
  void invoke(const std::function<void()>& fn) override { fn(); }

  /// Runs every task due at or before `t`, then sets the clock to `t`.
  void run_until(double t);
  /// Runs until the queue is empty; returns false if `limit` tasks ran first.
  bool run_until_idle(std::size_t limit = 10'000'000);
  bool step();
  std::size_t pending() const { return queue_.size(); }

 private:
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::multimap<std::pair<double, std::uint64_t>, std::function<void()>> queue_;
};

/// Wall-clock runtime: one dispatcher thread owns the session, a small pool
/// runs backend calls.
class ThreadRuntime final : public Runtime {
 public:
  explicit ThreadRuntime(std::size_t workers = 4);
  ~ThreadRuntime() override;
  ThreadRuntime(const ThreadRuntime&) = delete;
  ThreadRuntime& operator=(const ThreadRuntime&) = delete;

  double now() const override;
  void post_at(double at, std::function<void()> fn) override;
  void run_async(std::function<double()> work, std::function<void()> done) override;
  void invoke(const std::function<void()>& fn) override;
  void stop();

 private:
  void dispatch_loop();
  void worker_loop();

  const std::chrono::steady_clock::time_point epoch_ = std::chrono::steady_clock::now();
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable work_cv_;
  bool stopping_ = false;
  std::uint64_t seq_ = 0;
  std::multimap<std::pair<double, std::uint64_t>, std::function<void()>> queue_;
  std::vector<std::function<void()>> jobs_;
  std::thread dispatcher_;
  std::thread::id dispatcher_id_;
  std::vector<std::thread> workers_;
};

}  // namespace framebeat
