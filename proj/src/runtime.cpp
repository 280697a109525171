#include "framebeat/runtime.hpp"

#include <algorithm>
#include <exception>
#include <future>
#include <memory>

namespace framebeat {

void VirtualRuntime::post_at(double at, std::function<void()> fn) {
  queue_.emplace(std::make_pair(std::max(at, now_), seq_++), std::move(fn));
}

void VirtualRuntime::run_async(std::function<double()> work, std::function<void()> done) {
  const double latency = work();
  post_after(std::max(0.0, latency), std::move(done));
}

bool VirtualRuntime::step() {
  if (queue_.empty()) return false;
  auto node = queue_.extract(queue_.begin());
  now_ = std::max(now_, node.key().first);
  node.mapped()();
  return true;
}

void VirtualRuntime::run_until(double t) {
  while (!queue_.empty() && queue_.begin()->first.first <= t) step();
  now_ = std::max(now_, t);
}

bool VirtualRuntime::run_until_idle(std::size_t limit) {
  for (std::size_t i = 0; i < limit; ++i) {
    if (!step()) return true;
  }
  return queue_.empty();
}

ThreadRuntime::ThreadRuntime(std::size_t workers) {
  dispatcher_ = std::thread([this] { dispatch_loop(); });
  dispatcher_id_ = dispatcher_.get_id();
  for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

ThreadRuntime::~ThreadRuntime() { stop(); }

void ThreadRuntime::stop() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  work_cv_.notify_all();
  if (dispatcher_.joinable()) dispatcher_.join();
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
}

double ThreadRuntime::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void ThreadRuntime::post_at(double at, std::function<void()> fn) {
  {
    std::lock_guard lock(mutex_);
    if (stopping_) return;
    queue_.emplace(std::make_pair(at, seq_++), std::move(fn));
  }
  cv_.notify_all();
}

void ThreadRuntime::run_async(std::function<double()> work, std::function<void()> done) {
  const double submitted = now();
  auto job = [this, submitted, work = std::move(work), done = std::move(done)]() mutable {
    const double latency = work();
    post_at(std::max(now(), submitted + latency), std::move(done));
  };
  {
    std::lock_guard lock(mutex_);
    if (stopping_) return;
    jobs_.push_back(std::move(job));
  }
  work_cv_.notify_one();
}

void ThreadRuntime::invoke(const std::function<void()>& fn) {
  if (std::this_thread::get_id() == dispatcher_id_) {
    fn();
    return;
  }
  // The promise lives in the task; a task dropped at shutdown breaks it and
  // wakes the caller.
  auto finished = std::make_shared<std::promise<void>>();
  auto future = finished->get_future();
  post([finished, &fn] {
    try {
      fn();
      finished->set_value();
    } catch (...) {
      finished->set_exception(std::current_exception());
    }
  });
  future.get();
}

void ThreadRuntime::dispatch_loop() {
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    if (queue_.empty()) {
      cv_.wait(lock);
      continue;
    }
    const double due = queue_.begin()->first.first;
    const double t = now();
    if (due > t) {
      cv_.wait_for(lock, std::chrono::duration<double>(due - t));
      continue;
    }
    auto node = queue_.extract(queue_.begin());
    lock.unlock();
    node.mapped()();
    lock.lock();
  }
}

void ThreadRuntime::worker_loop() {
  std::unique_lock lock(mutex_);
  while (true) {
    work_cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
    if (stopping_) return;
    auto job = std::move(jobs_.front());
    jobs_.erase(jobs_.begin());
    lock.unlock();
    job();
    lock.lock();
  }
}

}  // namespace framebeat
