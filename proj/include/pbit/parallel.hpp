#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pbit {

// Persistent pool running index-parallel loops. Callers write results into
// per-index slots, so outcomes never depend on the worker count.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = 1) : workers_(std::max<std::size_t>(1, workers)) {
    for (std::size_t t = 1; t < workers_; ++t) threads_.emplace_back([this] { worker_loop(); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const noexcept { return workers_; }

  static std::size_t hardware_workers() {
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
  }

  // Runs fn(i) for i in [0, count). Blocks until all indices finish; the
  // first exception thrown by any index is rethrown here.
  void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (workers_ == 1 || count == 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    std::unique_lock call_lock(call_mu_);
    {
      std::lock_guard lk(mu_);
      job_ = &fn;
      count_ = count;
      next_.store(0);
      active_ = threads_.size();
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    run_indices();
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [this] { return active_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void run_indices() {
    for (;;) {
      const std::size_t i = next_.fetch_add(1);
      if (i >= count_) break;
      try {
        (*job_)(i);
      } catch (...) {
        std::lock_guard lk(mu_);
        if (!error_) error_ = std::current_exception();
      }
    }
  }

  void worker_loop() {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      run_indices();
      {
        std::lock_guard lk(mu_);
        --active_;
      }
      done_cv_.notify_one();
    }
  }

  std::size_t workers_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::mutex call_mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t count_ = 0;
  std::atomic<std::size_t> next_{0};
  std::size_t active_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace pbit
