#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace connear {

// Fixed-size worker pool. parallel_for hands out indices dynamically but
// callers write results by index, so output never depends on scheduling.
class WorkerPool {
 public:
  // 0 picks std::thread::hardware_concurrency().
  explicit WorkerPool(std::size_t threads = 0);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const { return workers_.empty() ? 1 : workers_.size(); }

  // Runs fn(i) for i in [0, n) and waits. The first exception thrown by any
  // task is rethrown here after all tasks finish.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  void run();

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t next_ = 0;
  std::size_t total_ = 0;
  std::size_t finished_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace connear
