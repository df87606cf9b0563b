#include "qcurv/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace qcurv {

namespace {
std::atomic<int> g_threads{1};
constexpr std::size_t kMinChunk = 64;
}  // namespace

void set_thread_count(int threads) { g_threads = std::max(1, threads); }
int thread_count() { return g_threads; }

std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t count) {
  const std::size_t threads = std::size_t(thread_count());
  std::size_t chunks = std::min(threads, std::max<std::size_t>(1, count / kMinChunk));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t c = 0; c < chunks; ++c) out.emplace_back(count * c / chunks, count * (c + 1) / chunks);
  return out;
}

void parallel_for(std::size_t tasks, const std::function<void(std::size_t)>& body) {
  if (tasks == 0) return;
  if (tasks == 1 || thread_count() == 1) {
    for (std::size_t i = 0; i < tasks; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(tasks);
  const std::size_t width = std::size_t(thread_count());
  for (std::size_t start = 0; start < tasks; start += width) {
    std::vector<std::thread> pool;
    for (std::size_t i = start; i < std::min(tasks, start + width); ++i) {
      pool.emplace_back([&, i] {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void parallel_chunks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
  const auto ranges = chunk_ranges(count);
  parallel_for(ranges.size(), [&](std::size_t c) { body(ranges[c].first, ranges[c].second); });
}

}  // namespace qcurv
