#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace qcurv {

// Process-wide worker count; 1 means everything runs on the calling thread.
void set_thread_count(int threads);
int thread_count();

// Runs body(begin, end) over fixed contiguous chunks of [0, count). Chunk
// boundaries depend only on count and the thread setting, never on timing.
void parallel_chunks(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

// Fixed chunk boundaries used by parallel_chunks; callers needing
// per-chunk partial results combine them in this order.
std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t count);
void parallel_for(std::size_t tasks, const std::function<void(std::size_t)>& body);

// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace qcurv
