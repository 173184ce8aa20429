#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace pcm {

/// Worker count: PCM_THREADS if set, else the hardware concurrency.
int thread_count();

/// Calls fn(i) for i in [0, n). Each index is visited exactly once; callers
/// write results into per-index slots so the outcome is independent of the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double compensated_sum(std::span<const double> values);

}  // namespace pcm
