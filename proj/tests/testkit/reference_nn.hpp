#pragma once

// Exhaustive O(MN) nearest-neighbour search under the l1 metric, ties to the
// lowest target index.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace pcm::testkit {

struct NearestResult {
  int index = -1;
  double distance = std::numeric_limits<double>::infinity();
};

template <typename Point>
std::vector<NearestResult> reference_nn(const std::vector<Point>& queries, const std::vector<Point>& targets) {
  std::vector<NearestResult> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      double d = 0.0;
      for (int a = 0; a < 3; ++a) d += std::abs(queries[q][a] - targets[t][a]);
      if (d < out[q].distance) out[q] = {static_cast<int>(t), d};
    }
  }
  return out;
}

}  // namespace pcm::testkit
