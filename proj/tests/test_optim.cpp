#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pcm/error.hpp"
#include "pcm/optim.hpp"
#include "testkit/reference_adam.hpp"

namespace pcm {
namespace {

TEST(Adam, ZeroGradientKeepsParameters) {
  auto s = OptimizerState::for_size(2);
  s.m = {0.5, -0.2};
  s.v = {0.1, 0.3};
  std::vector<double> x{1.0, 2.0};
  const std::vector<double> g{0.0, 0.0};
  // Non-zero moments move x; start from fresh moments for the invariant.
  auto fresh = OptimizerState::for_size(2);
  optimizer_step(fresh, x, g, 0.1);
  EXPECT_EQ(x, (std::vector<double>{1.0, 2.0}));
  optimizer_step(s, x, g, 0.0);
  EXPECT_DOUBLE_EQ(s.m[0], 0.45);
  EXPECT_DOUBLE_EQ(s.v[1], 0.3 * 0.999);
}

TEST(Adam, FirstStepHasMagnitudeLr) {
  auto s = OptimizerState::for_size(3);
  std::vector<double> x{0.0, 0.0, 0.0};
  const std::vector<double> g{3.0, -0.01, 1e3};
  optimizer_step(s, x, g, 0.01);
  EXPECT_NEAR(x[0], -0.01, 1e-10);
  EXPECT_NEAR(x[1], 0.01, 1e-7);
  EXPECT_NEAR(x[2], -0.01, 1e-10);
}

TEST(Adam, MatchesReferenceOnQuadratic) {
  auto s = OptimizerState::for_size(1);
  std::vector<double> x{3.0};
  testkit::ReferenceAdam ref;
  ref.lr = 0.05;
  double xr = 3.0;
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> g{2.0 * (x[0] - 0.5)};
    optimizer_step(s, x, g, 0.05);
    xr = ref.step(xr, 2.0 * (xr - 0.5));
    ASSERT_NEAR(x[0], xr, 1e-10) << "step " << i;
  }
  EXPECT_EQ(s.step, 100);
}

TEST(Adam, NonFiniteIsReported) {
  auto s = OptimizerState::for_size(2);
  std::vector<double> x{0.0, 0.0};
  const std::vector<double> g{0.0, NAN};
  try {
    optimizer_step(s, x, g, 0.1, "pose");
    FAIL();
  } catch (const NumericalFailure& e) {
    EXPECT_NE(std::string(e.what()).find("pose[1]"), std::string::npos);
  }
  const std::vector<double> short_g{0.0};
  EXPECT_THROW(optimizer_step(s, x, short_g, 0.1), InvalidArgument);
}

TEST(LrSchedule, Cosine) {
  EXPECT_DOUBLE_EQ(lr_schedule(0, 1000, 5e-4, LrScheduleKind::kCosine), 5e-4);
  EXPECT_NEAR(lr_schedule(1000, 1000, 5e-4, LrScheduleKind::kCosine), 5e-6, 1e-18);
  EXPECT_NEAR(lr_schedule(500, 1000, 1.0, LrScheduleKind::kCosine), 0.01 + 0.99 * 0.5, 1e-15);
  const double q = lr_schedule(250, 1000, 1.0, LrScheduleKind::kCosine);
  EXPECT_NEAR(q, 0.01 + 0.99 * 0.5 * (1.0 + std::cos(std::numbers::pi / 4)), 1e-15);
}

TEST(LrSchedule, ExponentialAndMonotone) {
  EXPECT_DOUBLE_EQ(lr_schedule(0, 100, 2.0, LrScheduleKind::kExponential), 2.0);
  EXPECT_NEAR(lr_schedule(100, 100, 2.0, LrScheduleKind::kExponential), 0.02, 1e-15);
  EXPECT_NEAR(lr_schedule(50, 100, 1.0, LrScheduleKind::kExponential), 0.1, 1e-15);
  for (auto kind : {LrScheduleKind::kCosine, LrScheduleKind::kExponential}) {
    double prev = 1e9;
    for (long t = 0; t <= 200; ++t) {
      const double lr = lr_schedule(t, 200, 1.0, kind);
      EXPECT_LE(lr, prev);
      prev = lr;
    }
  }
}

}  // namespace
}  // namespace pcm
