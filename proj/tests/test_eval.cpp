#include <gtest/gtest.h>

#include <numbers>

#include "pcm/error.hpp"
#include "pcm/eval.hpp"
#include "testkit/quaternion.hpp"
#include "testkit/reference_nn.hpp"
#include "testkit/rng.hpp"

namespace pcm {
namespace {

using testkit::PropertyRng;

Mat3 random_rotation(PropertyRng& rng) {
  const Vec3 axis = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
  return axis_angle_to_matrix(axis * rng.uniform(0, std::numbers::pi));
}

std::vector<Vec3> random_points(PropertyRng& rng, int n, double r = 1.0) {
  std::vector<Vec3> p;
  for (int i = 0; i < n; ++i) p.emplace_back(rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r, r));
  return p;
}

TEST(Umeyama, Identity) {
  PropertyRng rng(71);
  const auto pts = random_points(rng, 10);
  const auto t = umeyama(pts, pts);
  EXPECT_NEAR(t.scale, 1.0, 1e-12);
  EXPECT_LT((t.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(t.translation.norm(), 1e-12);
}

TEST(Umeyama, RecoversSyntheticSimilarity) {
  PropertyRng rng(72);
  for (int trial = 0; trial < 50; ++trial) {
    const auto src = random_points(rng, 12);
    const Mat3 r = random_rotation(rng);
    const Vec3 t(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    std::vector<Vec3> dst;
    for (const auto& p : src) dst.push_back(2.0 * r * p + t);
    const auto fit = umeyama(src, dst);
    EXPECT_NEAR(fit.scale, 2.0, 1e-9);
    EXPECT_LT((fit.rotation - r).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((fit.translation - t).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Umeyama, NeverWorseThanIdentity) {
  PropertyRng rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    const auto src = random_points(rng, 8);
    const auto dst = random_points(rng, 8);
    const auto fit = umeyama(src, dst);
    double r_fit = 0.0, r_id = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      r_fit += (dst[i] - fit.apply(src[i])).squaredNorm();
      r_id += (dst[i] - src[i]).squaredNorm();
    }
    EXPECT_LE(r_fit, r_id + 1e-12);
  }
}

TEST(Umeyama, Degenerate) {
  std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2), Vec3(-1, -1, -1)};
  EXPECT_THROW(umeyama(line, line), DegenerateConfiguration);
  std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  EXPECT_THROW(umeyama(two, two), InvalidArgument);
}

TEST(Chamfer, Examples) {
  PropertyRng rng(74);
  const auto a = random_points(rng, 100);
  EXPECT_EQ(chamfer_l1(a, a).cd, 0.0);
  const std::vector<Vec3> o{Vec3::Zero()};
  const std::vector<Vec3> x{Vec3(0.1, 0, 0)};
  EXPECT_NEAR(chamfer_l1(o, x).cd, 1.0, 1e-12);
  const auto b = random_points(rng, 70);
  EXPECT_DOUBLE_EQ(chamfer_l1(a, b).cd, chamfer_l1(b, a).cd);
  EXPECT_THROW(chamfer_l1(a, std::vector<Vec3>{}), InvalidArgument);
}

TEST(FScore, Examples) {
  PropertyRng rng(75);
  const auto a = random_points(rng, 100);
  EXPECT_EQ(f_score(a, a).f, 1.0);
  std::vector<Vec3> far;
  for (const auto& p : a) far.push_back(p + Vec3(50, 0, 0));
  EXPECT_EQ(f_score(a, far).f, 0.0);
  const std::vector<Vec3> one{Vec3::Zero()};
  const std::vector<Vec3> two{Vec3::Zero(), Vec3(9, 9, 9)};
  const auto r = f_score(one, two);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 0.5);
  EXPECT_NEAR(r.f, 2.0 / 3.0, 1e-15);
}

TEST(FScore, ConsistentWithChamferOnRefinement) {
  const auto scene = AnalyticScene::make({{Vec3::Zero(), 0.6, false}}, 0);
  const auto gt = sample_surface(scene, 4000, 1);
  double prev_cd = 1e9;
  for (int m : {250, 1000, 4000}) {
    const auto est = sample_surface(scene, m, 2);
    const double cd = chamfer_l1(est, gt).cd;
    EXPECT_LT(cd, prev_cd);
    prev_cd = cd;
    if (m == 4000) EXPECT_GT(f_score(est, gt).f, 0.99);
  }
}

TEST(Chamfer, TriangleSanity) {
  PropertyRng rng(76);
  const auto scene = AnalyticScene::make({{Vec3::Zero(), 0.7, false}}, 0);
  const auto a = sample_surface(scene, 800, 1);
  const auto b = sample_surface(scene, 800, 2);
  const auto c = sample_surface(scene, 800, 3);
  // Maximum nearest-neighbour spacing within each set.
  double spacing = 0.0;
  for (const auto* s : {&a, &b, &c}) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      double best = 1e9;
      for (std::size_t j = 0; j < s->size(); ++j) {
        if (i != j) best = std::min(best, ((*s)[i] - (*s)[j]).cwiseAbs().sum());
      }
      spacing = std::max(spacing, best);
    }
  }
  EXPECT_LE(chamfer_l1(a, c).cd, chamfer_l1(a, b).cd + chamfer_l1(b, c).cd + 2.0 * kMetricScale * spacing);
}

TEST(NearestNeighbor, MatchesExhaustiveOracle) {
  PropertyRng rng(77);
  for (int inst = 0; inst < 100; ++inst) {
    const int n_t = static_cast<int>(rng.integer(1, 2000));
    std::vector<Vec3> targets = random_points(rng, n_t, rng.uniform(0.01, 3.0));
    // Duplicates and grid-aligned points make ties likely.
    if (inst % 3 == 0) {
      for (auto& p : targets) p = (p * 4.0).array().round() / 4.0;
    }
    const auto queries = random_points(rng, 200, 4.0);
    const NearestNeighborIndex index(targets);
    std::vector<std::array<double, 3>> qa, ta;
    for (const auto& p : queries) qa.push_back({p.x(), p.y(), p.z()});
    for (const auto& p : targets) ta.push_back({p.x(), p.y(), p.z()});
    const auto ref = testkit::reference_nn(qa, ta);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto got = index.query(queries[q]);
      ASSERT_EQ(got.index, ref[q].index) << "instance " << inst;
      ASSERT_EQ(got.distance, ref[q].distance);
    }
  }
}

TEST(SurfaceSample, SphereStatistics) {
  const auto scene = AnalyticScene::make({{Vec3::Zero(), 1.0, false}}, 0);
  const auto pts = sample_surface(scene, 20000, 9);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) {
    EXPECT_NEAR(p.norm(), 1.0, 1e-6);
    mean += p;
  }
  mean /= 20000.0;
  // Each coordinate of a uniform unit-sphere point has variance 1/3.
  const double sd = std::sqrt(1.0 / 3.0 / 20000.0);
  for (int a = 0; a < 3; ++a) EXPECT_LT(std::abs(mean[a]), 3.0 * sd);
  EXPECT_EQ(pts, sample_surface(scene, 20000, 9));
}

TEST(PoseErrors, Examples) {
  std::vector<PoseMean> truth;
  for (int i = 0; i < 5; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 5;
    truth.push_back(look_at(Vec3(3 * std::cos(a), 3 * std::sin(a), 1.0 + 0.2 * i), Vec3::Zero()));
  }
  for (bool aligned : {false, true}) {
    for (const auto& e : pose_errors(truth, truth, aligned)) {
      EXPECT_NEAR(e.rot_deg, 0.0, 1e-6);
      EXPECT_NEAR(e.trans, 0.0, 1e-9);
    }
  }
  auto est = truth;
  est[2].rotation = matrix_to_axis_angle(axis_angle_to_matrix(Vec3(0, 0, 10.0 * std::numbers::pi / 180.0)) *
                                         truth[2].rotation_matrix());
  const auto e = pose_errors(est, truth, false);
  EXPECT_NEAR(e[2].rot_deg, 10.0, 1e-9);
  EXPECT_THROW(pose_errors(std::span(est).first(3), truth, false), InvalidArgument);
}

TEST(PoseErrors, AlignedInvariantUnderGlobalSimilarity) {
  PropertyRng rng(78);
  std::vector<PoseMean> truth, est;
  for (int i = 0; i < 8; ++i) {
    const Vec3 c(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.5, 3));
    truth.push_back(look_at(c, Vec3::Zero()));
    PoseMean p = truth.back();
    p.rotation += Vec3(rng.uniform(-.1, .1), rng.uniform(-.1, .1), rng.uniform(-.1, .1));
    p.translation += Vec3(rng.uniform(-.1, .1), rng.uniform(-.1, .1), rng.uniform(-.1, .1));
    est.push_back(p);
  }
  SimilarityTransform g{1.7, random_rotation(rng), Vec3(1, -2, 0.5)};
  std::vector<PoseMean> moved;
  for (const auto& p : est) moved.push_back(g.apply(p));
  const auto a = pose_errors(est, truth, true);
  const auto b = pose_errors(moved, truth, true);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].rot_deg, b[i].rot_deg, 1e-9);
    EXPECT_NEAR(a[i].trans, b[i].trans, 1e-9);
  }
}

TEST(EvaluateReconstruction, InvariantUnderGlobalSimilarity) {
  PropertyRng rng(79);
  const auto gt_scene = AnalyticScene::make({{Vec3::Zero(), 0.5, false}, {Vec3(0.3, 0.2, 0.1), 0.3, false}}, 0);
  auto est_scene = gt_scene;
  est_scene.spheres[0].radius = 0.52;
  std::vector<PoseMean> truth, est;
  for (int i = 0; i < 6; ++i) {
    truth.push_back(look_at(Vec3(3 * std::cos(i), 3 * std::sin(i), 1.0 + 0.1 * i), Vec3::Zero()));
    PoseMean p = truth.back();
    p.translation += Vec3(rng.uniform(-.05, .05), rng.uniform(-.05, .05), rng.uniform(-.05, .05));
    est.push_back(p);
  }
  const auto gt_pts = sample_surface(gt_scene, 3000, 5);
  const auto est_pts = sample_surface(est_scene, 3000, 5);
  const auto base = evaluate_reconstruction(est_pts, est, gt_pts, truth);
  SimilarityTransform g{0.6, random_rotation(rng), Vec3(-1, 4, 2)};
  std::vector<Vec3> moved_pts;
  for (const auto& p : est_pts) moved_pts.push_back(g.apply(p));
  std::vector<PoseMean> moved;
  for (const auto& p : est) moved.push_back(g.apply(p));
  const auto m = evaluate_reconstruction(moved_pts, moved, gt_pts, truth);
  EXPECT_NEAR(m.chamfer.cd, base.chamfer.cd, 1e-9);
  EXPECT_NEAR(m.fscore.f, base.fscore.f, 1e-9);
}

TEST(EvaluateReconstruction, GroundTruthSelfEvaluation) {
  const auto scene = AnalyticScene::make({{Vec3::Zero(), 0.5, false}, {Vec3(0.3, 0.2, 0.1), 0.3, false}}, 0);
  std::vector<PoseMean> truth;
  for (int i = 0; i < 6; ++i) truth.push_back(look_at(Vec3(3 * std::cos(i), 3 * std::sin(i), 1.0), Vec3::Zero()));
  const auto pts = sample_surface(scene, 20000, 5);
  const auto m = evaluate_reconstruction(pts, truth, pts, truth);
  EXPECT_LT(m.chamfer.cd, 0.05);
  EXPECT_NEAR(m.fscore.f, 1.0, 1e-12);
}

}  // namespace
}  // namespace pcm
