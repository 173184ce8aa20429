#include "pcm/eval.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pcm/error.hpp"
#include "pcm/parallel.hpp"

namespace pcm {

PoseMean SimilarityTransform::apply(const PoseMean& pose) const {
  PoseMean out;
  out.rotation = matrix_to_axis_angle(rotation * pose.rotation_matrix());
  out.translation = apply(pose.translation);
  return out;
}

SimilarityTransform umeyama(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) throw InvalidArgument("umeyama: point sets differ in size");
  if (src.size() < 3) throw InvalidArgument("umeyama: need at least three points");
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::Matrix3Xd a(3, n);
  Eigen::Matrix3Xd b(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.col(i) = src[static_cast<std::size_t>(i)];
    b.col(i) = dst[static_cast<std::size_t>(i)];
  }
  if (!a.allFinite() || !b.allFinite()) throw InvalidArgument("umeyama: non-finite input");
  const Eigen::Matrix3Xd centered = a.colwise() - a.rowwise().mean();
  const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  const auto sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) < 1e-9 * sv(0)) throw DegenerateConfiguration("umeyama: source points are collinear");
  const Eigen::Matrix4d t = Eigen::umeyama(a, b, true);
  SimilarityTransform out;
  const Mat3 sr = t.topLeftCorner<3, 3>();
  out.scale = std::cbrt(sr.determinant());
  out.rotation = sr / out.scale;
  out.translation = t.topRightCorner<3, 1>();
  return out;
}

namespace {

double l1(const Vec3& a, const Vec3& b) {
  return std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
}

}  // namespace

NearestNeighborIndex::NearestNeighborIndex(std::span<const Vec3> targets) : points_(targets.begin(), targets.end()) {
  if (points_.empty()) throw InvalidArgument("nearest neighbor index: empty target set");
  Vec3 lo = points_.front();
  Vec3 hi = points_.front();
  for (const Vec3& p : points_) {
    if (!p.allFinite()) throw InvalidArgument("nearest neighbor index: non-finite point");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  lo_ = lo;
  const Vec3 ext = (hi - lo).cwiseMax(Vec3::Constant(1e-12));
  // About two points per cell for a surface-like set.
  const double target_cells = std::max(1.0, static_cast<double>(points_.size()) / 2.0);
  cell_ = std::max(std::cbrt(ext.prod() / target_cells), ext.maxCoeff() / 256.0);
  cell_ = std::max(cell_, 1e-9);
  for (int a = 0; a < 3; ++a) dims_[static_cast<std::size_t>(a)] = std::max(1, static_cast<int>(ext[a] / cell_) + 1);
  const std::size_t n_cells =
      static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]);
  std::vector<int> counts(n_cells + 1, 0);
  std::vector<std::size_t> cell_ids(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto c = cell_of(points_[i]);
    cell_ids[i] = (static_cast<std::size_t>(c[2]) * dims_[1] + static_cast<std::size_t>(c[1])) * dims_[0] +
                  static_cast<std::size_t>(c[0]);
    ++counts[cell_ids[i] + 1];
  }
  for (std::size_t c = 0; c < n_cells; ++c) counts[c + 1] += counts[c];
  cell_start_ = counts;
  cell_items_.assign(points_.size(), 0);
  std::vector<int> fill(counts.begin(), counts.end() - 1);
  // Ascending index order within each cell.
  for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[static_cast<std::size_t>(fill[cell_ids[i]]++)] = static_cast<int>(i);
}

std::array<int, 3> NearestNeighborIndex::cell_of(const Vec3& p) const {
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - lo_[a]) / cell_);
    const int hi = dims_[static_cast<std::size_t>(a)] - 1;
    c[static_cast<std::size_t>(a)] = f < 0.0 ? 0 : (f > hi ? hi : static_cast<int>(f));
  }
  return c;
}

NearestNeighbor NearestNeighborIndex::query(const Vec3& q) const {
  const auto home = cell_of(q);
  NearestNeighbor best{-1, std::numeric_limits<double>::infinity()};
  const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  for (int ring = 0; ring <= max_ring; ++ring) {
    // Every cell at Chebyshev distance `ring` from the home cell.
    for (int dz = -ring; dz <= ring; ++dz) {
      const int z = home[2] + dz;
      if (z < 0 || z >= dims_[2]) continue;
      for (int dy = -ring; dy <= ring; ++dy) {
        const int y = home[1] + dy;
        if (y < 0 || y >= dims_[1]) continue;
        const bool face = std::abs(dz) == ring || std::abs(dy) == ring;
        for (int dx = -ring; dx <= ring; dx += (face ? 1 : 2 * std::max(ring, 1))) {
          const int x = home[0] + dx;
          if (x < 0 || x >= dims_[0]) continue;
          const std::size_t cell = (static_cast<std::size_t>(z) * dims_[1] + static_cast<std::size_t>(y)) * dims_[0] +
                                   static_cast<std::size_t>(x);
          for (int k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
            const int idx = cell_items_[static_cast<std::size_t>(k)];
            const double d = l1(q, points_[static_cast<std::size_t>(idx)]);
            if (d < best.distance || (d == best.distance && idx < best.index)) best = {idx, d};
          }
        }
      }
    }
    // Cells beyond this ring are at least ring * cell away (l1 >= l-infinity),
    // also for queries outside the box.
    if (best.index >= 0 && best.distance < (ring - 1e-9) * cell_) break;
  }
  return best;
}

namespace {

std::vector<double> nn_distances(std::span<const Vec3> queries, std::span<const Vec3> targets) {
  const NearestNeighborIndex index(targets);
  std::vector<double> d(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) { d[i] = index.query(queries[i]).distance; });
  return d;
}

void require_points(std::span<const Vec3> a, std::span<const Vec3> b, const char* what) {
  if (a.empty() || b.empty()) throw InvalidArgument(std::string(what) + ": point sets must be non-empty");
}

}  // namespace

ChamferResult chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_points(a, b, "chamfer_l1");
  const auto ab = nn_distances(a, b);
  const auto ba = nn_distances(b, a);
  ChamferResult r;
  r.accuracy = kMetricScale * compensated_sum(ab) / static_cast<double>(a.size());
  r.completeness = kMetricScale * compensated_sum(ba) / static_cast<double>(b.size());
  r.cd = 0.5 * (r.accuracy + r.completeness);
  return r;
}

FScoreResult f_score(std::span<const Vec3> a, std::span<const Vec3> b, double tau) {
  require_points(a, b, "f_score");
  if (!(tau > 0.0)) throw InvalidArgument("f_score: tau must be positive");
  const auto ab = nn_distances(a, b);
  const auto ba = nn_distances(b, a);
  const auto within = [&](const std::vector<double>& d) {
    return static_cast<double>(std::count_if(d.begin(), d.end(), [&](double x) { return kMetricScale * x < tau; })) /
           static_cast<double>(d.size());
  };
  FScoreResult r;
  r.precision = within(ab);
  r.recall = within(ba);
  r.f = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

std::vector<Vec3> sample_surface(const AnalyticScene& scene, int count, std::uint64_t seed) {
  return sample_surface_points(scene, count, seed);
}

std::vector<PoseError> pose_errors(std::span<const PoseMean> est, std::span<const PoseMean> truth, bool aligned) {
  if (est.size() != truth.size()) throw InvalidArgument("pose_errors: camera counts differ");
  SimilarityTransform t;
  if (aligned) {
    std::vector<Vec3> a;
    std::vector<Vec3> b;
    for (std::size_t i = 0; i < est.size(); ++i) {
      a.push_back(est[i].translation);
      b.push_back(truth[i].translation);
    }
    t = umeyama(a, b);
  }
  std::vector<PoseError> out;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Mat3 r = t.rotation * est[i].rotation_matrix();
    out.push_back({rotation_angle_deg(r, truth[i].rotation_matrix()), (t.apply(est[i].translation) - truth[i].translation).norm()});
  }
  return out;
}

ReconstructionMetrics evaluate_reconstruction(std::span<const Vec3> est_points, std::span<const PoseMean> est_poses,
                                              std::span<const Vec3> gt_points, std::span<const PoseMean> true_poses,
                                              double tau) {
  if (est_poses.size() != true_poses.size()) throw InvalidArgument("evaluate: camera counts differ");
  std::vector<Vec3> a;
  std::vector<Vec3> b;
  for (std::size_t i = 0; i < est_poses.size(); ++i) {
    a.push_back(est_poses[i].translation);
    b.push_back(true_poses[i].translation);
  }
  ReconstructionMetrics m;
  m.alignment = umeyama(a, b);
  std::vector<Vec3> aligned;
  aligned.reserve(est_points.size());
  for (const Vec3& p : est_points) aligned.push_back(m.alignment.apply(p));
  m.chamfer = chamfer_l1(aligned, gt_points);
  m.fscore = f_score(aligned, gt_points, tau);
  m.pose_errors = pose_errors(est_poses, true_poses, true);
  return m;
}

}  // namespace pcm
