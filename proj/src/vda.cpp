#include "pcm/vda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "autodiff.hpp"
#include "pcm/error.hpp"
#include "pcm/parallel.hpp"

namespace pcm {

std::vector<int> top_k_indices(std::span<const double> weights, std::span<const double> depths, int k) {
  if (weights.size() != depths.size()) throw InvalidArgument("top_k: weights and depths differ in length");
  if (k < 1 || static_cast<std::size_t>(k) > weights.size()) {
    throw InvalidArgument("top_k: k must be in [1, n_samples]");
  }
  if (std::none_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; })) {
    throw DegenerateConfiguration("top_k: ray has no positive weight");
  }
  std::vector<int> idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    if (weights[ua] != weights[ub]) return weights[ua] > weights[ub];
    if (depths[ua] != depths[ub]) return depths[ua] < depths[ub];
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

WeightedPointSet top_k_points(const RayRenderResult& result, int k) {
  const auto idx = top_k_indices(result.weights, result.depths, k);
  WeightedPointSet out;
  double total = 0.0;
  for (int i : idx) total += result.weights[static_cast<std::size_t>(i)];
  for (int i : idx) {
    out.points.push_back(result.points[static_cast<std::size_t>(i)]);
    out.weights.push_back(result.weights[static_cast<std::size_t>(i)] / total);
  }
  return out;
}

bool GridGeometry::same_as(const GridGeometry& o) const {
  return resolution == o.resolution && sigma == o.sigma && origin == o.origin && extent == o.extent;
}

GridGeometry build_grid(const WeightedPointSet& a, const WeightedPointSet& b, int resolution, double sigma) {
  if (a.points.empty() || b.points.empty()) throw InvalidArgument("build_grid: empty point set");
  if (resolution < 2) throw InvalidArgument("build_grid: resolution must be >= 2");
  if (!(sigma > 0.0)) throw InvalidArgument("build_grid: kernel sigma must be positive");
  GridGeometry g;
  g.resolution = resolution;
  g.sigma = sigma;
  g.bbox_min = a.points.front();
  g.bbox_max = a.points.front();
  for (const auto* set : {&a, &b}) {
    for (const Vec3& p : set->points) {
      g.bbox_min = g.bbox_min.cwiseMin(p);
      g.bbox_max = g.bbox_max.cwiseMax(p);
    }
  }
  // A zero-size box degenerates to a cube of side 6 sigma around the point.
  const double pad = 3.0 * sigma;
  g.origin = g.bbox_min - Vec3::Constant(pad);
  g.extent = (g.bbox_max - g.bbox_min) + Vec3::Constant(2.0 * pad);
  return g;
}

namespace {

// Per-axis Gaussian factors of one point on the lattice.
struct AxisFactors {
  std::array<std::vector<double>, 3> g;     // exp(-(v - p)^2 / 2 sigma^2)
  std::array<std::vector<double>, 3> diff;  // (v - p) / sigma^2
};

AxisFactors axis_factors(const Vec3& p, const GridGeometry& geom) {
  AxisFactors f;
  const int r = geom.resolution;
  const double inv_var = 1.0 / (geom.sigma * geom.sigma);
  for (int a = 0; a < 3; ++a) {
    f.g[a].resize(static_cast<std::size_t>(r));
    f.diff[a].resize(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) {
      const double d = geom.voxel_center(a, i) - p[a];
      f.g[a][static_cast<std::size_t>(i)] = std::exp(-0.5 * d * d * inv_var);
      f.diff[a][static_cast<std::size_t>(i)] = d * inv_var;
    }
  }
  return f;
}

std::vector<double> splat(const WeightedPointSet& set, const std::vector<AxisFactors>& factors,
                          const GridGeometry& geom, double cutoff_sigmas) {
  const auto r = static_cast<std::size_t>(geom.resolution);
  std::vector<double> values(r * r * r, 0.0);
  const bool truncate = std::isfinite(cutoff_sigmas);
  const double cutoff2 = cutoff_sigmas * cutoff_sigmas * geom.sigma * geom.sigma;
  for (std::size_t k = 0; k < set.points.size(); ++k) {
    const auto& f = factors[k];
    const double w = set.weights[k];
    const Vec3& p = set.points[k];
    for (std::size_t l = 0; l < r; ++l) {
      const double dz = geom.voxel_center(2, static_cast<int>(l)) - p.z();
      for (std::size_t j = 0; j < r; ++j) {
        const double dy = geom.voxel_center(1, static_cast<int>(j)) - p.y();
        const double wyz = w * f.g[1][j] * f.g[2][l];
        double* row = &values[(l * r + j) * r];
        for (std::size_t i = 0; i < r; ++i) {
          if (truncate) {
            const double dx = geom.voxel_center(0, static_cast<int>(i)) - p.x();
            if (dx * dx + dy * dy + dz * dz > cutoff2) continue;
          }
          row[i] += wyz * f.g[0][i];
        }
      }
    }
  }
  return values;
}

}  // namespace

VoxelDensityGrid voxelize_mog(const WeightedPointSet& set, const GridGeometry& geometry, double cutoff_sigmas) {
  if (geometry.resolution < 2) throw InvalidArgument("voxelize_mog: invalid grid");
  if (set.points.size() != set.weights.size()) throw InvalidArgument("voxelize_mog: points and weights differ");
  std::vector<AxisFactors> factors;
  factors.reserve(set.points.size());
  for (const Vec3& p : set.points) factors.push_back(axis_factors(p, geometry));
  return {geometry, splat(set, factors, geometry, cutoff_sigmas)};
}

double iou_loss(const VoxelDensityGrid& a, const VoxelDensityGrid& b) {
  if (!a.geometry.same_as(b.geometry) || a.values.size() != b.values.size()) {
    throw InvalidArgument("iou_loss: grids do not share a geometry");
  }
  double s_min = 0.0;
  double s_max = 0.0;
  for (std::size_t v = 0; v < a.values.size(); ++v) {
    s_min += std::min(a.values[v], b.values[v]);
    s_max += std::max(a.values[v], b.values[v]);
  }
  return 1.0 - s_min / (s_max + kIouEps);
}

IouEvaluation iou_loss_with_gradient(const WeightedPointSet& a, const WeightedPointSet& b, int resolution,
                                     double sigma) {
  const GridGeometry geom = build_grid(a, b, resolution, sigma);
  const auto r = static_cast<std::size_t>(resolution);
  const std::array<const WeightedPointSet*, 2> sets{&a, &b};
  std::array<std::vector<AxisFactors>, 2> factors;
  std::array<std::vector<double>, 2> density;
  for (int s = 0; s < 2; ++s) {
    for (const Vec3& p : sets[s]->points) factors[s].push_back(axis_factors(p, geom));
    density[s] = splat(*sets[s], factors[s], geom, std::numeric_limits<double>::infinity());
  }

  double s_min = 0.0;
  double s_max = 0.0;
  for (std::size_t v = 0; v < density[0].size(); ++v) {
    s_min += std::min(density[0][v], density[1][v]);
    s_max += std::max(density[0][v], density[1][v]);
  }
  const double denom = s_max + kIouEps;
  IouEvaluation out;
  out.loss = 1.0 - s_min / denom;
  const double d_min = -1.0 / denom;
  const double d_max = s_min / (denom * denom);

  // Upstream gradient per voxel and set; ties send the min branch to `a`.
  std::array<std::vector<double>, 2> upstream{std::vector<double>(density[0].size()),
                                              std::vector<double>(density[0].size())};
  for (std::size_t v = 0; v < density[0].size(); ++v) {
    const bool a_is_min = density[0][v] <= density[1][v];
    upstream[0][v] = a_is_min ? d_min : d_max;
    upstream[1][v] = a_is_min ? d_max : d_min;
  }

  // Marginals B_k[axis][index] = sum over the other two axes of upstream * G_k.
  std::array<std::vector<double>, 3> slab;  // dL/d(voxel coordinate) per slab
  for (auto& s : slab) s.assign(r, 0.0);
  std::array<std::vector<Vec3>*, 2> d_points{&out.d_points_a, &out.d_points_b};
  std::array<std::vector<double>*, 2> d_weights{&out.d_weights_a, &out.d_weights_b};
  for (int s = 0; s < 2; ++s) {
    const auto& set = *sets[s];
    const auto& up = upstream[s];
    for (std::size_t k = 0; k < set.points.size(); ++k) {
      const auto& f = factors[s][k];
      std::array<std::vector<double>, 3> marg;
      for (auto& m : marg) m.assign(r, 0.0);
      for (std::size_t l = 0; l < r; ++l) {
        for (std::size_t j = 0; j < r; ++j) {
          const double gyz = f.g[1][j] * f.g[2][l];
          const double* u = &up[(l * r + j) * r];
          double acc = 0.0;
          for (std::size_t i = 0; i < r; ++i) {
            const double t = u[i] * f.g[0][i] * gyz;
            marg[0][i] += t;
            acc += t;
          }
          marg[1][j] += acc;
          marg[2][l] += acc;
        }
      }
      const double w = set.weights[k];
      double dw = 0.0;
      for (std::size_t i = 0; i < r; ++i) dw += marg[0][i];
      Vec3 dp = Vec3::Zero();
      for (int ax = 0; ax < 3; ++ax) {
        for (std::size_t i = 0; i < r; ++i) {
          const double t = w * marg[ax][i] * f.diff[ax][i];
          dp[ax] += t;
          slab[ax][i] -= t;
        }
      }
      d_points[s]->push_back(dp);
      d_weights[s]->push_back(dw);
    }
  }

  // The box follows the extreme points: v(i) = min - pad + (i + 0.5)/R * (max - min + 2 pad).
  for (int ax = 0; ax < 3; ++ax) {
    double d_lo = 0.0;
    double d_hi = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const double frac = (static_cast<double>(i) + 0.5) / static_cast<double>(r);
      d_lo += slab[ax][i] * (1.0 - frac);
      d_hi += slab[ax][i] * frac;
    }
    // First point (a before b) attaining the extreme owns it.
    auto route = [&](double target, double grad) {
      for (int s = 0; s < 2; ++s) {
        for (std::size_t k = 0; k < sets[s]->points.size(); ++k) {
          if (sets[s]->points[k][ax] == target) {
            (*d_points[s])[k][ax] += grad;
            return;
          }
        }
      }
    };
    route(geom.bbox_min[ax], d_lo);
    route(geom.bbox_max[ax], d_hi);
  }
  return out;
}

std::vector<Correspondence> sample_matches(std::span<const Correspondence> matches, int n_match, Rng& rng) {
  std::vector<Correspondence> pool(matches.begin(), matches.end());
  const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(std::max(n_match, 0)));
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

namespace {

struct MatchLocal {
  bool usable = false;
  double iou = 0.0;
  std::vector<double> iou_grad;
  double color_err = 0.0;
  std::vector<double> color_grad;
  Vec3 color_i = Vec3::Zero();
  Vec3 color_j = Vec3::Zero();
};

}  // namespace

PairEvaluation vda_pair_loss(const AnalyticScene& scene, std::span<const PoseMean> means, const Intrinsics& k,
                             int cam_i, int cam_j, std::span<const MatchedRay> matches,
                             const RenderParams& params, const VdaParams& vda) {
  params.validate();
  const int n_cam = static_cast<int>(means.size());
  if (cam_i < 0 || cam_i >= n_cam || cam_j < 0 || cam_j >= n_cam) {
    throw InvalidArgument("vda_pair_loss: camera index out of range");
  }
  const detail::LocalLayout layout{2, scene.learnable_count()};
  PairEvaluation out;
  out.iou_grad = ModelGradient::zeros(n_cam, layout.learnable_spheres);
  out.color_grad = ModelGradient::zeros(n_cam, layout.learnable_spheres);
  if (matches.empty()) return out;

  std::vector<MatchLocal> local(matches.size());
  detail::with_jet_size(layout.size(), [&]<int N>() {
    using J = detail::Jet<N>;
    const auto spheres = detail::jet_spheres<N>(scene, layout);
    const J s = exp(detail::seeded<N>(params.log_s, layout.log_s_slot()));
    Vec3T<J> r_i, t_i, r_j, t_j;
    detail::jet_pose<N>(means[static_cast<std::size_t>(cam_i)], 0, r_i, t_i);
    detail::jet_pose<N>(means[static_cast<std::size_t>(cam_j)], 1, r_j, t_j);
    const Mat3T<J> rot_i = rodrigues<J>(r_i);
    const Mat3T<J> rot_j = rodrigues<J>(r_j);

    parallel_for(matches.size(), [&](std::size_t m) {
      const MatchedRay& mr = matches[m];
      const PixelCoord pi = pixel_center(mr.match.col_i, mr.match.row_i);
      const PixelCoord pj = pixel_center(mr.match.col_j, mr.match.row_j);
      const auto ti = trace_ray<J>(spheres, scene.field_scale, scene.color_phases, t_i,
                                   ray_direction<J>(rot_i, k, pi.u, pi.v), params, s, mr.jitter_i);
      const auto tj = trace_ray<J>(spheres, scene.field_scale, scene.color_phases, t_j,
                                   ray_direction<J>(rot_j, k, pj.u, pj.v), params, s, mr.jitter_j);
      MatchLocal& out_m = local[m];
      J err(0.0);
      for (int a = 0; a < 3; ++a) {
        err += abs(ti.color[a] - J(mr.target_i[a])) + abs(tj.color[a] - J(mr.target_j[a]));
        out_m.color_i[a] = ti.color[a].a;
        out_m.color_j[a] = tj.color[a].a;
      }
      out_m.color_err = err.a;
      out_m.color_grad = detail::derivatives<N>(err, layout.size());

      // Top-k selection and renormalization in dual numbers so the chain
      // rule reaches poses, spheres and sharpness.
      auto select = [&](const RayTrace<J>& tr, std::vector<Vec3T<J>>& pts, std::vector<J>& wts) {
        std::vector<double> w(tr.weights.size());
        for (std::size_t q = 0; q < w.size(); ++q) w[q] = tr.weights[q].a;
        const auto idx = top_k_indices(w, tr.depths, vda.top_k);
        J total(0.0);
        for (int q : idx) total += tr.weights[static_cast<std::size_t>(q)];
        for (int q : idx) {
          pts.push_back(tr.points[static_cast<std::size_t>(q)]);
          wts.push_back(tr.weights[static_cast<std::size_t>(q)] / total);
        }
      };
      std::vector<Vec3T<J>> pa, pb;
      std::vector<J> wa, wb;
      try {
        select(ti, pa, wa);
        select(tj, pb, wb);
      } catch (const DegenerateConfiguration&) {
        return;
      }
      WeightedPointSet sa, sb;
      for (std::size_t q = 0; q < pa.size(); ++q) {
        sa.points.emplace_back(pa[q][0].a, pa[q][1].a, pa[q][2].a);
        sa.weights.push_back(wa[q].a);
      }
      for (std::size_t q = 0; q < pb.size(); ++q) {
        sb.points.emplace_back(pb[q][0].a, pb[q][1].a, pb[q][2].a);
        sb.weights.push_back(wb[q].a);
      }
      const IouEvaluation ev = iou_loss_with_gradient(sa, sb, vda.resolution, vda.sigma);
      Eigen::Matrix<double, N, 1> g = Eigen::Matrix<double, N, 1>::Zero();
      for (std::size_t q = 0; q < pa.size(); ++q) {
        for (int a = 0; a < 3; ++a) g += ev.d_points_a[q][a] * pa[q][a].v;
        g += ev.d_weights_a[q] * wa[q].v;
      }
      for (std::size_t q = 0; q < pb.size(); ++q) {
        for (int a = 0; a < 3; ++a) g += ev.d_points_b[q][a] * pb[q][a].v;
        g += ev.d_weights_b[q] * wb[q].v;
      }
      out_m.usable = true;
      out_m.iou = ev.loss;
      out_m.iou_grad.assign(g.data(), g.data() + layout.size());
    });
    return 0;
  });

  const std::array<int, 2> cams{cam_i, cam_j};
  for (const auto& m : local) out.usable += m.usable ? 1 : 0;
  out.skipped = static_cast<int>(matches.size()) - out.usable;
  CompensatedSum iou_sum;
  CompensatedSum color_sum;
  const double color_scale = 1.0 / (6.0 * static_cast<double>(matches.size()));
  const double iou_scale = out.usable > 0 ? 1.0 / out.usable : 0.0;
  for (const auto& m : local) {
    color_sum.add(m.color_err);
    detail::scatter(m.color_grad, layout, cams, color_scale, out.color_grad);
    out.colors_i.push_back(m.color_i);
    out.colors_j.push_back(m.color_j);
    if (!m.usable) continue;
    iou_sum.add(m.iou);
    detail::scatter(m.iou_grad, layout, cams, iou_scale, out.iou_grad);
  }
  out.color = color_sum.value() * color_scale;
  out.iou = iou_sum.value() * iou_scale;
  out.color_grad.check_finite("pair photometric loss");
  out.iou_grad.check_finite("volumetric IoU loss");
  return out;
}

}  // namespace pcm
