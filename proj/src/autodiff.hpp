#pragma once

// Dual-number plumbing shared by the renderer and VDA gradient paths. A ray
// (or ray pair) is differentiated in forward mode over a small local
// parameter block: [pose blocks (6 each)] [learnable spheres (4 each)] [log s].

#include <ceres/jet.h>

#include <span>
#include <stdexcept>
#include <vector>

#include "pcm/error.hpp"
#include "pcm/renderer.hpp"

namespace pcm::detail {

template <int N>
using Jet = ceres::Jet<double, N>;

struct LocalLayout {
  int pose_blocks = 1;
  int learnable_spheres = 0;

  int scene_offset() const { return 6 * pose_blocks; }
  int log_s_slot() const { return scene_offset() + 4 * learnable_spheres; }
  int size() const { return log_s_slot() + 1; }
};

template <typename F>
decltype(auto) with_jet_size(int params, F&& f) {
  if (params <= 8) return f.template operator()<8>();
  if (params <= 16) return f.template operator()<16>();
  if (params <= 32) return f.template operator()<32>();
  if (params <= 64) return f.template operator()<64>();
  throw InvalidArgument("too many learnable parameters per ray (" + std::to_string(params) + ")");
}

template <int N>
Jet<N> seeded(double value, int slot) {
  return Jet<N>(value, slot);
}

template <int N>
std::vector<SphereT<Jet<N>>> jet_spheres(const AnalyticScene& scene, const LocalLayout& layout) {
  std::vector<SphereT<Jet<N>>> out;
  out.reserve(scene.spheres.size());
  int k = 0;
  for (const auto& s : scene.spheres) {
    SphereT<Jet<N>> js;
    if (s.learnable) {
      const int base = layout.scene_offset() + 4 * k++;
      for (int a = 0; a < 3; ++a) js.center[a] = seeded<N>(s.center[a], base + a);
      js.radius = seeded<N>(s.radius, base + 3);
    } else {
      js.center = s.center.cast<Jet<N>>();
      js.radius = Jet<N>(s.radius);
    }
    out.push_back(js);
  }
  return out;
}

template <int N>
void jet_pose(const PoseMean& pose, int block, Vec3T<Jet<N>>& r, Vec3T<Jet<N>>& t) {
  for (int a = 0; a < 3; ++a) {
    r[a] = seeded<N>(pose.rotation[a], 6 * block + a);
    t[a] = seeded<N>(pose.translation[a], 6 * block + 3 + a);
  }
}

/// Adds scale * local gradient into the global gradient. `cameras[b]` is the
/// camera owning pose block b.
inline void scatter(std::span<const double> local, const LocalLayout& layout, std::span<const int> cameras,
                    double scale, ModelGradient& g) {
  for (int b = 0; b < layout.pose_blocks; ++b) {
    const auto base = static_cast<std::size_t>(6 * cameras[static_cast<std::size_t>(b)]);
    for (int a = 0; a < 6; ++a) g.pose[base + static_cast<std::size_t>(a)] += scale * local[static_cast<std::size_t>(6 * b + a)];
  }
  for (int k = 0; k < 4 * layout.learnable_spheres; ++k) {
    g.scene[static_cast<std::size_t>(k)] += scale * local[static_cast<std::size_t>(layout.scene_offset() + k)];
  }
  g.log_s += scale * local[static_cast<std::size_t>(layout.log_s_slot())];
}

template <int N>
std::vector<double> derivatives(const Jet<N>& x, int size) {
  return std::vector<double>(x.v.data(), x.v.data() + size);
}

}  // namespace pcm::detail
