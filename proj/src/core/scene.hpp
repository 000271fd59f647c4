// Volume sampling: soft-body shapes are unions of primitive volumes sampled
// to particles on a regular lattice (deterministic, uniform density).
#pragma once

#include <vector>

#include "collider.hpp"
#include "state.hpp"

namespace plastisim {

enum class VolKind { Box, Sphere, Capsule };

// Box: corners lo=a, hi=b. Sphere: center a, radius r.
// Capsule: segment a..b swept by radius r (rope-like volumes).
template <class T>
struct Volume {
  VolKind kind = VolKind::Box;
  Vec3<T> a{}, b{};
  T r = 0;

  bool contains(const Vec3<T>& p) const {
    switch (kind) {
      case VolKind::Box:
        return p.x >= a.x && p.x <= b.x && p.y >= a.y && p.y <= b.y &&
               p.z >= a.z && p.z <= b.z;
      case VolKind::Sphere:
        return norm_sq(p - a) <= r * r;
      case VolKind::Capsule: {
        Vec3<T> ab = b - a;
        T t = dot(p - a, ab) / std::max(norm_sq(ab), T(1e-30));
        t = std::clamp(t, T(0), T(1));
        return norm_sq(p - (a + t * ab)) <= r * r;
      }
    }
    return false;
  }

  void bounds(Vec3<T>& lo, Vec3<T>& hi) const {
    switch (kind) {
      case VolKind::Box:
        lo = a;
        hi = b;
        return;
      case VolKind::Sphere:
        lo = a - Vec3<T>(r);
        hi = a + Vec3<T>(r);
        return;
      case VolKind::Capsule:
        lo = {std::min(a.x, b.x) - r, std::min(a.y, b.y) - r, std::min(a.z, b.z) - r};
        hi = {std::max(a.x, b.x) + r, std::max(a.y, b.y) + r, std::max(a.z, b.z) + r};
        return;
    }
  }
};

// Fill `ps` with lattice-sampled particles covering the volume union at the
// params' particles-per-cell density. Rejects volumes that stick out of the
// domain margin, overlapping volumes, and particles born inside a
// manipulator.
template <class T>
void sample_volumes(const SimParams<T>& prm, const std::vector<Volume<T>>& vols,
                    const std::vector<Manipulator<T>>& manips, Particles<T>& ps) {
  T h = prm.dx / std::cbrt(prm.ppc);
  std::vector<Vec3<T>> pts;
  for (size_t vi = 0; vi < vols.size(); vi++) {
    const Volume<T>& vol = vols[vi];
    Vec3<T> lo, hi;
    vol.bounds(lo, hi);
    T m = prm.margin();
    if (lo.x < m || lo.y < m || lo.z < m || hi.x > 1 - m || hi.y > 1 - m ||
        hi.z > 1 - m)
      fail(ErrorCode::Config, "soft-body volume crosses the domain margin");
    // Global lattice at (i + 1/2) h so sampling is independent of volume order.
    int i0[3], i1[3];
    for (int d = 0; d < 3; d++) {
      i0[d] = int(std::floor(lo[d] / h));
      i1[d] = int(std::ceil(hi[d] / h));
    }
    for (int i = i0[0]; i <= i1[0]; i++) {
      for (int j = i0[1]; j <= i1[1]; j++) {
        for (int k = i0[2]; k <= i1[2]; k++) {
          Vec3<T> p{(i + T(0.5)) * h, (j + T(0.5)) * h, (k + T(0.5)) * h};
          if (!vol.contains(p)) continue;
          for (size_t vj = 0; vj < vi; vj++)
            if (vols[vj].contains(p))
              fail(ErrorCode::Config, "soft-body volumes overlap");
          for (const auto& man : manips)
            if (sdf(man, p) < 0)
              fail(ErrorCode::Config, "manipulator overlaps the soft body");
          pts.push_back(p);
        }
      }
    }
  }
  if (pts.empty()) fail(ErrorCode::Config, "no particles sampled from volumes");
  ps.resize(pts.size());
  ps.x = std::move(pts);
}

}  // namespace plastisim
