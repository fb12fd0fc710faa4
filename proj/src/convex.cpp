#include <algorithm>
#include <cmath>
#include <limits>

#include "brickstack/geometry.hpp"

namespace brickstack {

SatResult obb_sat(const Obb& a, const Obb& b) {
  const auto aa = a.axes();
  const auto ba = b.axes();
  const Vec3 d = b.center - a.center;

  SatResult best{std::numeric_limits<double>::infinity(), Vec3::UnitZ()};
  auto test = [&](Vec3 axis) {
    const double n = axis.norm();
    if (n < 1e-9) return;  // parallel edge pair, covered by face axes
    axis /= n;
    double ra = 0.0;
    double rb = 0.0;
    for (int i = 0; i < 3; ++i) {
      ra += a.half_extents[i] * std::abs(axis.dot(aa[i]));
      rb += b.half_extents[i] * std::abs(axis.dot(ba[i]));
    }
    const double dist = axis.dot(d);
    const double overlap = ra + rb - std::abs(dist);
    if (overlap < best.depth) {
      best.depth = overlap;
      best.axis = dist >= 0.0 ? axis : Vec3(-axis);
    }
  };
  for (int i = 0; i < 3; ++i) test(aa[i]);
  for (int i = 0; i < 3; ++i) test(ba[i]);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) test(aa[i].cross(ba[j]));
  return best;
}

bool obb_overlap(const Obb& a, const Obb& b) { return obb_sat(a, b).depth > 0.0; }

namespace {

struct SimplexProjection {
  Vec3 point;
  std::vector<Vec3> support_set;
  bool contains_origin = false;
};

// Closest point of conv(simplex) to the origin by enumerating every face and
// keeping the smallest valid affine projection.  Simplices here never exceed
// four points, so the 15 subsets are cheap.
SimplexProjection closest_on_simplex(const std::vector<Vec3>& simplex) {
  const int n = static_cast<int>(simplex.size());
  SimplexProjection best{Vec3::Zero(), {}, false};
  double best_norm = std::numeric_limits<double>::infinity();

  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) pts.push_back(simplex[i]);
    const int k = static_cast<int>(pts.size());

    Eigen::VectorXd lambda(k);
    if (k == 1) {
      lambda[0] = 1.0;
    } else {
      Eigen::MatrixXd e(3, k - 1);
      for (int j = 1; j < k; ++j) e.col(j - 1) = pts[j] - pts[0];
      const Eigen::MatrixXd g = e.transpose() * e;
      const double scale = g.diagonal().maxCoeff();
      if (!(scale > 0.0)) continue;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
      lu.setThreshold(1e-12);
      if (lu.rank() < k - 1) continue;
      const Eigen::VectorXd mu = lu.solve(-e.transpose() * pts[0]);
      lambda[0] = 1.0 - mu.sum();
      lambda.tail(k - 1) = mu;
    }
    if ((lambda.array() < -1e-12).any()) continue;

    Vec3 p = Vec3::Zero();
    for (int j = 0; j < k; ++j) p += lambda[j] * pts[j];
    const double norm = p.squaredNorm();
    if (norm < best_norm - 1e-30) {
      best_norm = norm;
      best.point = p;
      best.support_set = pts;
      best.contains_origin = (k == 4);
    }
  }
  return best;
}

}  // namespace

double obb_distance(const Obb& a, const Obb& b) {
  if (obb_sat(a, b).depth > 0.0) return 0.0;

  auto support = [&](const Vec3& d) -> Vec3 { return a.support(d) - b.support(-d); };
  Vec3 v = a.center - b.center;
  if (v.squaredNorm() == 0.0) return 0.0;

  std::vector<Vec3> simplex;
  for (int iter = 0; iter < 128; ++iter) {
    const Vec3 w = support(-v);
    const double vv = v.squaredNorm();
    if (vv - v.dot(w) <= 1e-13 * vv + 1e-20) break;
    if (std::any_of(simplex.begin(), simplex.end(),
                    [&](const Vec3& s) { return (s - w).squaredNorm() < 1e-24; })) {
      break;
    }
    simplex.push_back(w);
    SimplexProjection proj = closest_on_simplex(simplex);
    if (proj.contains_origin || proj.point.squaredNorm() < 1e-24) return 0.0;
    v = proj.point;
    simplex = std::move(proj.support_set);
  }
  return v.norm();
}

namespace {

using Face = std::vector<Vec3>;
using Polytope = std::vector<Face>;

Polytope box_polytope(const Obb& box) {
  const auto c = box.corners();
  // corners are indexed by (sx, sy, sz) bits: index = 4*ix + 2*iy + iz
  auto at = [&](int ix, int iy, int iz) { return c[4 * ix + 2 * iy + iz]; };
  Polytope p;
  for (int s = 0; s < 2; ++s) {
    p.push_back({at(s, 0, 0), at(s, 1, 0), at(s, 1, 1), at(s, 0, 1)});
    p.push_back({at(0, s, 0), at(1, s, 0), at(1, s, 1), at(0, s, 1)});
    p.push_back({at(0, 0, s), at(1, 0, s), at(1, 1, s), at(0, 1, s)});
  }
  return p;
}

// Keeps the half-space normal·x <= offset and closes the cut with a cap face.
Polytope clip(const Polytope& poly, const Vec3& normal, double offset, double eps) {
  Polytope out;
  std::vector<Vec3> cap;
  for (const Face& face : poly) {
    Face kept;
    const std::size_t n = face.size();
    bool on_plane = true;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& cur = face[i];
      const Vec3& nxt = face[(i + 1) % n];
      const double dc = normal.dot(cur) - offset;
      const double dn = normal.dot(nxt) - offset;
      if (dc <= eps) kept.push_back(cur);
      if (std::abs(dc) <= eps) {
        cap.push_back(cur);
      } else {
        on_plane = false;
      }
      if ((dc < -eps && dn > eps) || (dc > eps && dn < -eps)) {
        const Vec3 x = cur + (dc / (dc - dn)) * (nxt - cur);
        kept.push_back(x);
        cap.push_back(x);
      }
    }
    if (kept.size() >= 3 && !on_plane) out.push_back(std::move(kept));
  }

  std::vector<Vec3> unique;
  for (const Vec3& p : cap) {
    if (std::none_of(unique.begin(), unique.end(),
                     [&](const Vec3& q) { return (p - q).squaredNorm() <= eps * eps; })) {
      unique.push_back(p);
    }
  }
  if (unique.size() >= 3) {
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : unique) centroid += p;
    centroid /= static_cast<double>(unique.size());
    const Vec3 u = normal.unitOrthogonal();
    const Vec3 w = normal.cross(u);
    std::sort(unique.begin(), unique.end(), [&](const Vec3& p, const Vec3& q) {
      return std::atan2((p - centroid).dot(w), (p - centroid).dot(u)) <
             std::atan2((q - centroid).dot(w), (q - centroid).dot(u));
    });
    out.push_back(std::move(unique));
  }
  return out;
}

double polytope_volume(const Polytope& poly) {
  Vec3 ref = Vec3::Zero();
  std::size_t count = 0;
  for (const Face& f : poly)
    for (const Vec3& p : f) {
      ref += p;
      ++count;
    }
  if (count == 0) return 0.0;
  ref /= static_cast<double>(count);
  double vol = 0.0;
  for (const Face& f : poly) {
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
      vol += std::abs((f[0] - ref).dot((f[i] - ref).cross(f[i + 1] - ref))) / 6.0;
    }
  }
  return vol;
}

}  // namespace

double obb_intersection_volume(const Obb& a, const Obb& b) {
  const double scale = std::max(a.half_extents.maxCoeff(), b.half_extents.maxCoeff());
  const double eps = 1e-12 * scale;
  Polytope poly = box_polytope(a);
  const auto axes = b.axes();
  for (int i = 0; i < 3 && !poly.empty(); ++i) {
    for (double sign : {1.0, -1.0}) {
      const Vec3 n = sign * axes[i];
      poly = clip(poly, n, n.dot(b.center) + b.half_extents[i], eps);
      if (poly.empty()) break;
    }
  }
  const double vol = polytope_volume(poly);
  // Face-touching or sliver contacts are scored as no overlap.
  if (vol <= 1e-12 * std::min(a.volume(), b.volume())) return 0.0;
  return vol;
}

double obb_iou(const Obb& a, const Obb& b) {
  const double inter = obb_intersection_volume(a, b);
  const double uni = a.volume() + b.volume() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// 2D helpers

namespace {
double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}
}  // namespace

Polygon2 convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
              return (a - b).squaredNorm() < 1e-24;
            }),
            pts.end());
  if (pts.size() < 3) return pts;
  Polygon2 hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 1e-15) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 1e-15) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

Polygon2 clip_convex(const Polygon2& subject, const Polygon2& clip_poly) {
  Polygon2 out = subject;
  const std::size_t m = clip_poly.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Vec2& a = clip_poly[e];
    const Vec2& b = clip_poly[(e + 1) % m];
    Polygon2 in = std::move(out);
    out.clear();
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& cur = in[i];
      const Vec2& nxt = in[(i + 1) % in.size()];
      const double dc = cross2(a, b, cur);
      const double dn = cross2(a, b, nxt);
      if (dc >= 0.0) out.push_back(cur);
      if ((dc >= 0.0) != (dn >= 0.0)) out.push_back(cur + (dc / (dc - dn)) * (nxt - cur));
    }
  }
  return out;
}

double polygon_area(const Polygon2& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return std::abs(a) / 2.0;
}

double signed_distance_inside(const Polygon2& poly, const Vec2& p, int* edge_index) {
  double best = std::numeric_limits<double>::infinity();
  int best_edge = -1;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const Vec2 e = b - a;
    const double len = e.norm();
    if (len < 1e-15) continue;
    const Vec2 inward(-e.y() / len, e.x() / len);
    const double d = inward.dot(p - a);
    if (d < best) {
      best = d;
      best_edge = static_cast<int>(i);
    }
  }
  if (edge_index) *edge_index = best_edge;
  return best;
}

Polygon2 footprint(const Obb& box) {
  std::vector<Vec2> pts;
  for (const Vec3& c : box.corners()) pts.emplace_back(c.x(), c.y());
  return convex_hull(std::move(pts));
}

}  // namespace brickstack
