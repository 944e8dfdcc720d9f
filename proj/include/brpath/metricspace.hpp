#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brpath/errors.hpp"
#include "brpath/geometry.hpp"

namespace brpath::metric {

/// (r, theta) with theta in [0, l); the apex is r = 0, theta = 0.
struct ConePoint {
  double r = 0.0;
  double theta = 0.0;
};

/// Tangent vector at a cone point in the polar frame (e_r, e_theta).
using Vec2 = Eigen::Vector2d;

/// Cone over S^1(l) with metric dr^2 + r^2 dtheta^2. Flat away from the apex;
/// l = 2 pi is the plane.
class ConeSpace {
 public:
  explicit ConeSpace(double circumference);
  /// "cone:l=9.42477796".
  static ConeSpace parse(std::string_view spec);
  std::string spec() const;

  double circumference() const { return l_; }
  ConePoint point(double r, double theta) const;
  ConePoint apex() const { return {}; }
  bool valid(const ConePoint& p) const;

  double distance(const ConePoint& p, const ConePoint& q) const;
  /// Signed angle from p to q along the shorter arc, in [-l/2, l/2].
  double separation(const ConePoint& p, const ConePoint& q) const;
  /// The minimizing segment runs through the apex (|separation| >= pi).
  bool through_apex(const ConePoint& p, const ConePoint& q) const;
  /// Distance from the apex to the minimizing segment pq.
  double apex_clearance(const ConePoint& p, const ConePoint& q) const;

  /// Straight line from p in the sector unrolled around p.
  ConePoint exp(const ConePoint& p, const Vec2& v) const;
  /// Polar components carried along the segment p -> q (a rotation by the
  /// separation). ApexTooClose when the segment hits the apex.
  Vec2 transport(const ConePoint& p, const ConePoint& q, const Vec2& v) const;

  /// Rotation of a vector carried around a regular polygon about the apex,
  /// in (-pi, pi]. Equals 2 pi - l mod 2 pi per turn. sides = 0 picks a
  /// resolution with every side short of the apex.
  double holonomy(double radius, int sides = 0, int turns = 1) const;

 private:
  double l_;
};

/// Planar coordinates for cone points near theta_ref (l = 2 pi is the plane).
Vec2 unroll(const ConeSpace& cone, const ConePoint& p, double theta_ref);

// ---------------------------------------------------------------------------
// epsilon-parallelograms.
// ---------------------------------------------------------------------------

struct DefectReport {
  std::array<double, 4> e{};  // e_j = 2d(x_{j+1},x_j)^2 + 2d(x_j,x_{j-1})^2 - d13^2 - d24^2
  double px = 0.0;            // max{d(x1,x2), d(x3,x4)}
  double pv = 0.0;            // max{d(x1,x4), d(x2,x3)}
  double eps_min = 0.0;       // smallest eps with all five inequalities
};

/// From the six pairwise distances of (x1, x2, x3, x4).
DefectReport defect_from_distances(double d12, double d23, double d34, double d41, double d13, double d24);

template <class Space, class P>
DefectReport epsilon_parallelogram_defect(const Space& space, const std::array<P, 4>& x) {
  return defect_from_distances(space.distance(x[0], x[1]), space.distance(x[1], x[2]),
                               space.distance(x[2], x[3]), space.distance(x[3], x[0]),
                               space.distance(x[0], x[2]), space.distance(x[1], x[3]));
}

// ---------------------------------------------------------------------------
// Piecewise geodesics and parallel variations.
// ---------------------------------------------------------------------------

template <class P>
struct PiecewiseGeodesic {
  std::vector<double> times;
  std::vector<P> vertices;
};

/// V_j(t_a) for every vertex; vertices before `first` are left in place.
template <class P>
struct VariationSequence {
  std::vector<double> times;
  std::vector<P> base;
  std::vector<double> scales;
  std::vector<std::vector<P>> points;  // points[j][a]
  std::size_t first = 0;
};

/// V_j(t_a) = exp(s_j v(t_a)) with v carried along the segments from vertex
/// `first` (polar components there). Requires apex clearance 10 max s_j on
/// every moved vertex and segment unless `probe` is set.
VariationSequence<ConePoint> build_parallel_variation(const ConeSpace& cone,
                                                      const PiecewiseGeodesic<ConePoint>& geodesic,
                                                      const Vec2& direction, std::span<const double> scales,
                                                      std::size_t first = 0, bool probe = false);

/// Same on a smooth model; `direction` is in the canonical frame at vertex
/// `first`, carried by parallel_transport_geodesic.
VariationSequence<geo::Point> build_parallel_variation(const geo::ManifoldModel& model,
                                                       const PiecewiseGeodesic<geo::Point>& geodesic,
                                                       const geo::Vec& direction, std::span<const double> scales,
                                                       std::size_t first = 0, bool probe = false);

/// Per j: sup over moved vertices a, b of ||V_j(t_a)| - |V_j(t_b)|| / |V_j(t_b)|
/// with |V_j(t)| = d(gamma(t), V_j(t)).
template <class Space, class P>
std::vector<double> parallel_norm_check(const Space& space, const VariationSequence<P>& v) {
  std::vector<double> out;
  for (const auto& row : v.points) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t a = v.first; a < row.size(); ++a) {
      const double n = space.distance(v.base[a], row[a]);
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    out.push_back(lo > 0.0 ? (hi - lo) / lo : 0.0);
  }
  return out;
}

/// Defects of (gamma(t_a), gamma(t_{a+1}), V_j(t_{a+1}), V_j(t_a)) over the moved
/// segments: the worst quadruple per j and its eps / d(gamma(t_a), gamma(t_{a+1})).
struct VariationDefects {
  std::vector<DefectReport> worst;
  std::vector<double> relative;
};

template <class Space, class P>
VariationDefects variation_defects(const Space& space, const VariationSequence<P>& v) {
  VariationDefects out;
  for (const auto& row : v.points) {
    DefectReport worst;
    double rel = 0.0;
    for (std::size_t a = v.first; a + 1 < row.size(); ++a) {
      const DefectReport d = epsilon_parallelogram_defect(space, std::array<P, 4>{v.base[a], v.base[a + 1], row[a + 1], row[a]});
      const double step = space.distance(v.base[a], v.base[a + 1]);
      const double r = step > 0.0 ? d.eps_min / step : 0.0;
      if (r >= rel) {
        rel = r;
        worst = d;
      }
    }
    out.worst.push_back(worst);
    out.relative.push_back(rel);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parallel slopes via t-approximations.
// ---------------------------------------------------------------------------

/// Cylinder functional on a metric space: u evaluated at the points of the
/// curve at `times`.
template <class P>
struct MetricCylinder {
  std::vector<double> times;
  std::function<double(std::span<const P>)> u;
};

struct SlopeEstimate {
  std::vector<int> levels;        // k with mesh 2^{-k} T
  std::vector<double> values;     // max |D_V F| at each level
  std::vector<int> directions;    // directions used at each level
  double estimate = 0.0;          // value at the finest level
};

inline Vec2 unit_direction(const ConeSpace&, double angle) { return {std::cos(angle), std::sin(angle)}; }
/// Unit vector in the plane of the first two frame axes (or +-e_1 in one
/// dimension).
inline geo::Vec unit_direction(const geo::ManifoldModel& model, double angle) {
  geo::Vec v = geo::Vec::Zero(model.dimension());
  v(0) = std::cos(angle);
  if (model.dimension() > 1) v(1) = std::sin(angle);
  return v;
}

namespace detail {

template <class P>
std::size_t knot_index(const std::vector<double>& times, double t) {
  const double tol = 1e-12 * std::max(1.0, times.back());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= tol) return i;
  }
  throw PartitionMismatch("time " + std::to_string(t) + " is not a vertex of the curve");
}

}  // namespace detail

/// For each dyadic level k (mesh 2^{-k} T) the curve is replaced by its
/// t-approximation through the vertices at the level's times, the s-parallel
/// variation is built for `directions` unit directions (doubled until the max
/// moves by < 1e-3), and the largest symmetric difference quotient of F is
/// recorded. Every level time, s and F's times must be vertices of `curve`.
template <class Space, class P>
SlopeEstimate parallel_slope_estimate(const Space& space, const MetricCylinder<P>& F,
                                      const PiecewiseGeodesic<P>& curve, double s,
                                      std::span<const int> levels, int directions = 64, double step = 1e-5) {
  SlopeEstimate out;
  const double T = curve.times.back();
  for (int k : levels) {
    std::vector<double> times{0.0, s};
    const int n = 1 << k;
    for (int i = 1; i <= n; ++i) times.push_back(T * i / n);
    times.insert(times.end(), F.times.begin(), F.times.end());
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(),
                            [&](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, T); }),
                times.end());
    times.erase(std::remove_if(times.begin(), times.end(), [&](double t) { return t > T + 1e-12; }), times.end());
    PiecewiseGeodesic<P> approx;
    for (double t : times) {
      approx.times.push_back(t);
      approx.vertices.push_back(curve.vertices[detail::knot_index<P>(curve.times, t)]);
    }
    const std::size_t first = detail::knot_index<P>(approx.times, s);
    std::vector<std::size_t> fidx;
    for (double t : F.times) fidx.push_back(detail::knot_index<P>(approx.times, t));
    auto value = [&](const std::vector<P>& pts) {
      std::vector<P> y;
      for (std::size_t i : fidx) y.push_back(pts[i]);
      return F.u(y);
    };
    const std::array<double, 1> scale{step};
    auto sweep = [&](int m) {
      double best = 0.0;
      // Half the circle suffices: the difference quotient is odd in v.
      for (int i = 0; i < m; ++i) {
        const auto dir = unit_direction(space, std::numbers::pi * i / m);
        const auto plus = build_parallel_variation(space, approx, dir, scale, first);
        const auto minus = build_parallel_variation(space, approx, decltype(dir)(-dir), scale, first);
        best = std::max(best, std::abs(value(plus.points[0]) - value(minus.points[0])) / (2.0 * step));
      }
      return best;
    };
    int m = directions;
    double v = sweep(m);
    while (m < 4096) {
      const double w = sweep(2 * m);
      m *= 2;
      const bool settled = std::abs(w - v) < 1e-3;
      v = w;
      if (settled) break;
    }
    out.levels.push_back(k);
    out.values.push_back(v);
    out.directions.push_back(m);
  }
  out.estimate = out.values.empty() ? 0.0 : out.values.back();
  return out;
}

}  // namespace brpath::metric
