#include "brpath/metricspace.hpp"

#include "brpath/params.hpp"

namespace brpath::metric {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_pi(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

Eigen::Matrix2d rotation(double a) {
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

/// Distance from the origin to the planar segment [a, b].
double segment_clearance(const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return a.norm();
  const double s = std::clamp(-a.dot(d) / len2, 0.0, 1.0);
  return (a + s * d).norm();
}

}  // namespace

ConeSpace::ConeSpace(double circumference) : l_(circumference) {
  if (!(circumference > 0.0) || !std::isfinite(circumference)) {
    throw InvalidArgument("cone circumference must be positive and finite");
  }
}

ConeSpace ConeSpace::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (spec.substr(0, colon) != "cone") throw InvalidArgument("not a cone model: " + std::string(spec));
  const auto params = parse_params(colon == std::string_view::npos ? "" : spec.substr(colon + 1), "cone");
  double l = 2.0 * kPi;
  for (const auto& [k, v] : params) {
    if (k == "l") {
      l = parse_double(v, "cone l");
    } else {
      throw InvalidArgument("unknown cone parameter '" + k + "'");
    }
  }
  return ConeSpace(l);
}

std::string ConeSpace::spec() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "cone:l=%.10g", l_);
  return buf;
}

ConePoint ConeSpace::point(double r, double theta) const {
  if (!(r >= 0.0) || !std::isfinite(r) || !std::isfinite(theta)) {
    throw InvalidArgument("cone point needs finite r >= 0 and finite theta");
  }
  if (r == 0.0) return {};
  double t = std::fmod(theta, l_);
  if (t < 0.0) t += l_;
  if (t >= l_) t = 0.0;
  return {r, t};
}

bool ConeSpace::valid(const ConePoint& p) const {
  if (!(p.r >= 0.0) || !std::isfinite(p.r)) return false;
  if (p.r == 0.0) return p.theta == 0.0;
  return p.theta >= 0.0 && p.theta < l_;
}

double ConeSpace::separation(const ConePoint& p, const ConePoint& q) const {
  return std::remainder(q.theta - p.theta, l_);
}

bool ConeSpace::through_apex(const ConePoint& p, const ConePoint& q) const {
  return p.r == 0.0 || q.r == 0.0 || std::abs(separation(p, q)) >= kPi;
}

double ConeSpace::distance(const ConePoint& p, const ConePoint& q) const {
  if (through_apex(p, q)) return p.r + q.r;
  const double c = std::cos(separation(p, q));
  return std::sqrt(std::max(0.0, p.r * p.r + q.r * q.r - 2.0 * p.r * q.r * c));
}

double ConeSpace::apex_clearance(const ConePoint& p, const ConePoint& q) const {
  if (through_apex(p, q)) return 0.0;
  return segment_clearance(Vec2(p.r, 0.0), q.r * Vec2(std::cos(separation(p, q)), std::sin(separation(p, q))));
}

ConePoint ConeSpace::exp(const ConePoint& p, const Vec2& v) const {
  if (p.r == 0.0) throw ApexTooClose("exp is not defined at the apex");
  const Vec2 a(p.r, 0.0), b = a + v;
  if (segment_clearance(a, b) == 0.0) throw ApexTooClose("segment hits the apex");
  return point(b.norm(), p.theta + std::atan2(b.y(), b.x()));
}

Vec2 ConeSpace::transport(const ConePoint& p, const ConePoint& q, const Vec2& v) const {
  if (through_apex(p, q)) throw ApexTooClose("transport along a segment through the apex");
  return rotation(-separation(p, q)) * v;
}

double ConeSpace::holonomy(double radius, int sides, int turns) const {
  if (!(radius > 0.0)) throw InvalidArgument("holonomy radius must be > 0");
  if (turns < 1) throw InvalidArgument("holonomy needs at least one turn");
  const int minimum = static_cast<int>(std::floor(l_ / kPi)) + 1;
  if (sides == 0) sides = std::max(8, 4 * minimum);
  if (sides < std::max(3, minimum)) {
    throw InvalidArgument("polygon sides must exceed l / pi so no side crosses the apex");
  }
  Vec2 v(1.0, 0.0);
  ConePoint p = point(radius, 0.0);
  for (int k = 1; k <= sides * turns; ++k) {
    const ConePoint q = point(radius, l_ * k / sides);
    v = transport(p, q, v);
    p = q;
  }
  return wrap_pi(std::atan2(v.y(), v.x()));
}

Vec2 unroll(const ConeSpace& cone, const ConePoint& p, double theta_ref) {
  const double a = std::remainder(p.theta - theta_ref, cone.circumference());
  return p.r * Vec2(std::cos(a), std::sin(a));
}

DefectReport defect_from_distances(double d12, double d23, double d34, double d41, double d13, double d24) {
  DefectReport r;
  // Sides d(x_{j+1}, x_j) with x_0 = x_4 and x_5 = x_1.
  const std::array<double, 4> side{d12, d23, d34, d41};
  const double diag = d13 * d13 + d24 * d24;
  for (int j = 0; j < 4; ++j) {
    const double next = side[j], prev = side[(j + 3) % 4];
    r.e[j] = 2.0 * next * next + 2.0 * prev * prev - diag;
  }
  r.px = std::max(d12, d34);
  r.pv = std::max(d41, d23);
  if (r.pv == 0.0) return r;
  auto ratio = [](double num, double den) {
    if (num == 0.0) return 0.0;
    return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
  };
  const auto& e = r.e;
  const double pv2 = r.pv * r.pv, pxv = r.px * r.pv;
  r.eps_min = std::max({ratio(std::abs(e[0] + e[1]), pxv), ratio(std::abs(e[2] + e[3]), pxv),
                        ratio(std::abs(e[1] - e[0]), pv2), ratio(std::abs(e[3] - e[2]), pv2),
                        ratio(std::max(std::abs(e[0] + e[2]), std::abs(e[1] + e[3])), pv2)});
  return r;
}

VariationSequence<ConePoint> build_parallel_variation(const ConeSpace& cone,
                                                      const PiecewiseGeodesic<ConePoint>& geodesic,
                                                      const Vec2& direction, std::span<const double> scales,
                                                      std::size_t first, bool probe) {
  const auto& x = geodesic.vertices;
  if (x.size() != geodesic.times.size() || x.empty()) {
    throw InvalidArgument("piecewise geodesic needs one vertex per time");
  }
  if (first >= x.size()) throw InvalidArgument("variation start beyond the last vertex");
  VariationSequence<ConePoint> out{geodesic.times, x, {scales.begin(), scales.end()}, {}, first};
  const double smax = scales.empty() ? 0.0 : *std::max_element(scales.begin(), scales.end());
  if (!probe) {
    for (std::size_t a = first; a < x.size(); ++a) {
      if (x[a].r < 10.0 * smax) throw ApexTooClose("vertex within 10 max scale of the apex");
      if (a + 1 < x.size() && cone.apex_clearance(x[a], x[a + 1]) < 10.0 * smax) {
        throw ApexTooClose("segment within 10 max scale of the apex");
      }
    }
  }
  std::vector<Vec2> v(x.size(), Vec2::Zero());
  v[first] = direction;
  for (std::size_t a = first + 1; a < x.size(); ++a) {
    // Through the apex (probe mode only) the radial frame flips.
    v[a] = cone.through_apex(x[a - 1], x[a]) ? Vec2(-v[a - 1].x(), v[a - 1].y())
                                             : cone.transport(x[a - 1], x[a], v[a - 1]);
  }
  for (double s : scales) {
    std::vector<ConePoint> row = x;
    for (std::size_t a = first; a < x.size(); ++a) {
      row[a] = x[a].r == 0.0 ? cone.point(s * v[a].norm(), 0.0) : cone.exp(x[a], s * v[a]);
    }
    out.points.push_back(std::move(row));
  }
  return out;
}

VariationSequence<geo::Point> build_parallel_variation(const geo::ManifoldModel& model,
                                                       const PiecewiseGeodesic<geo::Point>& geodesic,
                                                       const geo::Vec& direction, std::span<const double> scales,
                                                       std::size_t first, bool /*probe*/) {
  const auto& x = geodesic.vertices;
  if (x.size() != geodesic.times.size() || x.empty()) {
    throw InvalidArgument("piecewise geodesic needs one vertex per time");
  }
  if (first >= x.size()) throw InvalidArgument("variation start beyond the last vertex");
  if (direction.size() != model.dimension()) throw InvalidArgument("direction has the wrong dimension");
  VariationSequence<geo::Point> out{geodesic.times, x, {scales.begin(), scales.end()}, {}, first};
  std::vector<geo::Frame> frames(x.size());
  frames[first] = model.canonical_frame(x[first]);
  for (std::size_t a = first + 1; a < x.size(); ++a) {
    frames[a] = model.parallel_transport_geodesic(frames[a - 1], x[a]);
  }
  for (double s : scales) {
    std::vector<geo::Point> row = x;
    for (std::size_t a = first; a < x.size(); ++a) {
      row[a] = model.exp_map({x[a], frames[a].columns * (s * direction)});
    }
    out.points.push_back(std::move(row));
  }
  return out;
}

}  // namespace brpath::metric
