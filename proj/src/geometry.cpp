#include "brpath/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "brpath/errors.hpp"
#include "brpath/params.hpp"

namespace brpath::geo {

namespace {

constexpr double kPi = std::numbers::pi;

Vec cross3(const Vec& a, const Vec& b) {
  Vec c(3);
  c << a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0);
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------

ManifoldModel ManifoldModel::euclidean(int n, double kappa_f) {
  if (n < 1 || n > kMaxAmbient) {
    throw InvalidArgument("euclidean dimension must be in [1, " + std::to_string(kMaxAmbient) + "]");
  }
  if (!(kappa_f >= 0.0)) throw InvalidArgument("weight coefficient kf must be >= 0");
  ManifoldModel m;
  m.kind_ = Kind::EuclideanWeighted;
  m.dim_ = n;
  m.kappa_f_ = kappa_f;
  m.label_ = kappa_f > 0.0 ? "ou" : "euclidean";
  return m;
}

ManifoldModel ManifoldModel::circle(double circumference) {
  if (!(circumference > 0.0)) throw InvalidArgument("circle circumference must be > 0");
  ManifoldModel m;
  m.kind_ = Kind::Circle;
  m.dim_ = 1;
  m.length_ = circumference;
  m.label_ = "circle";
  return m;
}

ManifoldModel ManifoldModel::sphere(double radius, int substeps) {
  if (!(radius > 0.0)) throw InvalidArgument("sphere radius must be > 0");
  if (substeps < 1) throw InvalidArgument("sphere substeps must be >= 1");
  ManifoldModel m;
  m.kind_ = Kind::Sphere2;
  m.dim_ = 2;
  m.radius_ = radius;
  m.substeps_ = substeps;
  m.label_ = "sphere2";
  return m;
}

ManifoldModel ManifoldModel::parse(std::string_view spec) {
  const std::size_t colon = spec.find(':');
  const std::string name(spec.substr(0, colon));
  const auto kv = colon == std::string_view::npos ? std::map<std::string, std::string>{}
                                                  : parse_params(spec.substr(colon + 1), spec);
  auto take = [&](const char* key, auto fallback, auto convert) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : convert(it->second, key);
  };
  auto check_keys = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : kv) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) throw InvalidArgument("model '" + name + "': unknown parameter '" + k + "'");
    }
  };
  if (name == "euclidean" || name == "ou") {
    check_keys({"n", "kf"});
    const int n = take("n", 1, parse_int);
    const double kf = take("kf", name == "ou" ? 1.0 : 0.0, parse_double);
    ManifoldModel m = euclidean(n, kf);
    m.label_ = name;
    return m;
  }
  if (name == "circle") {
    check_keys({"l"});
    return circle(take("l", 2.0 * kPi, parse_double));
  }
  if (name == "sphere2") {
    check_keys({"r", "substeps"});
    return sphere(take("r", 1.0, parse_double), take("substeps", 64, parse_int));
  }
  throw InvalidArgument("unknown model '" + name + "'");
}

std::string ManifoldModel::spec() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::EuclideanWeighted: os << label_ << ":n=" << dim_ << ",kf=" << kappa_f_; break;
    case Kind::Circle: os << "circle:l=" << length_; break;
    case Kind::Sphere2: os << "sphere2:r=" << radius_ << ",substeps=" << substeps_; break;
  }
  return os.str();
}

double ManifoldModel::cut_guard() const {
  return kind_ == Kind::Sphere2 ? 1e-6 * kPi * radius_ : 0.0;
}

ManifoldModel ManifoldModel::without_weight() const {
  ManifoldModel m = *this;
  if (kind_ == Kind::EuclideanWeighted) {
    m.kappa_f_ = 0.0;
    m.label_ = "euclidean";
  }
  return m;
}

double ManifoldModel::wrap_angle(double theta) const {
  double w = std::fmod(theta, length_);
  if (w < 0.0) w += length_;
  if (w >= length_) w = 0.0;
  return w;
}

double ManifoldModel::signed_arc(double from, double to) const {
  double d = std::fmod(to - from, length_);
  if (d > 0.5 * length_) d -= length_;
  if (d <= -0.5 * length_) d += length_;
  return d;
}

Point ManifoldModel::point(Vec coords) const {
  if (coords.size() != ambient_dimension()) {
    throw InvalidArgument("point has " + std::to_string(coords.size()) + " coordinates, model needs " +
                          std::to_string(ambient_dimension()));
  }
  switch (kind_) {
    case Kind::Circle: coords(0) = wrap_angle(coords(0)); break;
    case Kind::Sphere2: {
      const double n = coords.norm();
      if (!(n > 0.0)) throw InvalidArgument("sphere point must be nonzero");
      coords *= radius_ / n;
      break;
    }
    case Kind::EuclideanWeighted: break;
  }
  return Point{std::move(coords)};
}

Point ManifoldModel::origin() const {
  Vec c = Vec::Zero(ambient_dimension());
  if (kind_ == Kind::Sphere2) c(2) = radius_;
  return Point{c};
}

bool ManifoldModel::valid(const Point& x, double tol) const {
  if (x.coords.size() != ambient_dimension() || !x.coords.allFinite()) return false;
  switch (kind_) {
    case Kind::Circle: return x.coords(0) >= 0.0 && x.coords(0) < length_;
    case Kind::Sphere2: return std::abs(x.coords.norm() - radius_) <= tol * radius_;
    case Kind::EuclideanWeighted: return true;
  }
  return false;
}

double ManifoldModel::distance(const Point& x, const Point& y) const {
  switch (kind_) {
    case Kind::EuclideanWeighted: return (y.coords - x.coords).norm();
    case Kind::Circle: return std::abs(signed_arc(x.coords(0), y.coords(0)));
    case Kind::Sphere2: {
      const double s = cross3(x.coords, y.coords).norm();
      const double c = x.coords.dot(y.coords);
      return radius_ * std::atan2(s, c);
    }
  }
  return 0.0;
}

Vec ManifoldModel::project_tangent(const Point& base, const Vec& ambient) const {
  if (kind_ != Kind::Sphere2) return ambient;
  const Vec n = base.coords / radius_;
  return ambient - n * n.dot(ambient);
}

TangentVector ManifoldModel::tangent(const Point& base, Vec components) const {
  if (components.size() != ambient_dimension()) {
    throw InvalidArgument("tangent vector has wrong number of components");
  }
  return TangentVector{base, project_tangent(base, components)};
}

Point ManifoldModel::exp_map(const TangentVector& v) const {
  switch (kind_) {
    case Kind::EuclideanWeighted: return Point{v.base.coords + v.components};
    case Kind::Circle: {
      Vec c(1);
      c(0) = wrap_angle(v.base.coords(0) + v.components(0));
      return Point{c};
    }
    case Kind::Sphere2: {
      const Vec w = project_tangent(v.base, v.components);
      const double len = w.norm();
      if (len == 0.0) return v.base;
      const double angle = len / radius_;
      Vec y = std::cos(angle) * v.base.coords + (radius_ * std::sin(angle) / len) * w;
      y *= radius_ / y.norm();
      return Point{y};
    }
  }
  return v.base;
}

TangentVector ManifoldModel::log_map(const Point& x, const Point& y) const {
  switch (kind_) {
    case Kind::EuclideanWeighted: return TangentVector{x, y.coords - x.coords};
    case Kind::Circle: {
      Vec c(1);
      c(0) = signed_arc(x.coords(0), y.coords(0));
      return TangentVector{x, c};
    }
    case Kind::Sphere2: {
      const double d = distance(x, y);
      if (d >= kPi * radius_ - cut_guard()) {
        throw CutLocus("points are within the cut-locus guard (distance " + std::to_string(d) + ")");
      }
      Vec w = y.coords - (x.coords.dot(y.coords) / (radius_ * radius_)) * x.coords;
      const double wn = w.norm();
      if (wn == 0.0 || d == 0.0) return TangentVector{x, Vec::Zero(3)};
      return TangentVector{x, (d / wn) * w};
    }
  }
  return TangentVector{x, Vec::Zero(ambient_dimension())};
}

Frame ManifoldModel::canonical_frame(const Point& x) const {
  switch (kind_) {
    case Kind::EuclideanWeighted:
    case Kind::Circle: return Frame{x, Mat::Identity(dim_, dim_)};
    case Kind::Sphere2: {
      const Vec n = x.coords / radius_;
      Vec east(3);
      east << -n(1), n(0), 0.0;  // z-axis cross n
      if (east.norm() < 1e-8) {
        // Polar fallback: project the x-axis.
        Vec ex = Vec::Zero(3);
        ex(0) = 1.0;
        east = ex - n * n.dot(ex);
      }
      east.normalize();
      Mat cols(3, 2);
      cols.col(0) = east;
      cols.col(1) = cross3(n, east);
      return Frame{x, cols};
    }
  }
  return Frame{x, Mat::Identity(dim_, dim_)};
}

Mat ManifoldModel::sphere_rotation(const Vec& from, const Vec& to) const {
  const Vec axis = cross3(from, to);
  const double r2 = radius_ * radius_;
  const double s = axis.norm() / r2;
  const double c = from.dot(to) / r2;
  Mat rot = Mat::Identity(3, 3);
  if (s == 0.0) {
    if (c < 0.0) throw CutLocus("antipodal transport is undefined");
    return rot;
  }
  const Vec k = axis / axis.norm();
  Mat kx(3, 3);
  kx << 0.0, -k(2), k(1), k(2), 0.0, -k(0), -k(1), k(0), 0.0;
  rot += s * kx + (1.0 - c) * kx * kx;
  return rot;
}

Frame ManifoldModel::parallel_transport_geodesic(const Frame& frame, const Point& target) const {
  if (kind_ != Kind::Sphere2) return Frame{target, frame.columns};
  if (distance(frame.base, target) >= kPi * radius_ - cut_guard()) {
    throw CutLocus("transport target within the cut-locus guard");
  }
  return Frame{target, sphere_rotation(frame.base.coords, target.coords) * frame.columns};
}

TangentVector ManifoldModel::transport(const TangentVector& v, const Point& target) const {
  if (kind_ != Kind::Sphere2) return TangentVector{target, v.components};
  if (distance(v.base, target) >= kPi * radius_ - cut_guard()) {
    throw CutLocus("transport target within the cut-locus guard");
  }
  return TangentVector{target, sphere_rotation(v.base.coords, target.coords) * v.components};
}

double ManifoldModel::bakry_emery_constant() const {
  switch (kind_) {
    case Kind::EuclideanWeighted: return kappa_f_;
    case Kind::Circle: return 0.0;
    case Kind::Sphere2: return 1.0 / (radius_ * radius_);  // Ric = (n-1) g / r^2, n = 2
  }
  return 0.0;
}

double ManifoldModel::bakry_emery(const TangentVector& v) const {
  return bakry_emery_constant() * v.components.squaredNorm();
}

Mat ManifoldModel::bakry_emery_in_frame(const Frame& frame) const {
  return bakry_emery_constant() * Mat::Identity(frame.columns.cols(), frame.columns.cols());
}

double ManifoldModel::weight(const Point& x) const {
  return kind_ == Kind::EuclideanWeighted ? 0.5 * kappa_f_ * x.coords.squaredNorm() : 0.0;
}

TangentVector ManifoldModel::weight_gradient(const Point& x) const {
  if (kind_ == Kind::EuclideanWeighted) return TangentVector{x, kappa_f_ * x.coords};
  return TangentVector{x, Vec::Zero(ambient_dimension())};
}

ManifoldModel::Step ManifoldModel::advance(const Frame& frame, double t, mc::Stream& rng) const {
  if (!(t > 0.0)) throw NonPositiveTime("transition time must be > 0, got " + std::to_string(t));
  Step step;
  switch (kind_) {
    case Kind::EuclideanWeighted: {
      Vec y(dim_);
      if (kappa_f_ > 0.0) {
        const double decay = std::exp(-0.5 * kappa_f_ * t);
        const double sd = std::sqrt(-std::expm1(-kappa_f_ * t) / kappa_f_);
        for (int i = 0; i < dim_; ++i) y(i) = decay * frame.base.coords(i) + sd * rng.normal();
      } else {
        const double sd = std::sqrt(t);
        for (int i = 0; i < dim_; ++i) y(i) = frame.base.coords(i) + sd * rng.normal();
      }
      step.development = frame.columns.transpose() * (y - frame.base.coords);
      step.end = Point{y};
      step.frame = Frame{step.end, frame.columns};
      return step;
    }
    case Kind::Circle: {
      const double delta = std::sqrt(t) * rng.normal();
      Vec y(1);
      y(0) = wrap_angle(frame.base.coords(0) + delta);
      step.end = Point{y};
      step.frame = Frame{step.end, frame.columns};
      step.development = Vec::Constant(1, delta * frame.columns(0, 0));
      return step;
    }
    case Kind::Sphere2: {
      const int m = std::max(1, static_cast<int>(std::ceil(substeps_ * t - 1e-12)));
      const double sd = std::sqrt(t / m);
      const double limit = kPi * radius_ - cut_guard();
      Frame cur = frame;
      Vec dev = Vec::Zero(2);
      for (int k = 0; k < m; ++k) {
        double z1 = 0.0, z2 = 0.0;
        int consecutive = 0;
        for (;;) {
          z1 = sd * rng.normal();
          z2 = sd * rng.normal();
          if (std::hypot(z1, z2) < limit) break;
          ++step.rejections;
          if (++consecutive >= 100) {
            throw ExcessiveRejection("geodesic random walk step keeps landing in the cut locus");
          }
        }
        const Vec v = z1 * cur.columns.col(0) + z2 * cur.columns.col(1);
        const Point y = exp_map(TangentVector{cur.base, v});
        cur = Frame{y, sphere_rotation(cur.base.coords, y.coords) * cur.columns};
        dev(0) += z1;
        dev(1) += z2;
      }
      step.end = cur.base;
      step.frame = std::move(cur);
      step.development = dev;
      return step;
    }
  }
  return step;
}

Point ManifoldModel::heat_kernel_sample(const Point& x, double t, mc::Stream& rng) const {
  return advance(canonical_frame(x), t, rng).end;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Linear: return "linear";
    case Family::Sin: return "sin";
    case Family::Cos: return "cos";
    case Family::Exp: return "exp";
    case Family::Quadratic: return "quad";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "linear") return Family::Linear;
  if (name == "sin") return Family::Sin;
  if (name == "cos") return Family::Cos;
  if (name == "exp") return Family::Exp;
  if (name == "quad" || name == "quadratic") return Family::Quadratic;
  throw UnsupportedFamily("unknown function family '" + std::string(name) + "'");
}

double ScalarFunction::profile(double z) const {
  switch (family) {
    case Family::Linear: return scale * z;
    case Family::Sin: return scale * std::sin(param * z);
    case Family::Cos: return scale * std::cos(param * z);
    case Family::Exp: return scale * std::exp(param * z);
    case Family::Quadratic: return scale * z * z;
  }
  return 0.0;
}

double ScalarFunction::profile_derivative(double z) const {
  switch (family) {
    case Family::Linear: return scale;
    case Family::Sin: return scale * param * std::cos(param * z);
    case Family::Cos: return -scale * param * std::sin(param * z);
    case Family::Exp: return scale * param * std::exp(param * z);
    case Family::Quadratic: return 2.0 * scale * z;
  }
  return 0.0;
}

double ScalarFunction::profile_second_derivative(double z) const {
  switch (family) {
    case Family::Linear: return 0.0;
    case Family::Sin: return -scale * param * param * std::sin(param * z);
    case Family::Cos: return -scale * param * param * std::cos(param * z);
    case Family::Exp: return scale * param * param * std::exp(param * z);
    case Family::Quadratic: return 2.0 * scale;
  }
  return 0.0;
}

void ScalarFunction::validate(const ManifoldModel& model) const {
  if (axis < 0 || axis >= model.ambient_dimension()) {
    throw UnsupportedFamily(describe() + ": axis out of range for " + model.spec());
  }
  if (model.kind() == Kind::Circle) {
    if (family != Family::Sin && family != Family::Cos) {
      throw UnsupportedFamily(describe() + ": only periodic sin/cos are defined on the circle");
    }
    const double cycles = param * model.circumference() / (2.0 * kPi);
    if (std::abs(cycles - std::round(cycles)) > 1e-9) {
      throw UnsupportedFamily(describe() + ": frequency is not periodic on the circle");
    }
  }
}

double ScalarFunction::value(const ManifoldModel&, const Point& x) const {
  return profile(x.coords(axis));
}

TangentVector ScalarFunction::gradient(const ManifoldModel& model, const Point& x) const {
  Vec g = Vec::Zero(model.ambient_dimension());
  g(axis) = profile_derivative(x.coords(axis));
  return TangentVector{x, model.project_tangent(x, g)};
}

double ScalarFunction::gradient_norm_sq(const ManifoldModel& model, const Point& x) const {
  return gradient(model, x).components.squaredNorm();
}

std::string ScalarFunction::describe() const {
  std::ostringstream os;
  os << to_string(family) << "[axis=" << axis;
  if (family != Family::Linear && family != Family::Quadratic) os << ",w=" << param;
  if (scale != 1.0) os << ",c=" << scale;
  os << "]";
  return os.str();
}

std::function<double(const Point&)> heat_flow_closed_form(const ManifoldModel& model,
                                                          const ScalarFunction& u, double t) {
  u.validate(model);
  if (t < 0.0) throw NonPositiveTime("heat flow time must be >= 0");
  if (model.kind() == Kind::Sphere2) {
    throw UnsupportedFamily("no closed-form heat flow on the sphere; use Monte Carlo");
  }
  if (model.kind() == Kind::Circle) {
    const double damp = std::exp(-0.5 * u.param * u.param * t);
    return [u, damp](const Point& x) { return damp * u.profile(x.coords(0)); };
  }
  // z_t = decay * z + sd * N(0,1) on the Euclidean and OU models.
  const double kf = model.weight_coefficient();
  const double decay = kf > 0.0 ? std::exp(-0.5 * kf * t) : 1.0;
  const double var = kf > 0.0 ? -std::expm1(-kf * t) / kf : t;
  return [u, decay, var](const Point& x) {
    const double m = decay * x.coords(u.axis);
    switch (u.family) {
      case Family::Linear: return u.scale * m;
      case Family::Sin: return u.scale * std::exp(-0.5 * u.param * u.param * var) * std::sin(u.param * m);
      case Family::Cos: return u.scale * std::exp(-0.5 * u.param * u.param * var) * std::cos(u.param * m);
      case Family::Exp: return u.scale * std::exp(u.param * m + 0.5 * u.param * u.param * var);
      case Family::Quadratic: return u.scale * (m * m + var);
    }
    return 0.0;
  };
}

}  // namespace brpath::geo
