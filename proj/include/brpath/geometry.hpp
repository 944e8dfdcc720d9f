#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <string_view>

#include "brpath/montecarlo.hpp"

namespace brpath::geo {

/// Largest ambient dimension supported; keeps points and frames on the stack.
inline constexpr int kMaxAmbient = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;

enum class Kind { EuclideanWeighted, Circle, Sphere2 };
enum class Exactness { ExactKernel, RandomWalk };

/// Coordinates in the model chart: R^n, an angle in [0, l), or a vector of
/// length r in R^3.
struct Point {
  Vec coords;
};

/// Tangent vector in ambient components (for Sphere2 orthogonal to base).
struct TangentVector {
  Point base;
  Vec components;
};

/// Orthonormal tangent frame: ambient_dimension x dimension columns.
struct Frame {
  Point base;
  Mat columns;
};

/// Immutable model weighted space (M, g, e^{-f} dv_g) with f = kf |x|^2 / 2 on
/// the Euclidean model and f = 0 otherwise. Safe to share across threads.
class ManifoldModel {
 public:
  static ManifoldModel euclidean(int n, double kappa_f = 0.0);
  static ManifoldModel circle(double circumference);
  static ManifoldModel sphere(double radius, int substeps = 64);

  /// Parses "euclidean:n=2,kf=0", "ou:n=1,kf=1", "circle:l=6.28",
  /// "sphere2:r=1,substeps=64".
  static ManifoldModel parse(std::string_view spec);
  std::string spec() const;

  Kind kind() const { return kind_; }
  int dimension() const { return dim_; }
  int ambient_dimension() const { return kind_ == Kind::Sphere2 ? 3 : dim_; }
  Exactness exactness() const {
    return kind_ == Kind::Sphere2 ? Exactness::RandomWalk : Exactness::ExactKernel;
  }
  double weight_coefficient() const { return kappa_f_; }
  double circumference() const { return length_; }
  double radius() const { return radius_; }
  int substeps() const { return substeps_; }
  /// Cut-locus guard: log_map refuses pairs closer than this to antipodal.
  double cut_guard() const;

  /// Same geometry with the weight removed (the plain Laplacian kernel).
  ManifoldModel without_weight() const;

  Point point(Vec coords) const;
  Point origin() const;
  bool valid(const Point& x, double tol = 1e-12) const;

  double distance(const Point& x, const Point& y) const;
  Point exp_map(const TangentVector& v) const;
  TangentVector log_map(const Point& x, const Point& y) const;
  TangentVector tangent(const Point& base, Vec components) const;
  Vec project_tangent(const Point& base, const Vec& ambient) const;

  Frame canonical_frame(const Point& x) const;
  Frame parallel_transport_geodesic(const Frame& frame, const Point& target) const;
  TangentVector transport(const TangentVector& v, const Point& target) const;

  /// (Ric + Hess f)(v, v). Every implemented model has Ric + Hess f = c g.
  double bakry_emery(const TangentVector& v) const;
  double bakry_emery_constant() const;
  /// Bakry-Emery form in the components of an orthonormal frame.
  Mat bakry_emery_in_frame(const Frame& frame) const;

  double weight(const Point& x) const;
  TangentVector weight_gradient(const Point& x) const;

  /// One transition of the 1/2 Delta_f diffusion from the frame's base over
  /// time t, carrying the frame along the piecewise-geodesic path actually
  /// traversed. `development` is the anti-development increment in the
  /// components of the input frame.
  struct Step {
    Point end;
    Frame frame;
    Vec development;
    int rejections = 0;
  };
  Step advance(const Frame& frame, double t, mc::Stream& rng) const;

  Point heat_kernel_sample(const Point& x, double t, mc::Stream& rng) const;

 private:
  ManifoldModel() = default;

  double wrap_angle(double theta) const;
  double signed_arc(double from, double to) const;
  Mat sphere_rotation(const Vec& from, const Vec& to) const;

  Kind kind_ = Kind::EuclideanWeighted;
  int dim_ = 1;
  double kappa_f_ = 0.0;
  double length_ = 0.0;
  double radius_ = 1.0;
  int substeps_ = 64;
  std::string label_;  // "euclidean" or "ou"
};

// ---------------------------------------------------------------------------
// Registered analytic test functions u(x) = scale * g(z), z a chart coordinate.
// ---------------------------------------------------------------------------

enum class Family { Linear, Sin, Cos, Exp, Quadratic };

std::string_view to_string(Family f);
Family parse_family(std::string_view name);

/// z is x_axis on the Euclidean model, the angle on the circle, and the
/// ambient coordinate x_axis on the sphere. `param` is the frequency for
/// sin/cos and the rate for exp.
struct ScalarFunction {
  Family family = Family::Linear;
  int axis = 0;
  double param = 1.0;
  double scale = 1.0;

  double profile(double z) const;
  double profile_derivative(double z) const;
  double profile_second_derivative(double z) const;

  /// Throws UnsupportedFamily when the function is not well defined on the
  /// model (the circle only admits periodic sin/cos).
  void validate(const ManifoldModel& model) const;
  double value(const ManifoldModel& model, const Point& x) const;
  TangentVector gradient(const ManifoldModel& model, const Point& x) const;
  double gradient_norm_sq(const ManifoldModel& model, const Point& x) const;
  std::string describe() const;
};

/// Closed-form H_t u for the Euclidean (flat or OU) and circle models.
/// Throws UnsupportedFamily on the sphere.
std::function<double(const Point&)> heat_flow_closed_form(const ManifoldModel& model,
                                                          const ScalarFunction& u, double t);

}  // namespace brpath::geo
