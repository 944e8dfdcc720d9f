#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brpath/geometry.hpp"
#include "brpath/montecarlo.hpp"
#include "brpath/pathspace.hpp"

namespace brpath::cyl {

using geo::ManifoldModel;
using geo::Mat;
using geo::Point;
using geo::ScalarFunction;
using geo::Vec;
using path::Partition;
using path::SampledPath;

/// F = u(gamma(t_1), ..., gamma(t_N)). Built either from sums of products of
/// registered scalar functions (analytic gradients) or from a raw callback
/// (central differences with step 1e-4 (1 + |y|)).
class CylinderFunction {
 public:
  struct Factor {
    ScalarFunction f;
    std::size_t knot = 0;
  };
  struct Term {
    double coefficient = 1.0;
    std::vector<Factor> factors;  // empty: constant term
  };
  using Callback = std::function<double(std::span<const Point>)>;

  CylinderFunction(Partition times, std::vector<Term> terms, std::string name);
  CylinderFunction(Partition times, Callback u, std::string name);

  static CylinderFunction constant(double c, double t = 1.0);
  /// F(gamma) = u(gamma(t)).
  static CylinderFunction single(const ScalarFunction& u, double t);
  static CylinderFunction twopoint(const ScalarFunction& u1, double t1, const ScalarFunction& u2, double t2);
  /// Random sum of single-time terms at 2-3 knots in (0, horizon] plus one
  /// cross product, with families admissible on `model`.
  static CylinderFunction random(const ManifoldModel& model, double horizon, mc::Stream& rng);
  /// Registry: "const:c=2,t=1", "linear:t=1,axis=0", "sin:t=2,axis=0,w=1,c=1",
  /// "twopoint:t1=0.5,t2=1,f1=sin,f2=linear,axis=0,w=1".
  static CylinderFunction parse(std::string_view spec);

  CylinderFunction operator*(const CylinderFunction& other) const;
  CylinderFunction scaled(double c) const;

  const Partition& partition() const { return times_; }
  const std::string& name() const { return name_; }
  double horizon() const { return times_.back(); }
  bool analytic() const { return !callback_; }
  /// The (u, t) pair when F = u(gamma(t)) for a registered u.
  std::optional<std::pair<ScalarFunction, double>> single_time() const;
  void validate(const ManifoldModel& model) const;

  double value(std::span<const Point> y) const;
  /// Tangent gradient of u in its j-th argument (ambient components).
  Vec gradient(const ManifoldModel& model, std::span<const Point> y, std::size_t j) const;
  /// Central-difference gradient along the canonical frame at y_j.
  Vec gradient_fd(const ManifoldModel& model, std::span<const Point> y, std::size_t j) const;

 private:
  Partition times_;
  std::vector<Term> terms_;
  Callback callback_;
  std::string name_;
};

/// Points of the path at F's times; PartitionMismatch if a time is missing.
std::vector<Point> marginals(const CylinderFunction& F, const SampledPath& path);
std::vector<std::size_t> knot_indices(const CylinderFunction& F, const SampledPath& path);

double evaluate(const CylinderFunction& F, const SampledPath& path);

/// Piecewise-constant s -> grad_s F in initial-frame components:
/// grad[j] holds the value for s in (t_{j-1}, t_j] (grad[0] for s <= t_1).
struct ParallelProfile {
  std::vector<double> times;
  std::vector<Vec> grad;
  /// grad_s F at time s (zero past the last knot).
  Vec at(double s) const;
  /// grad_0 F.
  const Vec& initial() const { return grad.front(); }
};
ParallelProfile parallel_profile(const CylinderFunction& F, const SampledPath& path);
Vec parallel_gradient(const CylinderFunction& F, const SampledPath& path, double s);

/// Sum_j (t_j - t_{j-1}) |grad_{t_j} F|^2.
double h1_norm_sq(const ParallelProfile& p);
double h1_norm_sq(const CylinderFunction& F, const SampledPath& path);

/// Sample of F over n paths from x on F's own partition.
mc::SampledEstimate pushforward_samples(const CylinderFunction& F, const ManifoldModel& model,
                                        const Point& x, std::size_t n_paths, const mc::StreamKey& key);
mc::Estimate pushforward_mean(const CylinderFunction& F, const ManifoldModel& model, const Point& x,
                              std::size_t n_paths, const mc::StreamKey& key);

/// phi' = 1/2 P(Ric + Hess f)P^{-1} phi, phi(0) = I, by RK4 at the given
/// times (step <= 1/256); phi[0] at t = 0.
std::vector<Mat> phi_flow(const ManifoldModel& model, std::span<const double> times);
/// The damped flow Q' = -1/2 P(Ric + Hess f)P^{-1} Q, Q(0) = I.
std::vector<Mat> damped_flow(const ManifoldModel& model, std::span<const double> times);

/// Per-path gradient samples in initial-frame components.
struct GradientSample {
  Vec mean;
  Vec se;
  std::size_t count = 0;
  std::vector<Vec> samples;
  /// Paired linearization of |mean|: u^T g_i with u = mean / |mean|.
  mc::SampledEstimate norm() const;
  /// Paired linearization of |mean|^2: 2 mean^T g_i - |mean|^2.
  mc::SampledEstimate norm_sq() const;
};

/// grad_x int F dGamma_x = E[grad_0 F + sum_j (Q_{t_j} - Q_{t_{j-1}}) grad_{t_j} F].
/// Paths are drawn from `key` with the path index as counter, so the same key
/// reproduces the same outer paths used by other estimators.
GradientSample pushforward_gradient_bismut(const CylinderFunction& F, const ManifoldModel& model,
                                           const Point& x, std::size_t n_paths, const mc::StreamKey& key);

/// Central difference of pushforward_mean along `direction` (ambient tangent
/// at x) with common random numbers and frames transported from x.
mc::SampledEstimate pushforward_gradient_fd(const CylinderFunction& F, const ManifoldModel& model,
                                            const Point& x, const Vec& direction, double step,
                                            std::size_t n_paths, const mc::StreamKey& key);

/// Delta_f of x -> int F dGamma_x by second differences along the canonical
/// frame at x, common random numbers across the 2n+1 starts.
mc::SampledEstimate pushforward_laplacian(const CylinderFunction& F, const ManifoldModel& model,
                                          const Point& x, double step, std::size_t n_paths,
                                          const mc::StreamKey& key);

/// R2/R3 weights: w_j = e^{kappa t_j/2} - e^{kappa t_{j-1}/2} (t_0 = 0).
std::vector<double> curvature_weights(double kappa, std::span<const double> times);

}  // namespace brpath::cyl
