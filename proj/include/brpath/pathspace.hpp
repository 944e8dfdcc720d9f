#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "brpath/geometry.hpp"
#include "brpath/montecarlo.hpp"

namespace brpath::path {

using geo::Frame;
using geo::ManifoldModel;
using geo::Point;
using geo::Vec;

/// Strictly increasing times 0 <= t_1 < ... < t_N <= horizon.
class Partition {
 public:
  Partition() = default;
  /// horizon defaults to the last time.
  explicit Partition(std::vector<double> times, std::optional<double> horizon = std::nullopt);
  static Partition uniform(double horizon, int steps);

  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  double horizon() const { return horizon_; }
  double front() const { return times_.front(); }
  double back() const { return times_.back(); }
  double mesh() const;
  /// Index of t in the partition (tolerance 1e-12 relative to horizon).
  std::optional<std::size_t> find(double t) const;
  /// True when every time of `coarse` is a time of this partition.
  bool refines(const Partition& coarse) const;

 private:
  std::vector<double> times_;
  double horizon_ = 0.0;
};

/// Sorted union; near-duplicates (1e-12) are dropped.
Partition refine_partition(const Partition& p, std::span<const double> insert);

/// One sampled path. Index 0 is the start at t = 0; index k > 0 is the k-th
/// positive partition time. frames[k] is the initial frame carried to
/// points[k]; dW[k-1] is the anti-development increment over (t_{k-1}, t_k]
/// in initial-frame components.
struct SampledPath {
  const ManifoldModel* model = nullptr;
  std::vector<double> times;
  std::vector<Point> points;
  std::vector<Frame> frames;
  std::vector<Vec> dW;
  int rejections = 0;
  mc::StreamKey key;

  std::size_t knots() const { return times.size(); }
  double horizon() const { return times.back(); }
  /// Index of time t (0 for t = 0); nullopt if t is not a knot.
  std::optional<std::size_t> index_of(double t) const;
  /// Ambient vector at points[k] expressed in initial-frame components.
  Vec to_initial(std::size_t k, const Vec& ambient) const;
  Vec from_initial(std::size_t k, const Vec& components) const;
};

/// Markov chain of heat-kernel transitions over the partition, frames carried
/// along the piecewise-geodesic path actually traversed. The model must
/// outlive the returned path.
SampledPath sample_path(const ManifoldModel& model, const Point& x0, const Partition& partition,
                        mc::Stream& rng, std::optional<Frame> initial = std::nullopt);

/// Continues `prefix` (truncated at knot k) over the remaining times of
/// `times`, drawing from rng. Used by martingale projections.
SampledPath continue_path(const SampledPath& prefix, std::size_t k, std::span<const double> times,
                          mc::Stream& rng);

/// W at every knot (W[0] = 0).
std::vector<Vec> brownian_motion_map(const SampledPath& path);
/// W^f = W + 1/2 int P grad f, trapezoidal in time. Equals W when f = 0.
std::vector<Vec> drifted_brownian_map(const SampledPath& path);

/// Piecewise-linear h : [0, horizon] -> T_{x0}M with h(0) = 0, constant after
/// the last knot.
class SobolevCurve {
 public:
  SobolevCurve(std::vector<double> knots, std::vector<Vec> values);
  /// h(t) = t v on [0, horizon].
  static SobolevCurve linear(double horizon, const Vec& v);
  /// h' = v on [a, b], zero elsewhere.
  static SobolevCurve window(double a, double b, const Vec& v);
  /// `count` window curves tiling [0, horizon], cycling through axes.
  static std::vector<SobolevCurve> basis(int dimension, double horizon, int count);

  Vec operator()(double t) const;
  double horizon() const { return knots_.back(); }
  const std::vector<double>& knots() const { return knots_; }
  int dimension() const { return static_cast<int>(values_.front().size()); }
  double norm_sq() const;

 private:
  std::vector<double> knots_;
  std::vector<Vec> values_;
};

/// Sum of <h(t_{k+1}) - h(t_k), dW^f_k> / dt_k: the left-point Ito sum with
/// h' averaged over each interval (exact when the knots of h are path knots).
double ito_integral(const SobolevCurve& h, const SampledPath& path);
double ito_integral(const SobolevCurve& h, std::span<const double> times, std::span<const Vec> w);

/// Sum of (Y_{k+1} + Y_k)/2 (X_{k+1} - X_k); HorizonMismatch on length mismatch.
double stratonovich_integral(std::span<const double> y, std::span<const double> x);
double ito_sum(std::span<const double> y, std::span<const double> x);

/// Z^T = exp(-1/2 sum <P grad f, dW> - 1/8 sum |grad f|^2 dt) for `weighted`,
/// evaluated on a path sampled from weighted.without_weight(). Reweights the
/// unweighted path law to the weighted one.
double radon_nikodym(const ManifoldModel& weighted, const SampledPath& path);

// ---------------------------------------------------------------------------
// Knot-level anti-development and parallel variations.
// ---------------------------------------------------------------------------

/// Frames and W obtained by transporting along the minimizing geodesics
/// between consecutive knots (the t-approximation of the path).
struct KnotDevelopment {
  std::vector<Frame> frames;
  std::vector<Vec> w;
};
KnotDevelopment develop_knots(const ManifoldModel& model, std::span<const Point> points,
                              const Frame& initial);
/// Same with the 1/2 int P grad f drift added (trapezoid).
KnotDevelopment develop_knots_drifted(const ManifoldModel& model, std::span<const double> times,
                                      std::span<const Point> points, const Frame& initial);

using KnotFunctional = std::function<double(std::span<const Point>)>;

/// Parallel gradient of a functional of the knot points by central
/// differences along the s-parallel variation that moves every knot with
/// index >= first by exp(eta * transported e_i). Components in the initial
/// frame.
Vec knot_parallel_gradient(const ManifoldModel& model, std::span<const Point> points,
                           const Frame& initial, std::size_t first, const KnotFunctional& F,
                           double eta = 1e-5);

}  // namespace brpath::path
