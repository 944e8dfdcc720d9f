#include "brpath/pathspace.hpp"

#include <algorithm>
#include <cmath>

#include "brpath/errors.hpp"

namespace brpath::path {

namespace {

constexpr double kTimeTol = 1e-12;

double time_tol(double horizon) { return kTimeTol * std::max(1.0, std::abs(horizon)); }

}  // namespace

Partition::Partition(std::vector<double> times, std::optional<double> horizon)
    : times_(std::move(times)) {
  if (times_.empty()) throw InvalidArgument("partition needs at least one time");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i]) || times_[i] < 0.0) {
      throw InvalidArgument("partition times must be finite and >= 0");
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw InvalidArgument("partition times must be strictly increasing");
    }
  }
  horizon_ = horizon.value_or(times_.back());
  if (horizon_ < times_.back()) throw InvalidArgument("partition horizon precedes its last time");
}

Partition Partition::uniform(double horizon, int steps) {
  if (!(horizon > 0.0) || steps < 1) throw InvalidArgument("uniform partition needs T > 0, steps >= 1");
  std::vector<double> t(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) t[static_cast<std::size_t>(k - 1)] = horizon * k / steps;
  t.back() = horizon;
  return Partition(std::move(t), horizon);
}

double Partition::mesh() const {
  double m = times_.front();
  for (std::size_t i = 1; i < times_.size(); ++i) m = std::max(m, times_[i] - times_[i - 1]);
  return m;
}

std::optional<std::size_t> Partition::find(double t) const {
  const double tol = time_tol(horizon_);
  auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
  if (it != times_.end() && std::abs(*it - t) <= tol) return static_cast<std::size_t>(it - times_.begin());
  return std::nullopt;
}

bool Partition::refines(const Partition& coarse) const {
  return std::all_of(coarse.times_.begin(), coarse.times_.end(),
                     [&](double t) { return find(t).has_value(); });
}

Partition refine_partition(const Partition& p, std::span<const double> insert) {
  std::vector<double> all(p.times());
  for (double t : insert) {
    if (t < 0.0 || t > p.horizon() + time_tol(p.horizon())) {
      throw InvalidArgument("inserted time outside [0, horizon]");
    }
    all.push_back(t);
  }
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double t : all) {
    if (out.empty() || t - out.back() > time_tol(p.horizon())) out.push_back(t);
  }
  return Partition(std::move(out), p.horizon());
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> SampledPath::index_of(double t) const {
  const double tol = time_tol(horizon());
  auto it = std::lower_bound(times.begin(), times.end(), t - tol);
  if (it != times.end() && std::abs(*it - t) <= tol) return static_cast<std::size_t>(it - times.begin());
  return std::nullopt;
}

Vec SampledPath::to_initial(std::size_t k, const Vec& ambient) const {
  return frames[k].columns.transpose() * ambient;
}

Vec SampledPath::from_initial(std::size_t k, const Vec& components) const {
  return frames[k].columns * components;
}

namespace {

void extend(SampledPath& path, std::span<const double> times, mc::Stream& rng) {
  const ManifoldModel& model = *path.model;
  double draws = 0.0;
  for (double t : times) {
    const double dt = t - path.times.back();
    if (dt <= time_tol(t)) continue;
    auto step = model.advance(path.frames.back(), dt, rng);
    draws += model.kind() == geo::Kind::Sphere2 ? std::ceil(model.substeps() * dt - 1e-12) : 1.0;
    path.rejections += step.rejections;
    path.times.push_back(t);
    path.points.push_back(std::move(step.end));
    path.frames.push_back(std::move(step.frame));
    path.dW.push_back(std::move(step.development));
  }
  if (draws > 0.0 && path.rejections > 1e-3 * draws) {
    throw ExcessiveRejection("cut-locus rejection rate " + std::to_string(path.rejections / draws) +
                             " exceeds 1e-3; refine the partition or the substeps");
  }
}

}  // namespace

SampledPath sample_path(const ManifoldModel& model, const Point& x0, const Partition& partition,
                        mc::Stream& rng, std::optional<Frame> initial) {
  if (!model.valid(x0, 1e-9)) throw InvalidArgument("start point is not valid for " + model.spec());
  SampledPath path;
  path.model = &model;
  path.key = rng.key();
  const std::size_t n = partition.size() + 1;
  path.times.reserve(n);
  path.points.reserve(n);
  path.frames.reserve(n);
  path.dW.reserve(n);
  path.times.push_back(0.0);
  path.points.push_back(x0);
  path.frames.push_back(initial ? *initial : model.canonical_frame(x0));
  extend(path, partition.times(), rng);
  return path;
}

SampledPath continue_path(const SampledPath& prefix, std::size_t k, std::span<const double> times,
                          mc::Stream& rng) {
  if (k >= prefix.knots()) throw InvalidArgument("continue_path: knot index out of range");
  SampledPath path;
  path.model = prefix.model;
  path.key = rng.key();
  path.times.assign(prefix.times.begin(), prefix.times.begin() + static_cast<long>(k) + 1);
  path.points.assign(prefix.points.begin(), prefix.points.begin() + static_cast<long>(k) + 1);
  path.frames.assign(prefix.frames.begin(), prefix.frames.begin() + static_cast<long>(k) + 1);
  path.dW.assign(prefix.dW.begin(), prefix.dW.begin() + static_cast<long>(k));
  const double t0 = path.times.back();
  std::vector<double> tail;
  for (double t : times) {
    if (t > t0 + time_tol(t)) tail.push_back(t);
  }
  extend(path, tail, rng);
  return path;
}

std::vector<Vec> brownian_motion_map(const SampledPath& path) {
  const int d = path.model->dimension();
  std::vector<Vec> w(path.knots(), Vec::Zero(d));
  for (std::size_t k = 1; k < path.knots(); ++k) w[k] = w[k - 1] + path.dW[k - 1];
  return w;
}

std::vector<Vec> drifted_brownian_map(const SampledPath& path) {
  std::vector<Vec> w = brownian_motion_map(path);
  const ManifoldModel& m = *path.model;
  if (m.weight_coefficient() == 0.0) return w;
  Vec drift = Vec::Zero(m.dimension());
  Vec prev = path.to_initial(0, m.weight_gradient(path.points[0]).components);
  for (std::size_t k = 1; k < path.knots(); ++k) {
    const Vec cur = path.to_initial(k, m.weight_gradient(path.points[k]).components);
    drift += 0.25 * (path.times[k] - path.times[k - 1]) * (prev + cur);
    w[k] += drift;
    prev = cur;
  }
  return w;
}

// ---------------------------------------------------------------------------

SobolevCurve::SobolevCurve(std::vector<double> knots, std::vector<Vec> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() < 2 || knots_.size() != values_.size()) {
    throw InvalidArgument("Sobolev curve needs >= 2 knots with one value each");
  }
  if (knots_.front() != 0.0 || values_.front().norm() != 0.0) {
    throw InvalidArgument("Sobolev curve must start with h(0) = 0");
  }
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i] > knots_[i - 1])) throw InvalidArgument("Sobolev knots must increase");
    if (values_[i].size() != values_[0].size()) throw InvalidArgument("Sobolev values: ragged dimension");
  }
}

SobolevCurve SobolevCurve::linear(double horizon, const Vec& v) {
  return SobolevCurve({0.0, horizon}, {Vec::Zero(v.size()), horizon * v});
}

SobolevCurve SobolevCurve::window(double a, double b, const Vec& v) {
  if (!(b > a) || a < 0.0) throw InvalidArgument("window needs 0 <= a < b");
  const Vec zero = Vec::Zero(v.size());
  if (a == 0.0) return SobolevCurve({0.0, b}, {zero, (b - a) * v});
  return SobolevCurve({0.0, a, b}, {zero, zero, (b - a) * v});
}

std::vector<SobolevCurve> SobolevCurve::basis(int dimension, double horizon, int count) {
  std::vector<SobolevCurve> out;
  for (int j = 0; j < count; ++j) {
    Vec v = Vec::Zero(dimension);
    v(j % dimension) = 1.0;
    if (j % 2 == 1 && dimension > 1) v((j + 1) % dimension) = 0.5;  // some oblique directions
    out.push_back(window(horizon * j / count, horizon * (j + 1) / count, v));
  }
  return out;
}

Vec SobolevCurve::operator()(double t) const {
  if (t <= 0.0) return values_.front();
  if (t >= knots_.back()) return values_.back();
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - knots_.begin());
  const double a = knots_[i - 1], b = knots_[i];
  const double w = (t - a) / (b - a);
  return (1.0 - w) * values_[i - 1] + w * values_[i];
}

double SobolevCurve::norm_sq() const {
  double s = 0.0;
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    s += (values_[i] - values_[i - 1]).squaredNorm() / (knots_[i] - knots_[i - 1]);
  }
  return s;
}

double ito_integral(const SobolevCurve& h, std::span<const double> times, std::span<const Vec> w) {
  if (times.size() != w.size()) throw HorizonMismatch("ito_integral: knot/value count mismatch");
  if (h.horizon() > times.back() + time_tol(times.back())) {
    throw HorizonMismatch("curve horizon " + std::to_string(h.horizon()) + " exceeds path horizon " +
                          std::to_string(times.back()));
  }
  if (static_cast<int>(w.front().size()) != h.dimension()) {
    throw HorizonMismatch("curve dimension does not match the path");
  }
  double s = 0.0;
  Vec prev = h(times[0]);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const Vec cur = h(times[k]);
    s += (cur - prev).dot(w[k] - w[k - 1]) / (times[k] - times[k - 1]);
    prev = cur;
  }
  return s;
}

double ito_integral(const SobolevCurve& h, const SampledPath& path) {
  const std::vector<Vec> w = drifted_brownian_map(path);
  return ito_integral(h, path.times, w);
}

double stratonovich_integral(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size() || y.empty()) throw HorizonMismatch("stratonovich_integral: length mismatch");
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) s += 0.5 * (y[k] + y[k - 1]) * (x[k] - x[k - 1]);
  return s;
}

double ito_sum(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size() || y.empty()) throw HorizonMismatch("ito_sum: length mismatch");
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) s += y[k - 1] * (x[k] - x[k - 1]);
  return s;
}

double radon_nikodym(const ManifoldModel& weighted, const SampledPath& path) {
  if (weighted.weight_coefficient() == 0.0) return 1.0;
  double stoch = 0.0, energy = 0.0;
  Vec prev = path.to_initial(0, weighted.weight_gradient(path.points[0]).components);
  for (std::size_t k = 1; k < path.knots(); ++k) {
    const Vec cur = path.to_initial(k, weighted.weight_gradient(path.points[k]).components);
    const double dt = path.times[k] - path.times[k - 1];
    stoch += prev.dot(path.dW[k - 1]);
    energy += 0.5 * dt * (prev.squaredNorm() + cur.squaredNorm());
    prev = cur;
  }
  return std::exp(-0.5 * stoch - 0.125 * energy);
}

// ---------------------------------------------------------------------------

KnotDevelopment develop_knots(const ManifoldModel& model, std::span<const Point> points,
                              const Frame& initial) {
  KnotDevelopment out;
  out.frames.reserve(points.size());
  out.w.reserve(points.size());
  out.frames.push_back(initial);
  out.w.push_back(Vec::Zero(model.dimension()));
  for (std::size_t k = 1; k < points.size(); ++k) {
    const Frame& f = out.frames.back();
    const Vec step = model.log_map(points[k - 1], points[k]).components;
    out.w.push_back(out.w.back() + f.columns.transpose() * step);
    out.frames.push_back(model.parallel_transport_geodesic(f, points[k]));
  }
  return out;
}

KnotDevelopment develop_knots_drifted(const ManifoldModel& model, std::span<const double> times,
                                      std::span<const Point> points, const Frame& initial) {
  if (times.size() != points.size()) throw PartitionMismatch("develop_knots_drifted: size mismatch");
  KnotDevelopment dev = develop_knots(model, points, initial);
  if (model.weight_coefficient() == 0.0) return dev;
  Vec drift = Vec::Zero(model.dimension());
  Vec prev = dev.frames[0].columns.transpose() * model.weight_gradient(points[0]).components;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const Vec cur = dev.frames[k].columns.transpose() * model.weight_gradient(points[k]).components;
    drift += 0.25 * (times[k] - times[k - 1]) * (prev + cur);
    dev.w[k] += drift;
    prev = cur;
  }
  return dev;
}

Vec knot_parallel_gradient(const ManifoldModel& model, std::span<const Point> points,
                           const Frame& initial, std::size_t first, const KnotFunctional& F,
                           double eta) {
  const int d = model.dimension();
  Vec grad = Vec::Zero(d);
  if (first >= points.size()) return grad;
  const KnotDevelopment dev = develop_knots(model, points, initial);
  std::vector<Point> moved(points.begin(), points.end());
  for (int i = 0; i < d; ++i) {
    double value[2];
    for (int side = 0; side < 2; ++side) {
      const double e = side == 0 ? eta : -eta;
      for (std::size_t j = first; j < points.size(); ++j) {
        moved[j] = model.exp_map({points[j], e * dev.frames[j].columns.col(i)});
      }
      value[side] = F(moved);
    }
    grad(i) = (value[0] - value[1]) / (2.0 * eta);
  }
  return grad;
}

}  // namespace brpath::path
