#include "brpath/cylinder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "brpath/errors.hpp"
#include "brpath/parallel.hpp"
#include "brpath/params.hpp"

namespace brpath::cyl {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::size_t add_time(std::vector<double>& times, double t) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (std::abs(times[i] - t) <= 1e-12 * std::max(1.0, t)) return i;
  }
  times.push_back(t);
  return times.size() - 1;
}

/// Sorts the times and remaps the factor knots accordingly.
Partition normalize(std::vector<double> times, std::vector<CylinderFunction::Term>& terms) {
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  std::vector<std::size_t> rank(times.size());
  std::vector<double> sorted(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    rank[order[i]] = i;
    sorted[i] = times[order[i]];
  }
  for (auto& term : terms) {
    for (auto& f : term.factors) f.knot = rank[f.knot];
  }
  return Partition(std::move(sorted));
}

}  // namespace

CylinderFunction::CylinderFunction(Partition times, std::vector<Term> terms, std::string name)
    : times_(std::move(times)), terms_(std::move(terms)), name_(std::move(name)) {
  for (const auto& term : terms_) {
    for (const auto& f : term.factors) {
      if (f.knot >= times_.size()) throw InvalidArgument("cylinder factor refers to a missing knot");
    }
  }
}

CylinderFunction::CylinderFunction(Partition times, Callback u, std::string name)
    : times_(std::move(times)), callback_(std::move(u)), name_(std::move(name)) {
  if (!callback_) throw InvalidArgument("cylinder callback is empty");
}

CylinderFunction CylinderFunction::constant(double c, double t) {
  return CylinderFunction(Partition({t}), {Term{c, {}}}, "const:c=" + fmt(c));
}

CylinderFunction CylinderFunction::single(const ScalarFunction& u, double t) {
  std::ostringstream name;
  name << geo::to_string(u.family) << ":t=" << t << ",axis=" << u.axis;
  if (u.family != geo::Family::Linear && u.family != geo::Family::Quadratic) name << ",w=" << u.param;
  if (u.scale != 1.0) name << ",c=" << u.scale;
  return CylinderFunction(Partition({t}), {Term{1.0, {{u, 0}}}}, name.str());
}

CylinderFunction CylinderFunction::twopoint(const ScalarFunction& u1, double t1, const ScalarFunction& u2,
                                            double t2) {
  std::vector<double> times;
  std::vector<Term> terms;
  terms.push_back({1.0, {{u1, add_time(times, t1)}}});
  terms.push_back({1.0, {{u2, add_time(times, t2)}}});
  Partition p = normalize(std::move(times), terms);
  return CylinderFunction(std::move(p), std::move(terms),
                          "twopoint:t1=" + fmt(t1) + ",t2=" + fmt(t2) + ",f1=" + u1.describe() +
                              ",f2=" + u2.describe());
}

CylinderFunction CylinderFunction::random(const ManifoldModel& model, double horizon, mc::Stream& rng) {
  const int knots = 2 + static_cast<int>(rng.uniform() * 2.0);
  std::vector<double> times;
  while (static_cast<int>(times.size()) < knots) {
    const double t = std::round((0.1 + 0.9 * rng.uniform()) * horizon * 1000.0) / 1000.0;
    if (t > 0.0) add_time(times, t);
  }
  auto draw = [&]() {
    ScalarFunction f;
    const double pick = rng.uniform();
    switch (model.kind()) {
      case geo::Kind::Circle:
        f.family = pick < 0.5 ? geo::Family::Sin : geo::Family::Cos;
        f.param = (1.0 + std::floor(rng.uniform() * 2.0)) * 2.0 * kPi / model.circumference();
        break;
      case geo::Kind::Sphere2:
        f.family = pick < 0.5 ? geo::Family::Linear : geo::Family::Sin;
        f.param = 0.5 + rng.uniform();
        break;
      case geo::Kind::EuclideanWeighted:
        f.family = pick < 1.0 / 3 ? geo::Family::Linear : pick < 2.0 / 3 ? geo::Family::Sin : geo::Family::Cos;
        f.param = 0.5 + rng.uniform();
        break;
    }
    f.axis = static_cast<int>(rng.uniform() * model.ambient_dimension());
    return f;
  };
  std::vector<Term> terms;
  std::ostringstream name;
  name << "random[";
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double c = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + rng.uniform());
    terms.push_back({c, {{draw(), k}}});
    name << (k ? ";" : "") << c << "*" << terms.back().factors[0].f.describe() << "@" << times[k];
  }
  const double cross = 0.3 * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  terms.push_back({cross, {{draw(), 0}, {draw(), times.size() - 1}}});
  name << ";" << cross << "*" << terms.back().factors[0].f.describe() << "@" << times.front() << "*"
       << terms.back().factors[1].f.describe() << "@" << times.back() << "]";
  Partition p = normalize(std::move(times), terms);
  return CylinderFunction(std::move(p), std::move(terms), name.str());
}

CylinderFunction CylinderFunction::parse(std::string_view spec) {
  const std::size_t colon = spec.find(':');
  const std::string kind(spec.substr(0, colon));
  const auto kv = colon == std::string_view::npos ? std::map<std::string, std::string>{}
                                                  : parse_params(spec.substr(colon + 1), spec);
  std::vector<std::string> used;
  auto get = [&](const std::string& key, std::optional<double> fallback) {
    used.push_back(key);
    const auto it = kv.find(key);
    if (it == kv.end()) {
      if (!fallback) throw InvalidArgument("test function '" + std::string(spec) + "': missing '" + key + "'");
      return *fallback;
    }
    return parse_double(it->second, key);
  };
  auto get_str = [&](const std::string& key, const std::string& fallback) {
    used.push_back(key);
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  auto finish = [&](CylinderFunction F) {
    for (const auto& [k, v] : kv) {
      if (std::find(used.begin(), used.end(), k) == used.end()) {
        throw InvalidArgument("test function '" + std::string(spec) + "': unknown parameter '" + k + "'");
      }
    }
    return F;
  };
  auto axis_of = [&](const std::string& key) {
    used.push_back(key);
    const auto it = kv.find(key);
    return it == kv.end() ? 0 : parse_int(it->second, key);
  };
  if (kind == "const") {
    return finish(constant(get("c", 1.0), get("t", 1.0)));
  }
  if (kind == "twopoint") {
    const double t1 = get("t1", std::nullopt), t2 = get("t2", std::nullopt);
    const int axis = axis_of("axis");
    const double w = get("w", 1.0);
    ScalarFunction f1{geo::parse_family(get_str("f1", "linear")), axis, w, get("c1", 1.0)};
    ScalarFunction f2{geo::parse_family(get_str("f2", "linear")), axis, w, get("c2", 1.0)};
    return finish(twopoint(f1, t1, f2, t2));
  }
  ScalarFunction u{geo::parse_family(kind), axis_of("axis"), get("w", kind == "exp" ? 0.5 : 1.0), get("c", 1.0)};
  return finish(single(u, get("t", 1.0)));
}

CylinderFunction CylinderFunction::operator*(const CylinderFunction& other) const {
  if (!analytic() || !other.analytic()) {
    const CylinderFunction a = *this, b = other;
    std::vector<double> times = a.times_.times();
    for (double t : b.times_.times()) add_time(times, t);
    std::sort(times.begin(), times.end());
    Partition p(times);
    auto pick = [p](const CylinderFunction& F, std::span<const Point> y) {
      std::vector<Point> sub;
      for (double t : F.partition().times()) sub.push_back(y[*p.find(t)]);
      return F.value(sub);
    };
    return CylinderFunction(p, [a, b, pick](std::span<const Point> y) { return pick(a, y) * pick(b, y); },
                            "(" + a.name_ + ")*(" + b.name_ + ")");
  }
  std::vector<double> times = times_.times();
  std::vector<std::size_t> remap;
  for (double t : other.times_.times()) remap.push_back(add_time(times, t));
  std::vector<Term> terms;
  for (const auto& x : terms_) {
    for (const auto& y : other.terms_) {
      Term t{x.coefficient * y.coefficient, x.factors};
      for (auto f : y.factors) {
        f.knot = remap[f.knot];
        t.factors.push_back(f);
      }
      terms.push_back(std::move(t));
    }
  }
  Partition p = normalize(std::move(times), terms);
  return CylinderFunction(std::move(p), std::move(terms), "(" + name_ + ")*(" + other.name_ + ")");
}

CylinderFunction CylinderFunction::scaled(double c) const {
  CylinderFunction out = *this;
  out.name_ = fmt(c) + "*(" + name_ + ")";
  if (callback_) {
    auto u = callback_;
    out.callback_ = [u, c](std::span<const Point> y) { return c * u(y); };
  } else {
    for (auto& t : out.terms_) t.coefficient *= c;
  }
  return out;
}

std::optional<std::pair<ScalarFunction, double>> CylinderFunction::single_time() const {
  if (callback_ || terms_.size() != 1 || terms_[0].factors.size() != 1) return std::nullopt;
  ScalarFunction u = terms_[0].factors[0].f;
  u.scale *= terms_[0].coefficient;
  return std::make_pair(u, times_.times()[terms_[0].factors[0].knot]);
}

void CylinderFunction::validate(const ManifoldModel& model) const {
  for (const auto& t : terms_) {
    for (const auto& f : t.factors) f.f.validate(model);
  }
}

double CylinderFunction::value(std::span<const Point> y) const {
  if (y.size() != times_.size()) throw PartitionMismatch("cylinder function expects " + std::to_string(times_.size()) + " points");
  if (callback_) return callback_(y);
  double s = 0.0;
  for (const auto& t : terms_) {
    double p = t.coefficient;
    for (const auto& f : t.factors) p *= f.f.profile(y[f.knot].coords(f.f.axis));
    s += p;
  }
  return s;
}

Vec CylinderFunction::gradient(const ManifoldModel& model, std::span<const Point> y, std::size_t j) const {
  if (callback_) return gradient_fd(model, y, j);
  Vec g = Vec::Zero(model.ambient_dimension());
  for (const auto& t : terms_) {
    for (std::size_t m = 0; m < t.factors.size(); ++m) {
      const Factor& fm = t.factors[m];
      if (fm.knot != j) continue;
      double rest = t.coefficient;
      for (std::size_t o = 0; o < t.factors.size(); ++o) {
        if (o != m) rest *= t.factors[o].f.profile(y[t.factors[o].knot].coords(t.factors[o].f.axis));
      }
      g(fm.f.axis) += rest * fm.f.profile_derivative(y[j].coords(fm.f.axis));
    }
  }
  return model.project_tangent(y[j], g);
}

Vec CylinderFunction::gradient_fd(const ManifoldModel& model, std::span<const Point> y, std::size_t j) const {
  const geo::Frame frame = model.canonical_frame(y[j]);
  const double eta = 1e-4 * (1.0 + y[j].coords.norm());
  std::vector<Point> moved(y.begin(), y.end());
  Vec g = Vec::Zero(model.ambient_dimension());
  for (int i = 0; i < frame.columns.cols(); ++i) {
    moved[j] = model.exp_map({y[j], eta * frame.columns.col(i)});
    const double up = value(moved);
    moved[j] = model.exp_map({y[j], -eta * frame.columns.col(i)});
    const double down = value(moved);
    g += (up - down) / (2.0 * eta) * frame.columns.col(i);
  }
  return g;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> knot_indices(const CylinderFunction& F, const SampledPath& path) {
  std::vector<std::size_t> idx;
  idx.reserve(F.partition().size());
  for (double t : F.partition().times()) {
    const auto k = path.index_of(t);
    if (!k) throw PartitionMismatch("time " + std::to_string(t) + " of " + F.name() + " is not a path knot");
    idx.push_back(*k);
  }
  return idx;
}

std::vector<Point> marginals(const CylinderFunction& F, const SampledPath& path) {
  std::vector<Point> y;
  for (std::size_t k : knot_indices(F, path)) y.push_back(path.points[k]);
  return y;
}

double evaluate(const CylinderFunction& F, const SampledPath& path) { return F.value(marginals(F, path)); }

Vec ParallelProfile::at(double s) const {
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (s <= times[j]) return grad[j];
  }
  return Vec::Zero(grad.empty() ? 1 : grad.front().size());
}

ParallelProfile parallel_profile(const CylinderFunction& F, const SampledPath& path) {
  const auto idx = knot_indices(F, path);
  std::vector<Point> y;
  for (std::size_t k : idx) y.push_back(path.points[k]);
  ParallelProfile p;
  p.times = F.partition().times();
  p.grad.assign(idx.size(), Vec::Zero(path.model->dimension()));
  Vec acc = Vec::Zero(path.model->dimension());
  for (std::size_t j = idx.size(); j-- > 0;) {
    acc += path.to_initial(idx[j], F.gradient(*path.model, y, j));
    p.grad[j] = acc;
  }
  return p;
}

Vec parallel_gradient(const CylinderFunction& F, const SampledPath& path, double s) {
  return parallel_profile(F, path).at(s);
}

double h1_norm_sq(const ParallelProfile& p) {
  double s = 0.0, prev = 0.0;
  for (std::size_t j = 0; j < p.times.size(); ++j) {
    s += (p.times[j] - prev) * p.grad[j].squaredNorm();
    prev = p.times[j];
  }
  return s;
}

double h1_norm_sq(const CylinderFunction& F, const SampledPath& path) {
  return h1_norm_sq(parallel_profile(F, path));
}

mc::SampledEstimate pushforward_samples(const CylinderFunction& F, const ManifoldModel& model,
                                        const Point& x, std::size_t n_paths, const mc::StreamKey& key) {
  if (n_paths < 2) throw InsufficientSamples("pushforward needs at least 2 paths");
  std::vector<double> v(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    mc::Stream rng({key.seed, key.tag, i, key.stage});
    v[i] = evaluate(F, path::sample_path(model, x, F.partition(), rng));
  });
  return mc::sampled(std::move(v), key.seed, key.tag);
}

mc::Estimate pushforward_mean(const CylinderFunction& F, const ManifoldModel& model, const Point& x,
                              std::size_t n_paths, const mc::StreamKey& key) {
  return pushforward_samples(F, model, x, n_paths, key).est;
}

namespace {

std::vector<Mat> linear_flow(const ManifoldModel& model, std::span<const double> times, double sign) {
  // Every implemented model has P(Ric + Hess f)P^{-1} = c I in frame components.
  const Mat A = sign * 0.5 * model.bakry_emery_in_frame(model.canonical_frame(model.origin()));
  const int d = static_cast<int>(A.rows());
  std::vector<Mat> out{Mat::Identity(d, d)};
  Mat phi = out.front();
  double t = 0.0;
  for (double target : times) {
    const int steps = std::max(8, static_cast<int>(std::ceil(256.0 * (target - t))));
    const double h = (target - t) / steps;
    for (int s = 0; s < steps; ++s) {
      const Mat k1 = A * phi;
      const Mat k2 = A * (phi + 0.5 * h * k1);
      const Mat k3 = A * (phi + 0.5 * h * k2);
      const Mat k4 = A * (phi + h * k3);
      phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    t = target;
    out.push_back(phi);
  }
  return out;
}

}  // namespace

std::vector<Mat> phi_flow(const ManifoldModel& model, std::span<const double> times) {
  return linear_flow(model, times, +1.0);
}

std::vector<Mat> damped_flow(const ManifoldModel& model, std::span<const double> times) {
  return linear_flow(model, times, -1.0);
}

mc::SampledEstimate GradientSample::norm() const {
  const double n = mean.norm();
  std::vector<double> v(samples.size(), 0.0);
  if (n > 0.0) {
    const Vec u = mean / n;
    for (std::size_t i = 0; i < samples.size(); ++i) v[i] = u.dot(samples[i]);
  }
  mc::SampledEstimate out = mc::sampled(std::move(v));
  out.est.mean = n;
  return out;
}

mc::SampledEstimate GradientSample::norm_sq() const {
  const double n2 = mean.squaredNorm();
  std::vector<double> v(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) v[i] = 2.0 * mean.dot(samples[i]) - n2;
  mc::SampledEstimate out = mc::sampled(std::move(v));
  out.est.mean = n2;
  return out;
}

namespace {

GradientSample summarize(std::vector<Vec> samples) {
  GradientSample g;
  const int d = static_cast<int>(samples.front().size());
  g.mean = Vec::Zero(d);
  g.se = Vec::Zero(d);
  for (int c = 0; c < d; ++c) {
    mc::Accumulator acc;
    for (const auto& s : samples) acc.add(s(c));
    const mc::Estimate e = acc.estimate();
    g.mean(c) = e.mean;
    g.se(c) = e.se;
  }
  g.count = samples.size();
  g.samples = std::move(samples);
  return g;
}

}  // namespace

GradientSample pushforward_gradient_bismut(const CylinderFunction& F, const ManifoldModel& model,
                                           const Point& x, std::size_t n_paths, const mc::StreamKey& key) {
  if (n_paths < 2) throw InsufficientSamples("gradient estimate needs at least 2 paths");
  const auto& times = F.partition().times();
  const std::vector<Mat> Q = damped_flow(model, times);
  std::vector<Vec> samples(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    mc::Stream rng({key.seed, key.tag, i, key.stage});
    const SampledPath g = path::sample_path(model, x, F.partition(), rng);
    const ParallelProfile p = parallel_profile(F, g);
    Vec s = p.initial();
    for (std::size_t j = 0; j < times.size(); ++j) s += (Q[j + 1] - Q[j]) * p.grad[j];
    samples[i] = s;
  });
  return summarize(std::move(samples));
}

mc::SampledEstimate pushforward_gradient_fd(const CylinderFunction& F, const ManifoldModel& model,
                                            const Point& x, const Vec& direction, double step,
                                            std::size_t n_paths, const mc::StreamKey& key) {
  if (!(step > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  if (n_paths < 2) throw InsufficientSamples("gradient estimate needs at least 2 paths");
  const Vec d = model.project_tangent(x, direction);
  const geo::Frame f0 = model.canonical_frame(x);
  const Point xp = model.exp_map({x, step * d}), xm = model.exp_map({x, -step * d});
  const geo::Frame fp = model.parallel_transport_geodesic(f0, xp);
  const geo::Frame fm = model.parallel_transport_geodesic(f0, xm);
  std::vector<double> v(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    const mc::StreamKey k{key.seed, key.tag, i, key.stage};
    mc::Stream r1(k), r2(k);
    const double up = evaluate(F, path::sample_path(model, xp, F.partition(), r1, fp));
    const double down = evaluate(F, path::sample_path(model, xm, F.partition(), r2, fm));
    v[i] = (up - down) / (2.0 * step);
  });
  return mc::sampled(std::move(v), key.seed, key.tag);
}

mc::SampledEstimate pushforward_laplacian(const CylinderFunction& F, const ManifoldModel& model,
                                          const Point& x, double step, std::size_t n_paths,
                                          const mc::StreamKey& key) {
  if (!(step > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  const geo::Frame f0 = model.canonical_frame(x);
  const int d = model.dimension();
  const Vec gradf = model.weight_gradient(x).components;
  struct Start {
    Point x;
    geo::Frame frame;
  };
  std::vector<Start> plus, minus;
  for (int i = 0; i < d; ++i) {
    const Vec e = f0.columns.col(i);
    const Point xp = model.exp_map({x, step * e}), xm = model.exp_map({x, -step * e});
    plus.push_back({xp, model.parallel_transport_geodesic(f0, xp)});
    minus.push_back({xm, model.parallel_transport_geodesic(f0, xm)});
  }
  std::vector<double> v(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    const mc::StreamKey k{key.seed, key.tag, i, key.stage};
    auto run = [&](const Point& start, const geo::Frame& frame) {
      mc::Stream r(k);
      return evaluate(F, path::sample_path(model, start, F.partition(), r, frame));
    };
    const double center = run(x, f0);
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      const double up = run(plus[c].x, plus[c].frame), down = run(minus[c].x, minus[c].frame);
      s += (up - 2.0 * center + down) / (step * step);
      s -= gradf.dot(f0.columns.col(c)) * (up - down) / (2.0 * step);
    }
    v[i] = s;
  });
  return mc::sampled(std::move(v), key.seed, key.tag);
}

std::vector<double> curvature_weights(double kappa, std::span<const double> times) {
  std::vector<double> w(times.size());
  double prev = 0.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    w[j] = std::exp(0.5 * kappa * times[j]) - std::exp(0.5 * kappa * prev);
    prev = times[j];
  }
  return w;
}

}  // namespace brpath::cyl
