#include "brpath/martingale.hpp"

#include <algorithm>
#include <cmath>

#include "brpath/errors.hpp"
#include "brpath/parallel.hpp"

namespace brpath::mart {

namespace {

constexpr double kTol = 1e-12;

std::size_t knot_of(const SampledPath& path, double t) {
  const auto k = path.index_of(t);
  if (!k) throw PartitionMismatch("time " + std::to_string(t) + " is not a knot of the path");
  return *k;
}

/// F's marginals when the path is known up to (t0, y0, frame0) and the rest
/// is drawn from rng. `past` holds the points for F's times <= t0.
double continue_and_evaluate(const CylinderFunction& F, const ManifoldModel& model, std::vector<Point> past,
                             double t0, const geo::Frame& frame0, mc::Stream& rng) {
  geo::Frame frame = frame0;
  double t = t0;
  for (double tf : F.partition().times()) {
    if (tf <= t0 + kTol) continue;
    auto step = model.advance(frame, tf - t, rng);
    frame = std::move(step.frame);
    past.push_back(step.end);
    t = tf;
  }
  return F.value(past);
}

std::vector<Point> past_points(const CylinderFunction& F, const SampledPath& path, double t0) {
  std::vector<Point> past;
  for (double tf : F.partition().times()) {
    if (tf > t0 + kTol) break;
    past.push_back(path.points[knot_of(path, tf)]);
  }
  return past;
}

Projection project_from(const CylinderFunction& F, const ManifoldModel& model, const std::vector<Point>& past,
                        double t0, const Point& y0, const geo::Frame& frame0, std::size_t inner_m,
                        const mc::StreamKey& key, bool allow_analytic) {
  Projection out;
  if (t0 + kTol >= F.horizon()) {
    out.value = F.value(past);
    out.analytic = true;
    return out;
  }
  if (allow_analytic && has_fast_path(F, model)) {
    const auto [u, T] = *F.single_time();
    out.value = geo::heat_flow_closed_form(model, u, T - t0)(y0);
    out.analytic = true;
    return out;
  }
  if (inner_m < 2) throw InsufficientSamples("projection needs at least 2 inner samples");
  mc::Accumulator acc;
  for (std::size_t i = 0; i < inner_m; ++i) {
    mc::Stream rng({key.seed, key.tag, key.path, mc::mix(key.stage, i)});
    acc.add(continue_and_evaluate(F, model, past, t0, frame0, rng));
  }
  const mc::Estimate e = acc.estimate();
  out.value = e.mean;
  out.se = e.se;
  return out;
}

}  // namespace

bool has_fast_path(const CylinderFunction& F, const ManifoldModel& model) {
  return model.exactness() == geo::Exactness::ExactKernel && F.single_time().has_value();
}

Projection project(const CylinderFunction& F, const SampledPath& path, double t, std::size_t inner_m,
                   const mc::StreamKey& key, bool allow_analytic) {
  if (t > path.horizon() + kTol) throw HorizonMismatch("projection time beyond the path horizon");
  const std::size_t k = knot_of(path, t);
  return project_from(F, *path.model, past_points(F, path, t), t, path.points[k], path.frames[k], inner_m, key,
                      allow_analytic);
}

MartingaleTrace trace(const CylinderFunction& F, const SampledPath& path, std::span<const double> grid,
                      std::size_t inner_m, const mc::StreamKey& key, bool allow_analytic) {
  MartingaleTrace m;
  m.inner = inner_m;
  m.times.push_back(0.0);
  for (double t : grid) {
    if (t > kTol) m.times.push_back(t);
  }
  for (std::size_t j = 0; j < m.times.size(); ++j) {
    const mc::StreamKey k{key.seed, key.tag, key.path, mc::mix(key.stage, j)};
    m.values.push_back(project(F, path, m.times[j], inner_m, k, allow_analytic).value);
  }
  return m;
}

QuadraticVariationTrace quadratic_variation(const MartingaleTrace& m) {
  QuadraticVariationTrace q;
  q.times = m.times;
  q.cumulative.assign(m.values.size(), 0.0);
  for (std::size_t k = 1; k < m.values.size(); ++k) {
    const double d = m.values[k] - m.values[k - 1];
    q.cumulative[k] = q.cumulative[k - 1] + d * d;
  }
  return q;
}

Ensemble martingale_ensemble(const CylinderFunction& F, const ManifoldModel& model, const Point& x,
                             std::span<const double> grid, std::size_t n_paths, std::size_t inner_m,
                             const mc::StreamKey& key, bool allow_analytic) {
  const path::Partition p = path::refine_partition(F.partition(), grid);
  Ensemble e;
  e.traces.resize(n_paths);
  e.qv.resize(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    mc::Stream rng({key.seed, key.tag, i, key.stage});
    const SampledPath g = path::sample_path(model, x, p, rng);
    e.traces[i] = trace(F, g, grid, inner_m, {key.seed, key.tag, i, mc::mix(key.stage, 1)}, allow_analytic);
    e.qv[i] = quadratic_variation(e.traces[i]);
  });
  return e;
}

std::vector<double> default_ladder(double gap) {
  std::vector<double> s;
  for (int i = 4; i <= 9; ++i) s.push_back(std::ldexp(gap, -i));
  return s;
}

InfinitesimalQV infinitesimal_qv(const CylinderFunction& F, const SampledPath& path, double t,
                                 std::size_t n_cont, std::size_t inner_m, const mc::StreamKey& key,
                                 bool allow_analytic, double tolerance) {
  InfinitesimalQV out;
  const auto& times = F.partition().times();
  const auto next = std::find_if(times.begin(), times.end(), [&](double tf) { return tf > t + kTol; });
  if (next == times.end()) return out;  // F is already determined at t
  if (n_cont < 4) throw InsufficientSamples("infinitesimal_qv needs at least 4 continuations");
  const ManifoldModel& model = *path.model;
  const std::size_t k = knot_of(path, t);
  const std::vector<Point> past = past_points(F, path, t);
  out.ladder = default_ladder(*next - t);

  std::vector<double> se(out.ladder.size());
  for (std::size_t r = 0; r < out.ladder.size(); ++r) {
    const double s = out.ladder[r];
    std::vector<double> v(n_cont);
    // Inner streams depend on the rung only, so every continuation shares them.
    const mc::StreamKey inner{key.seed, key.tag, key.path, mc::mix(key.stage, 2000 + r)};
    for (std::size_t c = 0; c < n_cont; ++c) {
      mc::Stream rng({key.seed, key.tag, key.path, mc::mix(mc::mix(key.stage, 1000 + r), c)});
      const auto step = model.advance(path.frames[k], s, rng);
      v[c] = project_from(F, model, past, t + s, step.end, step.frame, inner_m, inner, allow_analytic).value;
    }
    mc::Accumulator a;
    for (double x : v) a.add(x);
    const double mean = a.mean();
    double m4 = 0.0;
    for (double x : v) m4 += std::pow(x - mean, 4);
    m4 /= static_cast<double>(n_cont);
    const double var = a.variance();
    out.raw.push_back(var / s);
    se[r] = std::sqrt(std::max(0.0, m4 - var * var) / static_cast<double>(n_cont)) / s;
  }

  // Least-squares line through (s, raw); the intercept is the s -> 0 value.
  const double n = static_cast<double>(out.ladder.size());
  double ms = 0.0, mr = 0.0;
  for (std::size_t r = 0; r < out.ladder.size(); ++r) {
    ms += out.ladder[r] / n;
    mr += out.raw[r] / n;
  }
  double sxx = 0.0;
  for (double s : out.ladder) sxx += (s - ms) * (s - ms);
  double var_int = 0.0, intercept = 0.0;
  for (std::size_t r = 0; r < out.ladder.size(); ++r) {
    const double w = 1.0 / n - ms * (out.ladder[r] - ms) / sxx;
    intercept += w * out.raw[r];
    var_int += w * w * se[r] * se[r];
  }
  out.value = intercept;
  out.se = std::sqrt(var_int);
  const double finest = out.raw.back();
  const double excess = std::max(0.0, std::abs(intercept - finest) - 3.0 * std::hypot(se.back(), out.se));
  out.residual = std::abs(intercept) > 1e-12 ? excess / std::abs(intercept) : 0.0;
  if (out.residual > tolerance) {
    throw LadderTooCoarse("extrapolated [dF^t] = " + std::to_string(intercept) + " differs from the finest rung " +
                          std::to_string(finest) + " by more than " + std::to_string(tolerance * 100) + "%");
  }
  return out;
}

MomentReport moment_growth(const CylinderFunction& F, const ManifoldModel& model, const Point& x, int k,
                           double s, std::span<const double> gaps, double kappa, std::size_t n_paths,
                           std::size_t inner_m, const mc::StreamKey& key) {
  if (k < 1 || k > 3) throw InvalidArgument("moment order k must be 1, 2 or 3");
  if (gaps.empty()) throw InvalidArgument("moment_growth needs at least one gap");
  MomentReport rep;
  rep.k = k;
  rep.gaps.assign(gaps.begin(), gaps.end());
  std::vector<double> grid{s};
  for (double g : gaps) grid.push_back(s + g);
  const path::Partition p = path::refine_partition(F.partition(), grid);
  std::vector<std::vector<double>> incr(gaps.size(), std::vector<double>(n_paths));
  std::vector<double> sup_grad(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    mc::Stream rng({key.seed, key.tag, i, key.stage});
    const SampledPath g = path::sample_path(model, x, p, rng);
    const double base = project(F, g, s, inner_m, {key.seed, key.tag, i, mc::mix(key.stage, 0)}).value;
    for (std::size_t j = 0; j < gaps.size(); ++j) {
      const double v = project(F, g, s + gaps[j], inner_m, {key.seed, key.tag, i, mc::mix(key.stage, j + 1)}).value;
      incr[j][i] = std::pow(std::abs(v - base), 2 * k);
    }
    double a = 0.0;
    for (const auto& v : cyl::parallel_profile(F, g).grad) a = std::max(a, v.norm());
    sup_grad[i] = a;
  });
  const double A = *std::max_element(sup_grad.begin(), sup_grad.end());
  rep.bound_c = std::exp(kappa * F.horizon()) * A * A;
  double fact = 1.0;  // (2k)! / 2^k
  for (int i = 1; i <= 2 * k; ++i) fact *= i;
  fact /= std::pow(2.0, k);

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  for (std::size_t j = 0; j < gaps.size(); ++j) {
    const mc::Estimate e = mc::accumulate(incr[j], key.seed, key.tag);
    rep.moments.push_back(e);
    const double bound = fact * std::pow(rep.bound_c, k) * std::pow(gaps[j], k);
    if (e.mean > bound + 3.0 * e.se) rep.within_bound = false;
    if (e.mean > 0.0) {
      const double lx = std::log(gaps[j]), ly = std::log(e.mean);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++used;
      rep.implied_c = std::max(rep.implied_c, std::pow(e.mean / fact / std::pow(gaps[j], k), 1.0 / k));
    }
  }
  if (used >= 2) rep.slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
  return rep;
}

DoobReport doob_sup(std::span<const MartingaleTrace> traces, double epsilon, double z) {
  if (!(epsilon > 0.0)) throw InvalidArgument("Doob threshold must be > 0");
  DoobReport rep;
  rep.epsilon = epsilon;
  std::vector<double> hit(traces.size()), bound(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& v = traces[i].values;
    double sup = 0.0;
    for (double x : v) sup = std::max(sup, std::abs(x - v.front()));
    hit[i] = sup >= epsilon ? 1.0 : 0.0;
    bound[i] = std::abs(v.back() - v.front()) / epsilon;
  }
  const mc::SampledEstimate p = mc::sampled(hit), b = mc::sampled(bound);
  rep.probability = p.est;
  rep.bound = b.est;
  rep.ratio = b.est.mean > 0.0 ? p.est.mean / b.est.mean : 0.0;
  rep.verdict = mc::compare_leq(p, b, mc::Design::Paired, z).verdict;
  return rep;
}

}  // namespace brpath::mart
