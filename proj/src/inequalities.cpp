#include "brpath/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "brpath/errors.hpp"
#include "brpath/parallel.hpp"

namespace brpath::ineq {

namespace {

using cyl::Vec;
using path::Partition;
using path::SampledPath;

mc::SampledEstimate exact(double value, std::size_t n) {
  mc::SampledEstimate s;
  s.per_sample.assign(n, value);
  s.est.mean = value;
  s.est.count = n;
  return s;
}

/// Roundoff-level margins on deterministic comparisons count as equality.
bool negligible(double margin, double lhs, double rhs) {
  return std::abs(margin) <= 1e-10 * (1.0 + std::abs(lhs) + std::abs(rhs));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Upper quantile of the standard normal: P(Z > q) = p, by bisection.
double normal_upper_quantile(double p) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(mid / std::sqrt(2.0)) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SampledPath draw(const ManifoldModel& model, const Point& x, const Partition& p, const mc::StreamKey& key,
                 std::size_t i) {
  mc::Stream rng({key.seed, key.tag, i, key.stage});
  return path::sample_path(model, x, p, rng);
}

/// Left side of R2 (norm) or R3 (squared norm).
mc::SampledEstimate gradient_lhs(const ManifoldModel& model, const CylinderFunction& F, const Point& x,
                                 std::size_t n, const mc::StreamKey& key, Estimator est, bool squared) {
  if (est == Estimator::Bismut) {
    const cyl::GradientSample g = cyl::pushforward_gradient_bismut(F, model, x, n, key);
    return squared ? g.norm_sq() : g.norm();
  }
  const geo::Frame f = model.canonical_frame(x);
  const int d = model.dimension();
  std::vector<std::vector<double>> cols;
  std::vector<double> m(d);
  for (int i = 0; i < d; ++i) {
    auto c = cyl::pushforward_gradient_fd(F, model, x, f.columns.col(i), 1e-3, n, key);
    m[i] = c.est.mean;
    cols.push_back(std::move(c.per_sample));
  }
  double norm2 = 0.0;
  for (double v : m) norm2 += v * v;
  const double norm = std::sqrt(norm2);
  std::vector<double> grad(d);
  for (int i = 0; i < d; ++i) grad[i] = squared ? 2.0 * m[i] : (norm > 0.0 ? m[i] / norm : 0.0);
  return mc::delta_method(squared ? norm2 : norm, grad, cols, key.seed, key.tag);
}

/// Per-path right sides of R2 and R3 on the paths the Bismut estimator uses.
void gradient_rhs(const ManifoldModel& model, double kappa, const CylinderFunction& F, const Point& x,
                  std::size_t n, const mc::StreamKey& key, std::vector<double>* r2, std::vector<double>* r3) {
  const auto& times = F.partition().times();
  const std::vector<double> w = cyl::curvature_weights(kappa, times);
  const double scale = std::exp(0.5 * kappa * F.horizon());
  if (r2) r2->assign(n, 0.0);
  if (r3) r3->assign(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const cyl::ParallelProfile p = cyl::parallel_profile(F, draw(model, x, F.partition(), key, i));
    double a = p.initial().norm(), b = p.initial().squaredNorm();
    for (std::size_t j = 0; j < w.size(); ++j) {
      a += w[j] * p.grad[j].norm();
      b += w[j] * p.grad[j].squaredNorm();
    }
    if (r2) (*r2)[i] = a;
    if (r3) (*r3)[i] = scale * b;
  });
}

/// Gradient just after t (the part of F still to be revealed).
Vec gradient_after(const cyl::ParallelProfile& p, double t) {
  for (std::size_t j = 0; j < p.times.size(); ++j) {
    if (p.times[j] > t + 1e-12) return p.grad[j];
  }
  return Vec::Zero(p.grad.front().size());
}

/// Integrands of R4 and R5 after t on one path.
std::pair<double, double> pointwise_rhs(const cyl::ParallelProfile& p, double kappa, double t, double T) {
  const Vec g = gradient_after(p, t);
  double a = g.norm(), b = g.squaredNorm();
  double prev = 0.0;
  for (std::size_t j = 0; j < p.times.size(); ++j) {
    const double tj = p.times[j];
    if (tj > t + 1e-12) {
      const double lo = std::max(prev, t);
      const double w = std::exp(0.5 * kappa * (tj - t)) - std::exp(0.5 * kappa * (lo - t));
      a += w * p.grad[j].norm();
      b += w * p.grad[j].squaredNorm();
    }
    prev = tj;
  }
  return {a, std::exp(0.5 * kappa * (T - t)) * b};
}

double cosh_weight(double kappa, double a, double b) {
  if (kappa == 0.0) return b - a;
  return 2.0 / kappa * (std::sinh(0.5 * kappa * b) - std::sinh(0.5 * kappa * a));
}

/// Ordinary least squares y = c0 + c1 x with error propagation from se.
struct Line {
  double intercept = 0.0, slope = 0.0, intercept_se = 0.0, slope_se = 0.0;
};
Line fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> se, bool weighted) {
  const std::size_t n = x.size();
  std::vector<double> w(n, 1.0);
  if (weighted) {
    for (std::size_t i = 0; i < n; ++i) w[i] = se[i] > 0.0 ? 1.0 / (se[i] * se[i]) : 1.0;
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0;
  for (std::size_t i = 0; i < n; ++i) sxx += w[i] * (x[i] - mx) * (x[i] - mx);
  Line l;
  double vs = 0, vi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cs = w[i] * (x[i] - mx) / sxx;
    const double ci = w[i] / sw - mx * cs;
    l.slope += cs * y[i];
    l.intercept += ci * y[i];
    vs += cs * cs * se[i] * se[i];
    vi += ci * ci * se[i] * se[i];
  }
  (void)my;
  l.slope_se = std::sqrt(vs);
  l.intercept_se = std::sqrt(vi);
  return l;
}

/// Uniform knots refined by the knots of h, so I_h is exact on the path.
Partition curve_partition(const SobolevCurve& h, int steps) {
  return path::refine_partition(Partition::uniform(h.horizon(), steps), h.knots());
}

bool flat(const ManifoldModel& m) {
  return m.kind() == geo::Kind::EuclideanWeighted && m.weight_coefficient() == 0.0;
}

}  // namespace

VerdictReport compare(std::string inequality, const ManifoldModel& model, std::string testfn, double kappa,
                      const mc::SampledEstimate& lhs, const mc::SampledEstimate& rhs, mc::Design design,
                      bool expect_equality, double z, std::uint64_t seed) {
  const mc::Comparison c = mc::compare_leq(lhs, rhs, design, z, expect_equality);
  VerdictReport r{std::move(inequality), model.spec(), std::move(testfn), kappa, lhs.est, rhs.est,
                  c.margin, c.z, c.verdict, lhs.est.count, seed};
  if (r.verdict == mc::Verdict::Fail && negligible(c.margin, lhs.est.mean, rhs.est.mean)) {
    r.verdict = mc::Verdict::Pass;
  }
  return r;
}

VerdictReport identity(std::string name, const ManifoldModel& model, std::string testfn, double kappa,
                       const mc::SampledEstimate& lhs, const mc::SampledEstimate& rhs, mc::Design design, double z,
                       std::uint64_t seed) {
  const mc::Comparison c = mc::compare_leq(lhs, rhs, design, z, false);
  const bool ok = std::abs(c.margin) <= z * c.se_diff || negligible(c.margin, lhs.est.mean, rhs.est.mean);
  return {std::move(name), model.spec(), std::move(testfn), kappa, lhs.est, rhs.est,
          c.margin, c.z, ok ? mc::Verdict::Pass : mc::Verdict::Fail, lhs.est.count, seed};
}

void write_verdict_csv(std::ostream& out, std::span<const VerdictReport> reports) {
  out << "inequality,model,testfn,kappa,lhs,lhs_se,rhs,rhs_se,margin,z,verdict,n_paths,seed\n";
  for (const auto& r : reports) {
    out << csv_field(r.inequality) << ',' << csv_field(r.model) << ',' << csv_field(r.testfn) << ','
        << fmt(r.kappa) << ',' << fmt(r.lhs.mean) << ',' << fmt(r.lhs.se) << ',' << fmt(r.rhs.mean) << ','
        << fmt(r.rhs.se) << ',' << fmt(r.margin) << ',' << fmt(r.z) << ',' << mc::to_string(r.verdict) << ','
        << r.n_paths << ',' << r.seed << '\n';
  }
}

mc::Verdict overall(std::span<const VerdictReport> reports) {
  mc::Verdict v = mc::Verdict::Pass;
  for (const auto& r : reports) {
    if (r.verdict == mc::Verdict::Fail) return mc::Verdict::Fail;
    if (r.verdict == mc::Verdict::Inconclusive) v = mc::Verdict::Inconclusive;
  }
  return v;
}

bool predicts_equality(const ManifoldModel& model, double kappa, const CylinderFunction& F) {
  const auto s = F.single_time();
  return flat(model) && kappa == 0.0 && s && s->first.family == geo::Family::Linear;
}

VerdictReport check_r2(const ManifoldModel& model, double kappa, const CylinderFunction& F, const Point& x,
                       std::size_t n_paths, const mc::StreamKey& key, Estimator est, double z) {
  F.validate(model);
  const mc::SampledEstimate lhs = gradient_lhs(model, F, x, n_paths, key, est, false);
  std::vector<double> rhs;
  gradient_rhs(model, kappa, F, x, n_paths, key, &rhs, nullptr);
  return compare(est == Estimator::Bismut ? "r2" : "r2-fd", model, F.name(), kappa, lhs,
                 mc::sampled(std::move(rhs), key.seed, key.tag), mc::Design::Paired,
                 predicts_equality(model, kappa, F), z, key.seed);
}

VerdictReport check_r3(const ManifoldModel& model, double kappa, const CylinderFunction& F, const Point& x,
                       std::size_t n_paths, const mc::StreamKey& key, Estimator est, double z) {
  F.validate(model);
  const mc::SampledEstimate lhs = gradient_lhs(model, F, x, n_paths, key, est, true);
  std::vector<double> rhs;
  gradient_rhs(model, kappa, F, x, n_paths, key, nullptr, &rhs);
  return compare(est == Estimator::Bismut ? "r3" : "r3-fd", model, F.name(), kappa, lhs,
                 mc::sampled(std::move(rhs), key.seed, key.tag), mc::Design::Paired,
                 predicts_equality(model, kappa, F), z, key.seed);
}

GradientAgreement gradient_agreement(const ManifoldModel& model, const CylinderFunction& F, const Point& x,
                                     std::size_t n_paths, const mc::StreamKey& key, double step, double z) {
  const cyl::GradientSample b = cyl::pushforward_gradient_bismut(F, model, x, n_paths, key);
  const geo::Frame f = model.canonical_frame(x);
  const int d = model.dimension();
  GradientAgreement out{b.mean, b.se, Vec::Zero(d), Vec::Zero(d)};
  for (int i = 0; i < d; ++i) {
    const mc::StreamKey k{key.seed, mc::mix(key.tag, 0xfd), key.path, key.stage};
    const mc::SampledEstimate e = cyl::pushforward_gradient_fd(F, model, x, f.columns.col(i), step, n_paths, k);
    out.fd(i) = e.est.mean;
    out.fd_se(i) = e.est.se;
    const double se = std::hypot(b.se(i), e.est.se);
    const double diff = b.mean(i) - e.est.mean;
    // Roundoff in deterministic components is not a disagreement.
    const double zi = std::abs(diff) <= 1e-9 * (1.0 + std::abs(b.mean(i)) + std::abs(e.est.mean)) ? 0.0
                      : se > 0.0                                                                ? std::abs(diff) / se
                                                                                                : 1e9;
    out.max_abs_z = std::max(out.max_abs_z, zi);
  }
  out.agree = out.max_abs_z <= z;
  return out;
}

std::vector<VerdictReport> check_r4_r5(const ManifoldModel& model, double kappa, const CylinderFunction& F,
                                       const Point& x, double t, const Budget& budget, const mc::StreamKey& key,
                                       double z) {
  F.validate(model);
  const double T = F.horizon();
  const std::array<double, 1> at{t};
  const Partition p = t > 0.0 ? path::refine_partition(F.partition(), at) : F.partition();
  const std::size_t n = budget.paths;
  const std::size_t np = std::min(budget.pointwise, n);
  std::vector<double> l4(n), l5(n), r4(n), r5(n);
  std::vector<double> q_se(np), cond(np), cond_se(np), finest(n);
  // Per-path ladders are noisy; the residual check runs on their ensemble mean.
  parallel_for(n, [&](std::size_t i) {
    const SampledPath g = draw(model, x, p, key, i);
    const mart::InfinitesimalQV q =
        mart::infinitesimal_qv(F, g, t, budget.continuations, budget.inner,
                               {key.seed, key.tag, i, mc::mix(key.stage, 7)}, true,
                               std::numeric_limits<double>::infinity());
    l5[i] = q.value;
    finest[i] = q.raw.empty() ? q.value : q.raw.back();
    l4[i] = std::sqrt(std::max(0.0, q.value));
    std::tie(r4[i], r5[i]) = pointwise_rhs(cyl::parallel_profile(F, g), kappa, t, T);
    if (i >= np) return;
    q_se[i] = q.se;
    // Conditional expectation of the R5 integrand given the path up to t.
    const std::size_t k = *g.index_of(t);
    mc::Accumulator acc;
    for (std::size_t c = 0; c < budget.continuations; ++c) {
      mc::Stream rng({key.seed, key.tag, i, mc::mix(mc::mix(key.stage, 9), c)});
      const SampledPath cont = path::continue_path(g, k, p.times(), rng);
      acc.add(pointwise_rhs(cyl::parallel_profile(F, cont), kappa, t, T).second);
    }
    cond[i] = acc.mean();
    cond_se[i] = std::sqrt(acc.variance() / static_cast<double>(acc.count()));
  });
  {
    mc::Accumulator d, v;
    for (std::size_t i = 0; i < n; ++i) {
      d.add(l5[i] - finest[i]);
      v.add(l5[i]);
    }
    const double excess = std::max(0.0, std::abs(d.mean()) - 3.0 * std::sqrt(d.variance() / static_cast<double>(n)));
    if (std::abs(v.mean()) > 1e-12 && excess > 0.1 * std::abs(v.mean())) {
      throw LadderTooCoarse("mean extrapolated [dF^t] = " + fmt(v.mean()) + " differs from the finest rung mean " +
                            fmt(v.mean() - d.mean()) + " by more than 10%");
    }
  }
  std::vector<VerdictReport> out;
  out.push_back(compare("r4", model, F.name(), kappa, mc::sampled(l4, key.seed, key.tag),
                        mc::sampled(r4, key.seed, key.tag), mc::Design::Paired, predicts_equality(model, kappa, F),
                        z, key.seed));
  out.push_back(compare("r5", model, F.name(), kappa, mc::sampled(l5, key.seed, key.tag),
                        mc::sampled(r5, key.seed, key.tag), mc::Design::Paired, predicts_equality(model, kappa, F),
                        z, key.seed));

  // Pointwise form, Bonferroni over the paths.
  const double zb = normal_upper_quantile(0.5 * std::erfc(z / std::sqrt(2.0)) / static_cast<double>(np));
  VerdictReport pw;
  pw.inequality = "r5-pointwise";
  pw.model = model.spec();
  pw.testfn = F.name();
  pw.kappa = kappa;
  pw.n_paths = np;
  pw.seed = key.seed;
  pw.margin = std::numeric_limits<double>::infinity();
  pw.z = std::numeric_limits<double>::infinity();
  mc::Accumulator la, ra;
  for (std::size_t i = 0; i < np; ++i) {
    la.add(l5[i]);
    ra.add(cond[i]);
    const double m = cond[i] - l5[i], se = std::hypot(q_se[i], cond_se[i]);
    const double zi = se > 0.0 ? m / se : (negligible(m, l5[i], cond[i]) ? 0.0 : (m > 0 ? 1e9 : -1e9));
    pw.margin = std::min(pw.margin, m);
    pw.z = std::min(pw.z, zi);
    if (zi < -zb) pw.verdict = mc::Verdict::Fail;
  }
  pw.lhs = la.estimate(key.seed, key.tag);
  pw.rhs = ra.estimate(key.seed, key.tag);
  out.push_back(pw);
  return out;
}

double ItoSample::energy() const {
  double e = 0.0;
  for (std::size_t j = 0; j < grad_sq.size(); ++j) e += (times[j + 1] - times[j]) * grad_sq[j];
  return e;
}

ItoSample ito_sample(const ManifoldModel& model, const SobolevCurve& h, const SampledPath& g) {
  ItoSample s;
  s.times = g.times;
  const geo::Frame& initial = g.frames.front();
  const path::KnotFunctional I = [&](std::span<const Point> pts) {
    const path::KnotDevelopment dev = path::develop_knots_drifted(model, g.times, pts, initial);
    return path::ito_integral(h, g.times, dev.w);
  };
  s.value = I(g.points);
  for (std::size_t j = 1; j < g.knots(); ++j) {
    s.grad_sq.push_back(path::knot_parallel_gradient(model, g.points, initial, j, I).squaredNorm());
  }
  return s;
}

namespace {

std::vector<ItoSample> ito_samples(const ManifoldModel& model, const Point& x, const SobolevCurve& h,
                                   const Budget& budget, const mc::StreamKey& key) {
  const Partition p = curve_partition(h, budget.steps);
  std::vector<ItoSample> out(budget.paths);
  parallel_for(budget.paths, [&](std::size_t i) { out[i] = ito_sample(model, h, draw(model, x, p, key, i)); });
  return out;
}

FrequencyRow frequency_row(const ManifoldModel& model, double kappa, const Point& x, const SobolevCurve& h,
                           const std::string& name, const Budget& budget, const mc::StreamKey& key, double z) {
  const std::vector<ItoSample> s = ito_samples(model, x, h, budget, key);
  mc::Accumulator acc;
  for (const auto& v : s) acc.add(v.energy());
  const double norm = h.norm_sq();
  FrequencyRow r;
  r.curve = name;
  r.T = h.horizon();
  r.N = acc.estimate(key.seed, key.tag);
  r.N.mean /= norm;
  r.N.se /= norm;
  r.bound = 2.0 / (std::exp(kappa * r.T) + 1.0);
  r.first_order = std::numeric_limits<double>::quiet_NaN();
  r.verdict = mc::decide(r.N.mean - r.bound, r.N.se, z);
  return r;
}

}  // namespace

std::vector<FrequencyRow> check_r6_frequency(const ManifoldModel& model, double kappa, const Point& x,
                                             std::span<const SobolevCurve> family,
                                             std::span<const std::string> names, const Budget& budget,
                                             const mc::StreamKey& key, double z) {
  if (names.size() != family.size()) throw InvalidArgument("one name per curve required");
  std::vector<FrequencyRow> rows;
  for (std::size_t i = 0; i < family.size(); ++i) {
    rows.push_back(frequency_row(model, kappa, x, family[i], names[i], budget,
                                 {key.seed, mc::mix(key.tag, i), 0, key.stage}, z));
  }
  return rows;
}

FrequencyScan frequency_scan(const ManifoldModel& model, double kappa, const Point& x, const Vec& v,
                             std::span<const double> Ts, const Budget& budget, const mc::StreamKey& key) {
  if (v.size() != model.dimension() || v.norm() == 0.0) throw InvalidArgument("scan direction must be nonzero");
  const Vec u = v / v.norm();
  const geo::Frame f = model.canonical_frame(x);
  const double be = model.bakry_emery({x, f.columns * u});
  FrequencyScan scan;
  scan.expected = -0.5 * be;
  std::vector<double> Ns, se;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "linear:T=%g", Ts[i]);
    FrequencyRow r = frequency_row(model, kappa, x, SobolevCurve::linear(Ts[i], u), name, budget,
                                   {key.seed, mc::mix(key.tag, 100 + i), 0, key.stage}, mc::kDefaultZ);
    r.first_order = 1.0 - 0.5 * be * Ts[i];
    Ns.push_back(r.N.mean);
    se.push_back(r.N.se);
    scan.rows.push_back(r);
  }
  if (Ts.size() >= 2) {
    const Line l = fit_line(Ts, Ns, se, false);
    scan.slope = l.slope;
    scan.slope_se = l.slope_se;
  }
  return scan;
}

std::vector<VerdictReport> check_r7_logsob(const ManifoldModel& model, double kappa, const Point& x,
                                           const SobolevCurve& h, const std::string& name, double eps,
                                           const Budget& budget, const mc::StreamKey& key, double z) {
  const std::vector<ItoSample> s = ito_samples(model, x, h, budget, key);
  const double T = h.horizon();
  const std::size_t n = s.size();
  std::vector<double> A(n), B(n), C(n), D(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = s[i];
    B[i] = std::exp(2.0 * eps * v.value);
    A[i] = B[i] * 2.0 * eps * v.value;
    double c = 0.0, d = 0.0;
    for (std::size_t j = 0; j < v.grad_sq.size(); ++j) {
      c += cosh_weight(kappa, v.times[j], v.times[j + 1]) * v.grad_sq[j];
      d += (v.times[j + 1] - v.times[j]) * v.grad_sq[j];
    }
    C[i] = B[i] * eps * eps * c;
    D[i] = B[i] * eps * eps * d;
  }
  auto mean = [](const std::vector<double>& c) {
    mc::Accumulator a;
    for (double x : c) a.add(x);
    return a.mean();
  };
  const double mA = mean(A), mB = mean(B), mC = mean(C), mD = mean(D);
  const double km = 2.0 * std::exp(0.5 * kappa * T), ko = std::exp(kappa * T) + 1.0;
  const std::vector<std::vector<double>> cols{A, B, C, D};
  const double ent = mA / mB - std::log(mB);
  const std::array<double, 4> g_ent{1.0 / mB, -mA / (mB * mB) - 1.0 / mB, 0.0, 0.0};
  const std::array<double, 4> g_mid{0.0, -km * mC / (mB * mB), km / mB, 0.0};
  const std::array<double, 4> g_out{0.0, -ko * mD / (mB * mB), 0.0, ko / mB};
  const auto lhs = mc::delta_method(ent, g_ent, cols, key.seed, key.tag);
  const auto mid = mc::delta_method(km * mC / mB, g_mid, cols, key.seed, key.tag);
  const auto out = mc::delta_method(ko * mD / mB, g_out, cols, key.seed, key.tag);
  char tf[96];
  std::snprintf(tf, sizeof tf, "exp(%g*I[%s])", eps, name.c_str());
  return {compare("r7-entropy", model, tf, kappa, lhs, mid, mc::Design::Paired, false, z, key.seed),
          compare("r7-energy", model, tf, kappa, mid, out, mc::Design::Paired, false, z, key.seed)};
}

double heat_weight(double kappa, double t) { return kappa == 0.0 ? t : std::expm1(kappa * t) / kappa; }

std::vector<VerdictReport> check_bakry_emery_suite(const ManifoldModel& model, double kappa,
                                                   const ScalarFunction& u, const Point& x,
                                                   std::span<const double> ts, std::size_t n_paths,
                                                   const mc::StreamKey& key, double z) {
  u.validate(model);
  std::vector<VerdictReport> out;
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const double t = ts[j];
    const mc::StreamKey k{key.seed, key.tag, 0, mc::mix(key.stage, j)};
    const CylinderFunction F = CylinderFunction::single(u, t);
    VerdictReport a = check_r2(model, kappa, F, x, n_paths, k, Estimator::Bismut, z);
    a.inequality = "be-gradient";
    VerdictReport b = check_r3(model, kappa, F, x, n_paths, k, Estimator::Bismut, z);
    b.inequality = "be-gradient-sq";
    out.push_back(a);
    out.push_back(b);

    // Same paths as the gradient estimates: X_t is the single knot.
    std::vector<double> U(n_paths), U2(n_paths), G(n_paths), E(n_paths);
    parallel_for(n_paths, [&](std::size_t i) {
      const Point y = draw(model, x, F.partition(), k, i).points.back();
      U[i] = u.value(model, y);
      U2[i] = U[i] * U[i];
      G[i] = u.gradient_norm_sq(model, y);
      E[i] = U2[i] > 0.0 ? U2[i] * std::log(U2[i]) : 0.0;
    });
    auto mean = [](const std::vector<double>& c) {
      mc::Accumulator acc;
      for (double v : c) acc.add(v);
      return acc.mean();
    };
    const double mU = mean(U), mU2 = mean(U2), mG = mean(G), mE = mean(E);
    const double w = heat_weight(kappa, t);
    const std::vector<std::vector<double>> cols{U, U2, G, E};
    const bool linear_flat = flat(model) && kappa == 0.0 && u.family == geo::Family::Linear;
    const auto var = mc::delta_method(mU2 - mU * mU, std::array<double, 4>{-2.0 * mU, 1.0, 0.0, 0.0}, cols,
                                      key.seed, key.tag);
    const auto vb = mc::delta_method(w * mG, std::array<double, 4>{0.0, 0.0, w, 0.0}, cols, key.seed, key.tag);
    out.push_back(compare("be-variance", model, F.name(), kappa, var, vb, mc::Design::Paired, linear_flat, z,
                          key.seed));
    const double ent = mE / mU2 - std::log(mU2);
    const auto el = mc::delta_method(ent, std::array<double, 4>{0.0, -mE / (mU2 * mU2) - 1.0 / mU2, 0.0, 1.0 / mU2},
                                     cols, key.seed, key.tag);
    const auto er = mc::delta_method(2.0 * w * mG / mU2,
                                     std::array<double, 4>{0.0, -2.0 * w * mG / (mU2 * mU2), 2.0 * w / mU2, 0.0},
                                     cols, key.seed, key.tag);
    const bool extremal = flat(model) && kappa == 0.0 && u.family == geo::Family::Exp;
    out.push_back(compare("be-logsob", model, F.name(), kappa, el, er, mc::Design::Paired, extremal, z, key.seed));
  }
  return out;
}

FiniteFrequency check_finite_frequency(const ManifoldModel& model, const ScalarFunction& u, const Point& x,
                                       std::span<const double> ts, std::size_t n_paths, const mc::StreamKey& key) {
  u.validate(model);
  FiniteFrequency out;
  out.ts.assign(ts.begin(), ts.end());
  out.expected = 0.5 * model.bakry_emery(u.gradient(model, x));
  std::vector<double> ys, ses;
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const double t = ts[j];
    std::vector<double> U(n_paths), U2(n_paths), G(n_paths);
    parallel_for(n_paths, [&](std::size_t i) {
      mc::Stream rng({key.seed, key.tag, i, mc::mix(key.stage, j)});
      const Point y = model.heat_kernel_sample(x, t, rng);
      U[i] = u.value(model, y);
      U2[i] = U[i] * U[i];
      G[i] = u.gradient_norm_sq(model, y);
    });
    mc::Accumulator a, b, c;
    for (std::size_t i = 0; i < n_paths; ++i) {
      a.add(U[i]);
      b.add(U2[i]);
      c.add(G[i]);
    }
    const double V = b.mean() - a.mean() * a.mean();
    const double N = t * c.mean() / V;
    const std::vector<std::vector<double>> cols{U, U2, G};
    const std::array<double, 3> grad{2.0 * t * c.mean() * a.mean() / (V * V), -t * c.mean() / (V * V), t / V};
    const mc::SampledEstimate e = mc::delta_method(N, grad, cols, key.seed, key.tag);
    out.N.push_back(e.est);
    ys.push_back((N - 1.0) / t);
    ses.push_back(e.est.se / t);
  }
  if (ts.size() >= 2) {
    const Line l = fit_line(ts, ys, ses, true);
    out.slope = l.intercept;
    out.slope_se = l.intercept_se;
  } else if (ts.size() == 1) {
    out.slope = ys[0];
    out.slope_se = ses[0];
  }
  return out;
}

VerdictReport check_dimensional(const ManifoldModel& model, double kappa, int d, const CylinderFunction& F,
                                const Point& x, double t, std::size_t n_paths, const mc::StreamKey& key, double step,
                                double z) {
  F.validate(model);
  if (d < model.dimension()) throw InvalidArgument("dimension parameter d must be >= the model dimension");
  if (F.partition().front() < t - 1e-12) throw InvalidArgument("F must depend on the path over [t, T] only");
  const double w = kappa == 0.0 ? t / d : std::expm1(kappa * t) / (kappa * d);
  const cyl::GradientSample g = cyl::pushforward_gradient_bismut(F, model, x, n_paths, key);
  const mc::SampledEstimate L =
      cyl::pushforward_laplacian(F, model, x, step, n_paths, {key.seed, mc::mix(key.tag, 0x1a), 0, key.stage});
  std::vector<std::vector<double>> cols;
  std::vector<double> grad;
  for (int i = 0; i < g.mean.size(); ++i) {
    std::vector<double> c(n_paths);
    for (std::size_t k = 0; k < n_paths; ++k) c[k] = g.samples[k](i);
    cols.push_back(std::move(c));
    grad.push_back(2.0 * g.mean(i));
  }
  cols.push_back(L.per_sample);
  grad.push_back(2.0 * w * L.est.mean);
  const double value = g.mean.squaredNorm() + w * L.est.mean * L.est.mean;
  const mc::SampledEstimate lhs = mc::delta_method(value, grad, cols, key.seed, key.tag);
  std::vector<double> rhs;
  gradient_rhs(model, kappa, F, x, n_paths, key, nullptr, &rhs);
  return compare("dimensional", model, F.name(), kappa, lhs, mc::sampled(std::move(rhs), key.seed, key.tag),
                 mc::Design::Paired, false, z, key.seed);
}

std::vector<VerdictReport> check_ito_isometry(const ManifoldModel& model, const Point& x, const SobolevCurve& h,
                                              const std::string& name, const Budget& budget,
                                              const mc::StreamKey& key, double z) {
  const Partition p = curve_partition(h, budget.steps);
  std::vector<double> I(budget.paths), I2(budget.paths);
  parallel_for(budget.paths, [&](std::size_t i) {
    I[i] = path::ito_integral(h, draw(model, x, p, key, i));
    I2[i] = I[i] * I[i];
  });
  const std::size_t n = budget.paths;
  return {identity("ito-isometry", model, name, 0.0, mc::sampled(I2, key.seed, key.tag), exact(h.norm_sq(), n),
                   mc::Design::Paired, z, key.seed),
          identity("ito-mean", model, name, 0.0, mc::sampled(I, key.seed, key.tag), exact(0.0, n),
                   mc::Design::Paired, z, key.seed)};
}

std::vector<VerdictReport> check_girsanov(const ManifoldModel& weighted, const Point& x, const ScalarFunction& u,
                                          double T, const Budget& budget, const mc::StreamKey& key, double z) {
  const ManifoldModel base = weighted.without_weight();
  const double target = geo::heat_flow_closed_form(weighted, u, T)(x);
  const Partition p = Partition::uniform(T, budget.steps);
  const std::size_t n = budget.paths;
  std::vector<double> Z(n), UZ(n);
  parallel_for(n, [&](std::size_t i) {
    const SampledPath g = draw(base, x, p, key, i);
    Z[i] = path::radon_nikodym(weighted, g);
    UZ[i] = u.value(weighted, g.points.back()) * Z[i];
  });
  return {identity("girsanov-mass", weighted, "Z", 0.0, mc::sampled(Z, key.seed, key.tag), exact(1.0, n),
                   mc::Design::Paired, z, key.seed),
          identity("girsanov-importance", weighted, u.describe(), 0.0, mc::sampled(UZ, key.seed, key.tag),
                   exact(target, n), mc::Design::Paired, z, key.seed)};
}

}  // namespace brpath::ineq
