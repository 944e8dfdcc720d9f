#pragma once

#include <span>
#include <vector>

#include "brpath/cylinder.hpp"
#include "brpath/montecarlo.hpp"
#include "brpath/pathspace.hpp"

namespace brpath::mart {

using cyl::CylinderFunction;
using geo::ManifoldModel;
using geo::Point;
using path::SampledPath;

/// F^t(gamma) = int F(gamma|[0,t] then sigma) dGamma_{gamma(t)}(sigma).
struct Projection {
  double value = 0.0;
  double se = 0.0;  // inner Monte Carlo error; 0 on the analytic path
  bool analytic = false;
};

/// Inner samples continue the path from knot t with fresh substreams keyed by
/// (key.path, key.stage, inner index). Single-time registered functions on
/// exact-kernel models use H_{T-t}u(gamma(t)) directly; t past the last time
/// of F returns evaluate(F, path).
Projection project(const CylinderFunction& F, const SampledPath& path, double t, std::size_t inner_m,
                   const mc::StreamKey& key, bool allow_analytic = true);

/// True when project() would take the closed-form route.
bool has_fast_path(const CylinderFunction& F, const ManifoldModel& model);

struct MartingaleTrace {
  std::vector<double> times;   // includes 0
  std::vector<double> values;  // F^{t_k}
  std::size_t inner = 0;
};

/// F^t at every grid time (each must be a knot of the path).
MartingaleTrace trace(const CylinderFunction& F, const SampledPath& path, std::span<const double> grid,
                      std::size_t inner_m, const mc::StreamKey& key, bool allow_analytic = true);

struct QuadraticVariationTrace {
  std::vector<double> times;
  std::vector<double> cumulative;  // [F^{t_k}], nondecreasing
};
QuadraticVariationTrace quadratic_variation(const MartingaleTrace& m);

/// Paths from x on the union of F's times and the grid, with traces and QV.
struct Ensemble {
  std::vector<MartingaleTrace> traces;
  std::vector<QuadraticVariationTrace> qv;
};
Ensemble martingale_ensemble(const CylinderFunction& F, const ManifoldModel& model, const Point& x,
                             std::span<const double> grid, std::size_t n_paths, std::size_t inner_m,
                             const mc::StreamKey& key, bool allow_analytic = true);

/// ([F^{t+s}] - [F^t]) / s on a ladder s_i = 2^{-i} (next knot - t), i = 4..9,
/// extrapolated linearly to s = 0.
struct InfinitesimalQV {
  double value = 0.0;
  double se = 0.0;
  std::vector<double> ladder;
  std::vector<double> raw;  // per-rung estimates
  double residual = 0.0;    // |value - finest rung| / |value|
};

/// For one path: continuations from gamma(t) over [t, t+s] (n_cont of them),
/// each projected at t+s with inner samples shared across continuations
/// (common random numbers), conditional variance over continuations / s.
/// Throws LadderTooCoarse when the residual exceeds 10%.
InfinitesimalQV infinitesimal_qv(const CylinderFunction& F, const SampledPath& path, double t,
                                 std::size_t n_cont, std::size_t inner_m, const mc::StreamKey& key,
                                 bool allow_analytic = true, double tolerance = 0.1);

/// Default ladder s_i = 2^{-i} * gap, i = 4..9.
std::vector<double> default_ladder(double gap);

struct MomentReport {
  int k = 1;
  std::vector<double> gaps;
  std::vector<mc::Estimate> moments;  // E|F^{s+g} - F^s|^{2k}
  double slope = 0.0;                 // log-log regression
  double implied_c = 0.0;             // max_g ((m 2^k / (2k)!) / g^k)^{1/k}
  double bound_c = 0.0;               // e^{kappa T} A^2
  bool within_bound = true;           // every moment <= bound + 3 sigma
};

/// Increments of the martingale from base time s over each gap; A is taken
/// as the largest sampled |grad_r F|.
MomentReport moment_growth(const CylinderFunction& F, const ManifoldModel& model, const Point& x, int k,
                           double s, std::span<const double> gaps, double kappa, std::size_t n_paths,
                           std::size_t inner_m, const mc::StreamKey& key);

struct DoobReport {
  double epsilon = 0.0;
  mc::Estimate probability;  // P(sup_k |G_k| >= eps)
  mc::Estimate bound;        // E|G_T| / eps
  double ratio = 0.0;
  mc::Verdict verdict = mc::Verdict::Pass;
};

/// G_k = F^{t_k} - F^0 over each trace.
DoobReport doob_sup(std::span<const MartingaleTrace> traces, double epsilon, double z = mc::kDefaultZ);

}  // namespace brpath::mart
