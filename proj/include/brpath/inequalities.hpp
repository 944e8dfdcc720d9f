#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "brpath/cylinder.hpp"
#include "brpath/martingale.hpp"
#include "brpath/montecarlo.hpp"
#include "brpath/pathspace.hpp"

namespace brpath::ineq {

using cyl::CylinderFunction;
using geo::ManifoldModel;
using geo::Point;
using geo::ScalarFunction;
using path::SobolevCurve;

/// One checked inequality (or identity). margin = rhs - lhs.
struct VerdictReport {
  std::string inequality;
  std::string model;
  std::string testfn;
  double kappa = 0.0;
  mc::Estimate lhs;
  mc::Estimate rhs;
  double margin = 0.0;
  double z = 0.0;
  mc::Verdict verdict = mc::Verdict::Pass;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
};

/// Paired one-sided comparison lhs <= rhs.
VerdictReport compare(std::string inequality, const ManifoldModel& model, std::string testfn, double kappa,
                      const mc::SampledEstimate& lhs, const mc::SampledEstimate& rhs, mc::Design design,
                      bool expect_equality, double z, std::uint64_t seed);
/// Two-sided identity lhs = rhs: pass iff |margin| <= z sigma.
VerdictReport identity(std::string name, const ManifoldModel& model, std::string testfn, double kappa,
                       const mc::SampledEstimate& lhs, const mc::SampledEstimate& rhs, mc::Design design, double z,
                       std::uint64_t seed);

/// inequality,model,testfn,kappa,lhs,lhs_se,rhs,rhs_se,margin,z,verdict,n_paths,seed
void write_verdict_csv(std::ostream& out, std::span<const VerdictReport> reports);

/// Worst verdict: any fail -> Fail, else any inconclusive -> Inconclusive.
mc::Verdict overall(std::span<const VerdictReport> reports);

/// Flat model, kappa = 0 and a linear single-time F: the gradient estimates
/// hold with equality.
bool predicts_equality(const ManifoldModel& model, double kappa, const CylinderFunction& F);

struct Budget {
  std::size_t paths = 100000;
  std::size_t inner = 64;          // nested projections
  std::size_t continuations = 64;  // per ladder rung in [dF^t]
  std::size_t pointwise = 100;     // paths for the pointwise R5 form
  int steps = 32;                  // knots for I_h test functions
};

enum class Estimator { Bismut, FiniteDifference };

/// (R2): |grad int F dGamma_x| <= E[|grad_0 F| + sum_j w_j |grad_{t_j} F|].
/// The Bismut LHS is paired with the RHS on the same paths.
VerdictReport check_r2(const ManifoldModel& model, double kappa, const CylinderFunction& F, const Point& x,
                       std::size_t n_paths, const mc::StreamKey& key, Estimator est = Estimator::Bismut,
                       double z = mc::kDefaultZ);

/// (R3): |grad int F|^2 <= e^{kappa T/2} E[|grad_0 F|^2 + sum_j w_j |grad_{t_j} F|^2].
VerdictReport check_r3(const ManifoldModel& model, double kappa, const CylinderFunction& F, const Point& x,
                       std::size_t n_paths, const mc::StreamKey& key, Estimator est = Estimator::Bismut,
                       double z = mc::kDefaultZ);

/// Bismut vs finite differences per frame component; max |z| over components.
struct GradientAgreement {
  cyl::Vec bismut, bismut_se, fd, fd_se;
  double max_abs_z = 0.0;
  bool agree = true;
};
GradientAgreement gradient_agreement(const ManifoldModel& model, const CylinderFunction& F, const Point& x,
                                     std::size_t n_paths, const mc::StreamKey& key, double step = 1e-3,
                                     double z = mc::kDefaultZ);

/// (R4), (R5) integrated and the pointwise (R5) form on budget.pointwise paths
/// (Bonferroni-adjusted z). Returns {r4, r5, r5-pointwise}.
std::vector<VerdictReport> check_r4_r5(const ManifoldModel& model, double kappa, const CylinderFunction& F,
                                       const Point& x, double t, const Budget& budget, const mc::StreamKey& key,
                                       double z = mc::kDefaultZ);

/// Sample of I_h and its parallel gradients on one path.
struct ItoSample {
  double value = 0.0;
  std::vector<double> times;     // knot times, times[0] = 0
  std::vector<double> grad_sq;   // |grad_{t_j} I_h|^2 for s in (t_{j-1}, t_j]
  double energy() const;         // sum_j dt_j grad_sq[j]
};
/// I_h on the knot development of the path with the weight drift, and its
/// parallel gradients by finite-difference variations of the knots.
ItoSample ito_sample(const ManifoldModel& model, const SobolevCurve& h, const path::SampledPath& g);

/// N[I_h] = E|grad I_h|^2_{H^1} / |h|^2 against 2/(e^{kappa T}+1).
struct FrequencyRow {
  std::string curve;
  double T = 0.0;
  mc::Estimate N;
  double bound = 0.0;
  double first_order = 0.0;  // 1 - 1/2 (Ric + Hess f)(v, v) T for h = t v, else NaN
  mc::Verdict verdict = mc::Verdict::Pass;
};
std::vector<FrequencyRow> check_r6_frequency(const ManifoldModel& model, double kappa, const Point& x,
                                             std::span<const SobolevCurve> family,
                                             std::span<const std::string> names, const Budget& budget,
                                             const mc::StreamKey& key, double z = mc::kDefaultZ);

/// N[I_h] for h(t) = t v over a T scan and the fitted slope dN/dT, compared
/// with -1/2 (Ric + Hess f)(v, v).
struct FrequencyScan {
  std::vector<FrequencyRow> rows;
  double slope = 0.0;
  double slope_se = 0.0;
  double expected = 0.0;
};
FrequencyScan frequency_scan(const ManifoldModel& model, double kappa, const Point& x, const cyl::Vec& v,
                             std::span<const double> Ts, const Budget& budget, const mc::StreamKey& key);

/// (R7) for F = exp(eps I_h) normalized to E F^2 = 1: {lhs <= middle, middle <= outer}.
std::vector<VerdictReport> check_r7_logsob(const ManifoldModel& model, double kappa, const Point& x,
                                           const SobolevCurve& h, const std::string& name, double eps,
                                           const Budget& budget, const mc::StreamKey& key,
                                           double z = mc::kDefaultZ);

/// Heat-flow gradient estimates at each t: {be-gradient, be-gradient-sq,
/// be-variance, be-logsob}. The first two are check_r2 / check_r3 on u(gamma(t)).
std::vector<VerdictReport> check_bakry_emery_suite(const ManifoldModel& model, double kappa,
                                                   const ScalarFunction& u, const Point& x,
                                                   std::span<const double> ts, std::size_t n_paths,
                                                   const mc::StreamKey& key, double z = mc::kDefaultZ);

/// kappa^{-1}(e^{kappa t} - 1), or t at kappa = 0.
double heat_weight(double kappa, double t);

/// N^u(x, t) = t E|grad u|^2 / Var u(X_t) on the grid, and the slope at 0
/// from a weighted line through (t, (N - 1)/t).
struct FiniteFrequency {
  std::vector<double> ts;
  std::vector<mc::Estimate> N;
  double slope = 0.0;
  double slope_se = 0.0;
  double expected = 0.0;  // 1/2 (Ric + Hess f)(grad u, grad u)
};
FiniteFrequency check_finite_frequency(const ManifoldModel& model, const ScalarFunction& u, const Point& x,
                                       std::span<const double> ts, std::size_t n_paths, const mc::StreamKey& key);

/// |grad int F|^2 + (e^{kappa t}-1)/(kappa d) |Delta_f int F|^2 <= R3 right side,
/// for F depending on the path over [t, T] only.
VerdictReport check_dimensional(const ManifoldModel& model, double kappa, int d, const CylinderFunction& F,
                                const Point& x, double t, std::size_t n_paths, const mc::StreamKey& key,
                                double step = 1e-2, double z = mc::kDefaultZ);

/// E[I_h^2] = |h|^2 and E[I_h] = 0.
std::vector<VerdictReport> check_ito_isometry(const ManifoldModel& model, const Point& x, const SobolevCurve& h,
                                              const std::string& name, const Budget& budget,
                                              const mc::StreamKey& key, double z = mc::kDefaultZ);

/// E[Z^T] = 1 and E[u(X_T) Z^T] = H^f_T u(x) on paths of the unweighted model.
std::vector<VerdictReport> check_girsanov(const ManifoldModel& weighted, const Point& x, const ScalarFunction& u,
                                          double T, const Budget& budget, const mc::StreamKey& key,
                                          double z = mc::kDefaultZ);

}  // namespace brpath::ineq
