#include <cmath>
#include <sstream>
#include <vector>

#include "brpath/errors.hpp"
#include "brpath/inequalities.hpp"
#include "doctest.h"

using namespace brpath;
using namespace brpath::ineq;
using geo::Family;
using cyl::Vec;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

bool within(const mc::Estimate& e, double target, double z = 3.5) {
  return std::abs(e.mean - target) <= z * e.se + 1e-9;
}

Budget small(std::size_t paths) {
  Budget b;
  b.paths = paths;
  b.inner = 16;
  b.continuations = 16;
  b.pointwise = 8;
  b.steps = 8;
  return b;
}

}  // namespace

TEST_CASE("gradient estimate on the flat model with a linear function is an equality") {
  const auto flat = ManifoldModel::euclidean(2);
  const auto F = CylinderFunction::parse("linear:t=1,axis=0");
  CHECK(predicts_equality(flat, 0.0, F));
  const auto r = check_r2(flat, 0.0, F, flat.origin(), 500, {1, 2, 0, 0});
  CHECK(r.lhs.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.rhs.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.verdict == mc::Verdict::Pass);
  const auto r3 = check_r3(flat, 0.0, F, flat.origin(), 500, {1, 2, 0, 0});
  CHECK(r3.lhs.mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r3.rhs.mean == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("OU with kappa = -1 is sharp for the final-point coordinate") {
  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const auto F = CylinderFunction::parse("linear:t=1");
  const auto r = check_r2(ou, -1.0, F, ou.origin(), 4000, {3, 4, 0, 0});
  CHECK(within(r.lhs, std::exp(-0.5)));
  CHECK(r.rhs.mean == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(r.verdict != mc::Verdict::Fail);
  const auto fd = check_r2(ou, -1.0, F, ou.origin(), 4000, {3, 4, 0, 0}, Estimator::FiniteDifference);
  CHECK(fd.inequality == "r2-fd");
  CHECK(within(fd.lhs, std::exp(-0.5)));
}

TEST_CASE("flat sin: strict inequality with Gaussian closed forms") {
  const auto flat = ManifoldModel::euclidean(1);
  const auto F = CylinderFunction::parse("sin:t=1");
  const auto r = check_r2(flat, 0.0, F, flat.origin(), 20000, {5, 6, 0, 0});
  CHECK(within(r.lhs, std::exp(-0.5)));
  CHECK(r.verdict == mc::Verdict::Pass);
  CHECK(r.margin > 0.05);
  const auto r3 = check_r3(flat, 0.0, F, flat.origin(), 20000, {5, 6, 0, 0});
  CHECK(within(r3.rhs, 0.5 * (1.0 + std::exp(-2.0))));
}

TEST_CASE("soundness: random functions on the sphere never fail at the true curvature") {
  const auto s = ManifoldModel::sphere(1.0, 16);
  mc::Stream rng({7, 7, 7, 7});
  for (std::uint64_t r = 0; r < 3; ++r) {
    const auto F = CylinderFunction::random(s, 1.0, rng);
    CHECK(check_r2(s, -1.0, F, s.origin(), 600, {8, r, 0, 0}).verdict == mc::Verdict::Pass);
    CHECK(check_r3(s, -1.0, F, s.origin(), 600, {8, r, 0, 0}).verdict == mc::Verdict::Pass);
  }
}

TEST_CASE("Bismut and finite-difference gradients agree") {
  const auto ou = ManifoldModel::euclidean(2, 1.0);
  const auto F = CylinderFunction::parse("twopoint:t1=0.5,t2=1,f1=sin,f2=cos,axis=1,w=0.8");
  const auto a = gradient_agreement(ou, F, ou.point(vec({0.3, -0.2})), 6000, {9, 9, 0, 0});
  CHECK(a.agree);
  CHECK(a.bismut.size() == 2);
}

TEST_CASE("the heat-flow suite is the single-time specialization") {
  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const geo::ScalarFunction u{Family::Sin, 0, 1.3, 1.0};
  const std::vector<double> ts{0.5, 1.0};
  const mc::StreamKey key{11, 12, 0, 13};
  const auto suite = check_bakry_emery_suite(ou, -1.0, u, ou.origin(), ts, 800, key);
  REQUIRE(suite.size() == 8);
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const mc::StreamKey k{key.seed, key.tag, 0, mc::mix(key.stage, j)};
    const auto F = CylinderFunction::single(u, ts[j]);
    const auto r2 = check_r2(ou, -1.0, F, ou.origin(), 800, k);
    const auto r3 = check_r3(ou, -1.0, F, ou.origin(), 800, k);
    const auto& a = suite[4 * j];
    const auto& b = suite[4 * j + 1];
    CHECK(a.inequality == "be-gradient");
    CHECK(b.inequality == "be-gradient-sq");
    CHECK(std::abs(a.lhs.mean - r2.lhs.mean) <= 1e-12);
    CHECK(std::abs(a.rhs.mean - r2.rhs.mean) <= 1e-12);
    CHECK(std::abs(b.lhs.mean - r3.lhs.mean) <= 1e-12);
    CHECK(std::abs(b.rhs.mean - r3.rhs.mean) <= 1e-12);
    CHECK(suite[4 * j + 2].inequality == "be-variance");
    CHECK(suite[4 * j + 3].inequality == "be-logsob");
  }
  for (const auto& r : suite) CHECK(r.verdict != mc::Verdict::Fail);
  CHECK(heat_weight(0.0, 0.7) == 0.7);
  CHECK(heat_weight(-1.0, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)));
}

TEST_CASE("Gaussian variance and log-Sobolev are equalities on the flat model") {
  const auto flat = ManifoldModel::euclidean(1);
  const std::vector<double> ts{1.0};
  const auto lin = check_bakry_emery_suite(flat, 0.0, {Family::Linear, 0, 1.0, 1.0}, flat.origin(), ts, 20000,
                                           {2, 3, 0, 0});
  CHECK(within(lin[2].lhs, 1.0));
  CHECK(lin[2].rhs.mean == doctest::Approx(1.0));
  const auto ex = check_bakry_emery_suite(flat, 0.0, {Family::Exp, 0, 0.5, 1.0}, flat.origin(), ts, 20000,
                                          {2, 4, 0, 0});
  // u = e^{z/2}: Ent(u^2) / E u^2 = 1/2 and 2 t E|u'|^2 / E u^2 = 1/2.
  CHECK(within(ex[3].lhs, 0.5));
  CHECK(within(ex[3].rhs, 0.5));
}

TEST_CASE("pointwise and integrated quadratic-variation estimates") {
  const auto flat = ManifoldModel::euclidean(1);
  const auto F = CylinderFunction::parse("linear:t=1");
  const auto r = check_r4_r5(flat, 0.0, F, flat.origin(), 0.5, small(20), {4, 4, 0, 0});
  REQUIRE(r.size() == 3);
  CHECK(r[0].inequality == "r4");
  CHECK(r[1].inequality == "r5");
  CHECK(r[2].inequality == "r5-pointwise");
  CHECK(r[1].rhs.mean == doctest::Approx(1.0));
  CHECK(r[1].lhs.mean == doctest::Approx(1.0).epsilon(0.05));
  for (const auto& v : r) CHECK(v.verdict != mc::Verdict::Fail);

  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const auto G = CylinderFunction::parse("sin:t=1");
  for (const auto& v : check_r4_r5(ou, -1.0, G, ou.origin(), 0.5, small(40), {4, 5, 0, 0})) {
    CHECK(v.verdict != mc::Verdict::Fail);
  }
}

TEST_CASE("frequency of I_h on the flat model is exactly one") {
  const auto flat = ManifoldModel::euclidean(2);
  const auto family = SobolevCurve::basis(2, 1.0, 4);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < family.size(); ++i) names.push_back("e" + std::to_string(i));
  const auto rows = check_r6_frequency(flat, 0.0, flat.origin(), family, names, small(20), {6, 6, 0, 0});
  REQUIRE(rows.size() == family.size());
  for (const auto& r : rows) {
    CHECK(r.N.mean == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.bound == 1.0);
    CHECK(r.verdict == mc::Verdict::Pass);
  }
  const std::vector<double> Ts{0.5, 1.0, 2.0};
  const auto scan = frequency_scan(flat, 0.0, flat.origin(), vec({1.0, 0.0}), Ts, small(10), {6, 7, 0, 0});
  CHECK(std::abs(scan.slope) < 1e-6);
  CHECK(scan.expected == 0.0);
  CHECK(scan.rows[1].first_order == 1.0);

  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const auto s2 = frequency_scan(ou, -1.0, ou.origin(), vec({2.0}), Ts, small(10), {6, 8, 0, 0});
  CHECK(s2.expected == doctest::Approx(-0.5));
  CHECK(s2.rows[2].first_order == doctest::Approx(0.0));
}

TEST_CASE("I_h samples carry the isometry") {
  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const auto h = SobolevCurve::linear(1.0, vec({1.0}));
  const auto r = check_ito_isometry(ou, ou.origin(), h, "t", small(20000), {12, 1, 0, 0});
  REQUIRE(r.size() == 2);
  for (const auto& v : r) CHECK(v.verdict == mc::Verdict::Pass);
  CHECK(r[0].rhs.mean == 1.0);
}

TEST_CASE("Girsanov reweighting reproduces the OU heat flow") {
  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const geo::ScalarFunction u{Family::Cos, 0, 1.0, 1.0};
  Budget b = small(20000);
  b.steps = 32;
  const auto r = check_girsanov(ou, ou.point(vec({0.4})), u, 1.0, b, {13, 1, 0, 0});
  REQUIRE(r.size() == 2);
  CHECK(r[0].verdict == mc::Verdict::Pass);
  CHECK(r[1].verdict == mc::Verdict::Pass);
}

TEST_CASE("log-Sobolev chain for exponentials of I_h on the flat model") {
  const auto flat = ManifoldModel::euclidean(1);
  const auto h = SobolevCurve::linear(1.0, vec({1.0}));
  const double eps = 0.3;
  const auto r = check_r7_logsob(flat, 0.0, flat.origin(), h, "t", eps, small(4000), {14, 1, 0, 0});
  REQUIRE(r.size() == 2);
  CHECK(within(r[0].lhs, 2.0 * eps * eps));
  CHECK(r[0].rhs.mean == doctest::Approx(2.0 * eps * eps).epsilon(1e-6));
  CHECK(r[1].rhs.mean == doctest::Approx(2.0 * eps * eps).epsilon(1e-6));
  for (const auto& v : r) CHECK(v.verdict != mc::Verdict::Fail);
}

TEST_CASE("finite-time frequency of the heat semigroup") {
  const auto flat = ManifoldModel::euclidean(1);
  const geo::ScalarFunction lin{Family::Linear, 0, 1.0, 1.0};
  const std::vector<double> ts{0.1, 0.2, 0.4};
  const auto a = check_finite_frequency(flat, lin, flat.origin(), ts, 4000, {15, 1, 0, 0});
  CHECK(a.expected == 0.0);
  CHECK(std::abs(a.slope) <= 3.0 * a.slope_se + 1e-9);

  // OU: N = t / (1 - e^{-t}), slope 1/2 at t = 0.
  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const auto b = check_finite_frequency(ou, lin, ou.origin(), ts, 20000, {15, 2, 0, 0});
  CHECK(b.expected == doctest::Approx(0.5));
  for (std::size_t j = 0; j < ts.size(); ++j) CHECK(within(b.N[j], ts[j] / -std::expm1(-ts[j])));
  CHECK(std::abs(b.slope - 0.5) <= 3.5 * b.slope_se);
}

TEST_CASE("dimensional gradient estimate") {
  const auto flat = ManifoldModel::euclidean(1);
  const auto F = CylinderFunction::parse("sin:t=1");
  const auto r = check_dimensional(flat, 0.0, 1, F, flat.origin(), 1.0, 20000, {16, 1, 0, 0});
  CHECK(within(r.lhs, std::exp(-1.0)));
  CHECK(within(r.rhs, 0.5 * (1.0 + std::exp(-2.0))));
  CHECK(r.verdict == mc::Verdict::Pass);
  CHECK_THROWS_AS(check_dimensional(flat, 0.0, 1, CylinderFunction::parse("sin:t=0.5"), flat.origin(), 1.0, 10,
                                    {16, 1, 0, 0}),
                  InvalidArgument);
}

TEST_CASE("verdict csv and overall verdict") {
  const auto flat = ManifoldModel::euclidean(1);
  const auto r = check_r2(flat, 0.0, CylinderFunction::parse("linear:t=1"), flat.origin(), 10, {1, 1, 0, 0});
  std::ostringstream os;
  std::vector<VerdictReport> v{r};
  write_verdict_csv(os, v);
  const std::string s = os.str();
  CHECK(s.rfind("inequality,model,testfn,kappa,lhs,lhs_se,rhs,rhs_se,margin,z,verdict,n_paths,seed\n", 0) == 0);
  CHECK(s.find("r2,") != std::string::npos);
  CHECK(overall(v) == mc::Verdict::Pass);
  v.back().verdict = mc::Verdict::Inconclusive;
  CHECK(overall(v) == mc::Verdict::Inconclusive);
  v.push_back(r);
  v.back().verdict = mc::Verdict::Fail;
  CHECK(overall(v) == mc::Verdict::Fail);
}
