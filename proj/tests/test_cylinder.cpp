#include <cmath>
#include <numbers>
#include <vector>

#include "brpath/cylinder.hpp"
#include "brpath/errors.hpp"
#include "doctest.h"

using namespace brpath;
using namespace brpath::cyl;
using geo::Family;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

bool within(const mc::Estimate& e, double target, double z = 3.0) {
  return std::abs(e.mean - target) <= z * e.se + 1e-12;
}

SampledPath draw(const ManifoldModel& m, const Point& x, const Partition& p, std::uint64_t i) {
  mc::Stream rng({17, 17, i, 0});
  return path::sample_path(m, x, p, rng);
}

}  // namespace

TEST_CASE("evaluate: constants, coordinates, products") {
  const auto flat = ManifoldModel::euclidean(2);
  const Partition p = Partition::uniform(2.0, 4);
  const SampledPath g = draw(flat, flat.origin(), p, 0);
  CHECK(evaluate(CylinderFunction::constant(2.5, 1.0), g) == 2.5);
  const auto F = CylinderFunction::parse("linear:t=1,axis=0");
  CHECK(evaluate(F, g) == g.points[2].coords(0));
  const auto G = CylinderFunction::parse("sin:t=2,axis=1,w=0.7");
  CHECK(evaluate(F * G, g) == doctest::Approx(evaluate(F, g) * evaluate(G, g)));
  CHECK_THROWS_AS(evaluate(CylinderFunction::parse("linear:t=0.3"), g), PartitionMismatch);
  CHECK_THROWS_AS(CylinderFunction::parse("linear:t=1,bogus=2"), InvalidArgument);
  CHECK_THROWS_AS(CylinderFunction::parse("warp:t=1"), UnsupportedFamily);
}

TEST_CASE("parallel gradient of single-time and two-point functions") {
  const auto s = ManifoldModel::sphere(1.0, 32);
  const auto F = CylinderFunction::parse("sin:t=0.5,axis=0,w=1.3");
  const Partition p = Partition::uniform(1.0, 4);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const SampledPath g = draw(s, s.origin(), p, i);
    const double expect = std::sqrt(F.single_time()->first.gradient_norm_sq(s, g.points[2]));
    CHECK(parallel_gradient(F, g, 0.3).norm() == doctest::Approx(expect).epsilon(1e-10));
    CHECK(parallel_gradient(F, g, 0.5).norm() == doctest::Approx(expect).epsilon(1e-10));
    CHECK(parallel_gradient(F, g, 0.6).norm() == 0.0);
    CHECK(h1_norm_sq(F, g) == doctest::Approx(0.5 * expect * expect).epsilon(1e-10));
    CHECK(h1_norm_sq(F.scaled(3.0), g) == doctest::Approx(9.0 * h1_norm_sq(F, g)));
  }

  const auto flat = ManifoldModel::euclidean(2);
  const ScalarFunction u1{Family::Sin, 0, 1.0}, u2{Family::Cos, 1, 2.0};
  const auto T = CylinderFunction::twopoint(u1, 0.25, u2, 1.0);
  const SampledPath g = draw(flat, flat.origin(), p, 3);
  const Vec expect = u2.gradient(flat, g.points[4]).components;
  CHECK((parallel_gradient(T, g, 0.5) - expect).norm() < 1e-14);
  CHECK(h1_norm_sq(CylinderFunction::constant(4.0), g) == 0.0);
}

TEST_CASE("parallel gradients are piecewise constant and Lipschitz-bounded") {
  const auto m = ManifoldModel::sphere(1.0, 32);
  mc::Stream rng({2, 2, 2, 2});
  for (int r = 0; r < 5; ++r) {
    const auto F = CylinderFunction::random(m, 1.0, rng);
    const Partition p = F.partition();
    const SampledPath g = draw(m, m.origin(), p, static_cast<std::uint64_t>(r));
    const auto prof = parallel_profile(F, g);
    double prev = 0.0;
    for (std::size_t j = 0; j < prof.times.size(); ++j) {
      const double mid = 0.5 * (prev + prof.times[j]);
      CHECK((prof.at(mid) - prof.at(prof.times[j])).norm() == 0.0);
      prev = prof.times[j];
    }
    // |grad_s F| <= sqrt(N) |grad u| on the product space.
    double lip2 = 0.0;
    const auto y = marginals(F, g);
    for (std::size_t j = 0; j < y.size(); ++j) lip2 += F.gradient(m, y, j).squaredNorm();
    const double lip = std::sqrt(lip2);
    CHECK(prof.initial().norm() <= std::sqrt(static_cast<double>(y.size())) * lip + 1e-12);
  }
}

TEST_CASE("analytic gradients agree with central differences") {
  for (const auto& m : {ManifoldModel::euclidean(2, 1.0), ManifoldModel::circle(3.0), ManifoldModel::sphere(1.0)}) {
    mc::Stream rng({4, mc::tag_of(m.spec()), 0, 0});
    for (int r = 0; r < 10; ++r) {
      const auto F = CylinderFunction::random(m, 1.0, rng);
      F.validate(m);
      const SampledPath g = draw(m, m.origin(), F.partition(), static_cast<std::uint64_t>(r));
      const auto y = marginals(F, g);
      for (std::size_t j = 0; j < y.size(); ++j) {
        const Vec a = F.gradient(m, y, j), b = F.gradient_fd(m, y, j);
        CHECK((a - b).norm() <= 1e-4 * std::max(1.0, a.norm()));
      }
    }
  }
}

TEST_CASE("pushforward means against closed forms") {
  const auto flat = ManifoldModel::euclidean(1);
  const mc::StreamKey key{5, 5, 0, 0};
  const mc::Estimate c = pushforward_mean(CylinderFunction::constant(3.0), flat, flat.origin(), 100, key);
  CHECK(c.mean == 3.0);
  CHECK(c.se == 0.0);
  CHECK(within(pushforward_mean(CylinderFunction::parse("linear:t=1"), flat, flat.origin(), 100000, key), 0.0));
  const Point x = flat.point(vec({0.9}));
  CHECK(within(pushforward_mean(CylinderFunction::parse("sin:t=2"), flat, x, 100000, key),
               std::exp(-1.0) * std::sin(0.9)));
}

TEST_CASE("phi flow is exponential for Ric + Hess f = c g") {
  const std::vector<double> t{0.1, 0.5, 1.0, 2.0};
  const std::vector<std::pair<ManifoldModel, double>> cases{
      {ManifoldModel::euclidean(2), 0.0}, {ManifoldModel::euclidean(1, 1.0), 1.0}, {ManifoldModel::sphere(1.0), 1.0}};
  for (const auto& [m, c] : cases) {
    const auto phi = phi_flow(m, t);
    CHECK((phi[0] - Mat::Identity(m.dimension(), m.dimension())).norm() == 0.0);
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double expect = std::exp(0.5 * c * t[k]);
      CHECK((phi[k + 1] - expect * Mat::Identity(m.dimension(), m.dimension())).norm() < 1e-8);
    }
  }
}

TEST_CASE("Bismut estimator: exact in the flat linear case, OU oracle") {
  const auto flat = ManifoldModel::euclidean(2);
  const auto F = CylinderFunction::parse("linear:t=1,axis=1,c=2");
  const GradientSample g = pushforward_gradient_bismut(F, flat, flat.origin(), 100, {6, 6, 0, 0});
  CHECK((g.mean - vec({0, 2})).norm() < 1e-14);
  CHECK(g.se.norm() == 0.0);

  const auto ou = ManifoldModel::euclidean(1, 1.0);
  for (double t : {0.5, 1.0, 2.0}) {
    const auto G = CylinderFunction::single({Family::Linear, 0}, t);
    const GradientSample b = pushforward_gradient_bismut(G, ou, ou.point(vec({0.3})), 1000, {6, 7, 0, 0});
    CHECK(b.mean(0) == doctest::Approx(std::exp(-0.5 * t)).epsilon(1e-12));
  }
  const auto S = CylinderFunction::parse("sin:t=1,w=1.5");
  const Point x = ou.point(vec({0.4}));
  const GradientSample b = pushforward_gradient_bismut(S, ou, x, 100000, {6, 8, 0, 0});
  // d/dx of e^{-w^2 s^2/2} sin(w e^{-t/2} x), s^2 = 1 - e^{-t}
  const double a = std::exp(-0.5), s2 = 1 - std::exp(-1.0);
  const double expect = std::exp(-1.125 * s2) * 1.5 * a * std::cos(1.5 * a * 0.4);
  CHECK(std::abs(b.mean(0) - expect) < 3 * b.se(0));
}

TEST_CASE("finite-difference estimator") {
  const auto flat = ManifoldModel::euclidean(2);
  const mc::StreamKey key{7, 7, 0, 0};
  const auto zero = pushforward_gradient_fd(CylinderFunction::constant(1.0), flat, flat.origin(), vec({1, 0}), 0.01, 100, key);
  CHECK(zero.est.mean == 0.0);
  const auto lin = pushforward_gradient_fd(CylinderFunction::parse("linear:t=1,axis=0,c=3"), flat, flat.origin(),
                                           vec({1, 0}), 0.01, 100, key);
  CHECK(lin.est.mean == doctest::Approx(3.0).epsilon(1e-10));

  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const auto S = CylinderFunction::parse("sin:t=1,w=1.5");
  const Point x = ou.point(vec({0.4}));
  const auto h1 = pushforward_gradient_fd(S, ou, x, vec({1}), 0.02, 20000, key);
  const auto h2 = pushforward_gradient_fd(S, ou, x, vec({1}), 0.01, 20000, key);
  // Taylor: the central difference bias is about eta^2 |f'''| / 6 <= 1e-3 here.
  CHECK(std::abs(h1.est.mean - h2.est.mean) < 3 * std::hypot(h1.est.se, h2.est.se) + 1e-3);
  CHECK_THROWS_AS(pushforward_gradient_fd(S, ou, x, vec({1}), 0.0, 100, key), InvalidArgument);
}

TEST_CASE("Bismut and finite differences agree on random cylinder functions") {
  const std::vector<ManifoldModel> models{ManifoldModel::euclidean(2), ManifoldModel::euclidean(1, 1.0),
                                          ManifoldModel::circle(2 * std::numbers::pi),
                                          ManifoldModel::sphere(1.0, 32)};
  for (const auto& m : models) {
    mc::Stream rng({8, mc::tag_of(m.spec()), 0, 0});
    const Point x = m.kind() == geo::Kind::Sphere2 ? m.origin() : m.point(Vec::Constant(m.ambient_dimension(), 0.3));
    const geo::Frame f0 = m.canonical_frame(x);
    for (int r = 0; r < 5; ++r) {
      const auto F = CylinderFunction::random(m, 0.5, rng);
      const std::size_t n = m.kind() == geo::Kind::Sphere2 ? 4000 : 20000;
      const GradientSample b = pushforward_gradient_bismut(F, m, x, n, {9, 1, 0, static_cast<std::uint64_t>(r)});
      for (int i = 0; i < m.dimension(); ++i) {
        const auto fd = pushforward_gradient_fd(F, m, x, f0.columns.col(i), 1e-3, n, {9, 2, 0, static_cast<std::uint64_t>(r)});
        const double tol = 3 * std::hypot(b.se(i), fd.est.se) + 1e-5;
        CHECK_MESSAGE(std::abs(b.mean(i) - fd.est.mean) <= tol, m.spec() << " " << F.name());
      }
    }
  }
}

TEST_CASE("second-difference Laplacian on the OU model") {
  // Delta_f H_1 sin at x for OU: 2 d/dt H_t sin evaluated through the closed form.
  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const auto S = CylinderFunction::parse("sin:t=1");
  const Point x = ou.point(vec({0.6}));
  const auto lap = pushforward_laplacian(S, ou, x, 0.05, 40000, {10, 10, 0, 0});
  const double h = 1e-4;
  const ScalarFunction u{Family::Sin, 0, 1.0};
  const double dt = (geo::heat_flow_closed_form(ou, u, 1 + h)(x) - geo::heat_flow_closed_form(ou, u, 1 - h)(x)) / (2 * h);
  CHECK(std::abs(lap.est.mean - 2 * dt) < 3 * lap.est.se + 2e-3);
}

TEST_CASE("curvature weights telescope to e^{kappa T/2} - 1") {
  const std::vector<double> t{0.2, 0.7, 1.5};
  const auto w = curvature_weights(1.3, t);
  CHECK(w[0] + w[1] + w[2] == doctest::Approx(std::exp(0.65 * 1.5) - 1));
  for (double v : curvature_weights(0.0, t)) CHECK(v == 0.0);
}
