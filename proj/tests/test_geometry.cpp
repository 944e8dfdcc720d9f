#include <cmath>
#include <numbers>
#include <vector>

#include "brpath/errors.hpp"
#include "brpath/geometry.hpp"
#include "doctest.h"

using namespace brpath;
using namespace brpath::geo;
using std::numbers::pi;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}
Vec v1(double a) { return Vec::Constant(1, a); }

Point random_sphere_point(const ManifoldModel& m, mc::Stream& rng) {
  return m.point(v3(rng.normal(), rng.normal(), rng.normal()));
}

}  // namespace

TEST_CASE("distance examples") {
  const auto flat = ManifoldModel::euclidean(2);
  CHECK(flat.distance(flat.point(v2(0, 0)), flat.point(v2(3, 4))) == doctest::Approx(5));
  const auto circ = ManifoldModel::circle(2 * pi);
  CHECK(circ.distance(circ.point(v1(0)), circ.point(v1(1.5 * pi))) == doctest::Approx(pi / 2));
  const auto s = ManifoldModel::sphere(1.0);
  CHECK(s.distance(s.point(v3(0, 0, 1)), s.point(v3(0, 0, -1))) == doctest::Approx(pi));
}

TEST_CASE("exp and log examples") {
  const auto flat = ManifoldModel::euclidean(2);
  const Point y = flat.exp_map({flat.point(v2(1, 0)), v2(0, 2)});
  CHECK(y.coords(1) == doctest::Approx(2));
  const auto s = ManifoldModel::sphere(1.0);
  const Point south = s.exp_map({s.origin(), v3(pi, 0, 0)});
  CHECK(south.coords(2) == doctest::Approx(-1));
  const auto circ = ManifoldModel::circle(2 * pi);
  CHECK(circ.exp_map({circ.point(v1(0)), v1(pi / 2)}).coords(0) == doctest::Approx(pi / 2));
  CHECK(circ.log_map(circ.point(v1(0)), circ.point(v1(1.5 * pi))).components(0) ==
        doctest::Approx(-pi / 2));

  const TangentVector q = s.log_map(s.origin(), s.point(v3(1, 0, 0)));
  CHECK(q.components(0) == doctest::Approx(pi / 2));
  CHECK(std::abs(q.components(1)) < 1e-15);
  CHECK_THROWS_AS(s.log_map(s.origin(), s.point(v3(0, 0, -1))), CutLocus);
}

TEST_CASE("exp/log inverse and transport isometry on random points") {
  const auto s = ManifoldModel::sphere(1.7);
  mc::Stream rng({1, 2, 3, 4});
  for (int i = 0; i < 500; ++i) {
    const Point x = random_sphere_point(s, rng);
    const Point y = random_sphere_point(s, rng);
    if (s.distance(x, y) > 0.99 * pi * s.radius()) continue;
    const TangentVector v = s.log_map(x, y);
    CHECK(std::abs(v.components.dot(x.coords)) < 1e-10);
    CHECK(std::abs(v.components.norm() - s.distance(x, y)) < 1e-9);
    CHECK((s.exp_map(v).coords - y.coords).norm() < 1e-9);

    const TangentVector a = s.tangent(x, v3(rng.normal(), rng.normal(), rng.normal()));
    const TangentVector b = s.tangent(x, v3(rng.normal(), rng.normal(), rng.normal()));
    const TangentVector pa = s.transport(a, y), pb = s.transport(b, y);
    CHECK(std::abs(pa.components.dot(pb.components) - a.components.dot(b.components)) < 1e-9);
    CHECK(std::abs(pa.components.dot(y.coords)) < 1e-9);

    const Frame f = s.canonical_frame(x);
    const Frame g = s.parallel_transport_geodesic(s.parallel_transport_geodesic(f, y), x);
    CHECK((g.columns - f.columns).norm() < 1e-9);
  }
}

TEST_CASE("sphere transport fixes the normal direction along a meridian") {
  const auto s = ManifoldModel::sphere(1.0);
  Frame f{s.origin(), Mat(3, 2)};
  f.columns << 1, 0, 0, 1, 0, 0;
  const Frame g = s.parallel_transport_geodesic(f, s.point(v3(1, 0, 0)));
  CHECK((g.columns.col(1) - v3(0, 1, 0)).norm() < 1e-12);
  CHECK((g.columns.col(0) - v3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("holonomy of the octant triangle is a quarter turn") {
  const auto s = ManifoldModel::sphere(1.0);
  const Frame f = s.canonical_frame(s.origin());
  Frame g = s.parallel_transport_geodesic(f, s.point(v3(1, 0, 0)));
  g = s.parallel_transport_geodesic(g, s.point(v3(0, 1, 0)));
  g = s.parallel_transport_geodesic(g, s.origin());
  const Vec e = f.columns.col(0), ge = g.columns.col(0);
  const double angle = std::atan2(std::abs(e(0) * ge(1) - e(1) * ge(0)), e.dot(ge));
  CHECK(angle == doctest::Approx(pi / 2).epsilon(1e-12));
}

TEST_CASE("frames are orthonormal") {
  const auto s = ManifoldModel::sphere(2.0);
  mc::Stream rng({5, 5, 5, 5});
  for (int i = 0; i < 200; ++i) {
    const Frame f = s.canonical_frame(random_sphere_point(s, rng));
    CHECK((f.columns.transpose() * f.columns - Mat::Identity(2, 2)).norm() < 1e-10);
    CHECK((f.columns.transpose() * f.base.coords).norm() < 1e-10);
  }
  const Frame pole = s.canonical_frame(s.point(v3(0, 0, -2)));
  CHECK((pole.columns.transpose() * pole.columns - Mat::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("bakry_emery values and homogeneity") {
  const auto flat = ManifoldModel::euclidean(2);
  const auto ou = ManifoldModel::euclidean(1, 1.0);
  const auto s = ManifoldModel::sphere(1.0);
  CHECK(flat.bakry_emery({flat.origin(), v2(1, 0)}) == 0.0);
  CHECK(ou.bakry_emery({ou.origin(), v1(1)}) == 1.0);
  CHECK(s.bakry_emery({s.origin(), v3(0, 1, 0)}) == doctest::Approx(1.0));
  const TangentVector v{s.origin(), v3(0.3, -0.2, 0)};
  const TangentVector cv{s.origin(), 2.5 * v.components};
  CHECK(s.bakry_emery(cv) == doctest::Approx(6.25 * s.bakry_emery(v)).epsilon(1e-15));
}

TEST_CASE("sphere Ricci via a Jacobi-field finite difference") {
  // Geodesics from the pole separated by angle a spread as r sin(t/r) a; the
  // second derivative of the spread at t gives -K * spread, so K = Ric / (n-1).
  const auto s = ManifoldModel::sphere(1.0);
  const double a = 1e-4, t = 0.7, h = 1e-3;
  auto spread = [&](double tt) {
    const Point p = s.exp_map({s.origin(), v3(tt, 0, 0)});
    const Point q = s.exp_map({s.origin(), v3(tt * std::cos(a), tt * std::sin(a), 0)});
    return s.distance(p, q);
  };
  const double j = spread(t);
  const double jpp = (spread(t + h) - 2 * j + spread(t - h)) / (h * h);
  CHECK(-jpp / j == doctest::Approx(s.bakry_emery_constant()).epsilon(1e-4));
}

TEST_CASE("heat kernel sampling moments") {
  mc::Stream rng({21, 0, 0, 0});
  const auto flat = ManifoldModel::euclidean(1);
  mc::Accumulator var;
  for (int i = 0; i < 100000; ++i) {
    const double y = flat.heat_kernel_sample(flat.origin(), 1.0, rng).coords(0);
    var.add(y * y);
  }
  CHECK(std::abs(var.mean() - 1.0) < 3 * var.estimate().se);

  const auto ou = ManifoldModel::euclidean(1, 1.0);
  mc::Accumulator m1, m2;
  for (int i = 0; i < 100000; ++i) {
    const double y = ou.heat_kernel_sample(ou.point(v1(2.0)), 50.0, rng).coords(0);
    m1.add(y);
    m2.add(y * y);
  }
  CHECK(std::abs(m1.mean()) < 3 * m1.estimate().se);
  CHECK(std::abs(m2.mean() - 1.0) < 3 * m2.estimate().se);

  const auto circ = ManifoldModel::circle(2 * pi);
  std::vector<double> th(100000);
  for (auto& x : th) x = circ.heat_kernel_sample(circ.point(v1(1.0)), 100.0, rng).coords(0);
  CHECK(mc::ks_statistic(th, [](double x) { return x / (2 * pi); }) < 0.01);
}

TEST_CASE("exact kernels satisfy the semigroup property") {
  const std::vector<ManifoldModel> models{ManifoldModel::euclidean(1), ManifoldModel::euclidean(1, 1.0),
                                          ManifoldModel::circle(3.0)};
  for (const auto& m : models) {
    mc::Stream rng({8, mc::tag_of(m.spec()), 0, 0});
    std::vector<double> direct(10000), twostage(10000);
    const Point x = m.point(v1(0.4));
    for (auto& d : direct) d = m.heat_kernel_sample(x, 0.8, rng).coords(0);
    for (auto& d : twostage) d = m.heat_kernel_sample(m.heat_kernel_sample(x, 0.3, rng), 0.5, rng).coords(0);
    CHECK(mc::ks_two_sample(direct, twostage).p_value > 0.001);
  }
  mc::Stream rng({});
  CHECK_THROWS_AS(ManifoldModel::euclidean(1).heat_kernel_sample(Point{v1(0)}, 0.0, rng), NonPositiveTime);
}

TEST_CASE("sphere random walk: halving the substeps moves E[x3] by O(1/substeps)") {
  // E[x3(t)] = r e^{-t/r^2} from the north pole.
  const double t = 0.5;
  auto mean_z = [&](int substeps) {
    const auto s = ManifoldModel::sphere(1.0, substeps);
    mc::Stream rng({99, static_cast<std::uint64_t>(substeps), 0, 0});
    mc::Accumulator acc;
    for (int i = 0; i < 40000; ++i) acc.add(s.heat_kernel_sample(s.origin(), t, rng).coords(2));
    return acc.estimate();
  };
  const mc::Estimate e64 = mean_z(64), e32 = mean_z(32);
  const double exact = std::exp(-t);
  CHECK(std::abs(e64.mean - exact) < 3 * e64.se + 0.01);
  CHECK(std::abs(e32.mean - exact) < 3 * e32.se + 0.02);
}

TEST_CASE("closed-form heat flow") {
  const auto flat = ManifoldModel::euclidean(2);
  const ScalarFunction lin{Family::Linear, 0};
  CHECK(heat_flow_closed_form(flat, lin, 5.0)(flat.point(v2(0.7, 1))) == doctest::Approx(0.7));
  const ScalarFunction sn{Family::Sin, 0, 1.0};
  CHECK(heat_flow_closed_form(flat, sn, 2.0)(flat.point(v2(0.7, 1))) ==
        doctest::Approx(std::exp(-1.0) * std::sin(0.7)));
  const auto ou = ManifoldModel::euclidean(1, 1.0);
  CHECK(heat_flow_closed_form(ou, lin, 1.3)(ou.point(v1(2))) == doctest::Approx(2 * std::exp(-0.65)));
  CHECK_THROWS_AS(heat_flow_closed_form(ManifoldModel::sphere(1), lin, 1.0), UnsupportedFamily);
  CHECK_THROWS_AS(sn.validate(ManifoldModel::circle(3.0)), UnsupportedFamily);
  CHECK_THROWS_AS(lin.validate(ManifoldModel::circle(2 * pi)), UnsupportedFamily);
}

TEST_CASE("model spec round trip and validation") {
  for (const char* spec : {"euclidean:n=2,kf=0", "ou:n=1,kf=1", "circle:l=6.2831853", "sphere2:r=1,substeps=64"}) {
    const auto m = ManifoldModel::parse(spec);
    CHECK(ManifoldModel::parse(m.spec()).spec() == m.spec());
  }
  CHECK(ManifoldModel::parse("sphere2:r=1").dimension() == 2);
  CHECK(ManifoldModel::parse("sphere2:r=1").exactness() == Exactness::RandomWalk);
  CHECK(ManifoldModel::parse("circle").exactness() == Exactness::ExactKernel);
  CHECK_THROWS_AS(ManifoldModel::parse("torus:n=2"), InvalidArgument);
  CHECK_THROWS_AS(ManifoldModel::parse("ou:n=1,kf=-1"), InvalidArgument);
  CHECK_THROWS_AS(ManifoldModel::parse("ou:n=1,q=2"), InvalidArgument);
}
