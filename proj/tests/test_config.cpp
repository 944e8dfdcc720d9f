#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

#include "brpath/config.hpp"
#include "brpath/errors.hpp"
#include "brpath/experiments.hpp"
#include "doctest.h"

using namespace brpath;

namespace {

const char* kMinimal =
    "[run]\n"
    "experiment = r2\n"
    "model = euclidean:n=2,kf=0\n"
    "seed = 42\n"
    "[params]\n"
    "paths = 1000\n";

bool has(const ParseResult& r, ConfigErrorKind kind, int line) {
  for (const auto& e : r.errors) {
    if (e.kind == kind && e.line == line) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("minimal r2 config gets defaults") {
  const auto r = parse_config(kMinimal);
  REQUIRE(r.ok());
  const auto& c = *r.config;
  CHECK(c.experiment == "r2");
  CHECK(c.seed == 42);
  CHECK(c.paths == 1000);
  CHECK(c.inner == 64);
  CHECK(!c.kappa.has_value());
  CHECK(c.T == std::vector<double>{1.0});
  CHECK(c.estimator == "bismut");
  CHECK(c.z == 3.0);
  CHECK(c.text == kMinimal);
}

TEST_CASE("negative kappa is a type error on its line") {
  const auto r = parse_config(std::string(kMinimal) + "kappa = -1\n");
  REQUIRE(!r.ok());
  CHECK(has(r, ConfigErrorKind::TypeError, 7));
  CHECK(r.errors.front().format().rfind("line 7: TypeError", 0) == 0);
}

TEST_CASE("duplicate keys name both lines") {
  const auto r = parse_config(std::string(kMinimal) + "paths = 5\n");
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].kind == ConfigErrorKind::UnknownKey);
  CHECK(r.errors[0].line == 7);
  CHECK(r.errors[0].message.find("lines 6 and 7") != std::string::npos);
}

TEST_CASE("every error is reported, not just the first") {
  const auto r = parse_config(
      "[run]\n"
      "experiment = r9\n"
      "colour = blue\n"
      "[params]\n"
      "paths = many\n"
      "steps = 0\n"
      "[extra]\n"
      "loose line\n");
  CHECK(has(r, ConfigErrorKind::TypeError, 2));
  CHECK(has(r, ConfigErrorKind::UnknownKey, 3));
  CHECK(has(r, ConfigErrorKind::TypeError, 5));
  CHECK(has(r, ConfigErrorKind::TypeError, 6));
  CHECK(has(r, ConfigErrorKind::UnknownKey, 7));
  CHECK(has(r, ConfigErrorKind::TypeError, 8));
  CHECK(has(r, ConfigErrorKind::MissingRequired, 0));
  int missing = 0;
  for (const auto& e : r.errors) missing += e.kind == ConfigErrorKind::MissingRequired;
  CHECK(missing == 2);  // model and seed
  CHECK(!r.config.has_value());
}

TEST_CASE("fields are validated against the model") {
  auto with = [](const std::string& model, const std::string& params, const std::string& exp = "r2") {
    return parse_config("[run]\nexperiment = " + exp + "\nmodel = " + model + "\nseed = 1\n[params]\n" + params);
  };
  CHECK(has(with("torus:n=2", ""), ConfigErrorKind::TypeError, 3));
  CHECK(has(with("circle:l=3", "testfn = linear:t=1\n"), ConfigErrorKind::TypeError, 6));
  CHECK(with("circle:l=6.283185307179586", "testfn = sin:t=1; cos:t=0.5,w=2\n").ok());
  CHECK(has(with("euclidean:n=2", "x = 1,2,3\n"), ConfigErrorKind::TypeError, 6));
  CHECK(has(with("sphere2:r=1", "x = 0,1\n"), ConfigErrorKind::TypeError, 6));
  CHECK(has(with("cone:l=3", ""), ConfigErrorKind::TypeError, 3));
  CHECK(with("cone:l=3", "radius = 2\n", "cone-holonomy").ok());
  CHECK(has(with("ou:n=1,kf=1", "function = bogus\n", "be-suite"), ConfigErrorKind::TypeError, 6));
  CHECK(has(with("euclidean:n=2", "d = 1\n", "dimensional"), ConfigErrorKind::TypeError, 6));
  CHECK(has(with("euclidean:n=2", "k = 4\n"), ConfigErrorKind::TypeError, 6));
  CHECK(has(with("euclidean:n=2", "v = 0,0\n"), ConfigErrorKind::TypeError, 6));
}

TEST_CASE("scalar function specs and exact curvature bounds") {
  const auto u = parse_scalar_function("sin:axis=1,w=2.5,c=3");
  CHECK(u.family == geo::Family::Sin);
  CHECK(u.axis == 1);
  CHECK(u.param == 2.5);
  CHECK(u.scale == 3.0);
  CHECK(parse_scalar_function("exp").param == 0.5);
  CHECK_THROWS_AS(parse_scalar_function("sin:q=1"), InvalidArgument);
  CHECK(exact_kappa(geo::ManifoldModel::euclidean(2, 0.7)) == 0.7);
  CHECK(exact_kappa(geo::ManifoldModel::circle(2.0)) == 0.0);
  CHECK(exact_kappa(geo::ManifoldModel::sphere(2.0)) == 0.25);
}

TEST_CASE("runs: flat r2 passes, holonomy of the half cone, exit codes") {
  const auto r = run_experiment(*parse_config(kMinimal).config);
  CHECK(r.rows == 1);
  CHECK(r.verdict == mc::Verdict::Pass);
  CHECK(r.csv.find("\nr2,\"euclidean:n=2,kf=0\",") != std::string::npos);

  const auto h = run_experiment(
      *parse_config("[run]\nexperiment = cone-holonomy\nmodel = cone:l=3.141592653589793\nseed = 1\n").config);
  CHECK(h.verdict == mc::Verdict::Pass);
  CHECK(h.csv.find(",3.141592654,3.141592654,0,pass") != std::string::npos);

  CHECK(exit_code(mc::Verdict::Pass) == 0);
  CHECK(exit_code(mc::Verdict::Fail) == 2);
  CHECK(exit_code(mc::Verdict::Inconclusive) == 3);
}

TEST_CASE("csv bytes do not depend on the worker count") {
  const auto cfg = *parse_config(
                        "[run]\nexperiment = r3\nmodel = sphere2:r=1,substeps=8\nseed = 5\n[params]\n"
                        "paths = 300\ntestfn = twopoint:t1=0.5,t2=1,f1=sin,f2=cos\n")
                        .config;
  setenv("BRPATH_WORKERS", "1", 1);
  const std::string one = run_experiment(cfg).csv;
  setenv("BRPATH_WORKERS", "4", 1);
  const std::string four = run_experiment(cfg).csv;
  unsetenv("BRPATH_WORKERS");
  CHECK(one == four);
}
