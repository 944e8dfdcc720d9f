#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "brpath/geometry.hpp"

namespace brpath {

enum class ConfigErrorKind { UnknownKey, TypeError, MissingRequired };

std::string_view to_string(ConfigErrorKind k);

struct ConfigError {
  ConfigErrorKind kind;
  int line = 0;  // 1-based; 0 when the problem is not tied to a line
  std::string message;
  std::string format() const;  // "line 3: TypeError: ..."
};

/// Experiment ids accepted by the runner.
const std::vector<std::string>& experiment_ids();

/// Config file layout:
///
///   [run]
///   experiment = r2
///   model = ou:n=1,kf=1
///   seed = 42
///   output = r2.csv
///   [params]
///   testfn = linear:t=1; sin:t=1,w=2
///   paths = 20000
///
/// Lists are separated by ';' (function specs) or ',' (numbers).
struct ExperimentConfig {
  std::string experiment;
  std::string model;
  std::uint64_t seed = 0;
  std::string output;  // empty: derived by the caller

  std::vector<std::string> testfns;    // cylinder function specs
  std::vector<std::string> functions;  // scalar function specs, "sin:axis=0,w=1"
  std::optional<double> kappa;         // default: exact bound of the model
  std::vector<double> x;               // start point; empty = model origin
  std::vector<double> T{1.0};
  std::vector<double> t;
  std::size_t paths = 100000;
  std::size_t inner = 64;
  std::size_t continuations = 64;
  std::size_t pointwise = 100;
  int steps = 32;
  std::vector<double> eps{0.1, 0.3};
  std::string estimator = "bismut";
  int d = 0;  // 0: model dimension
  std::vector<double> v;
  int basis = 8;
  double radius = 1.0;
  int sides = 0;
  int turns = 1;
  std::vector<int> k{1, 2};
  std::vector<double> gaps;
  double z = 3.0;

  std::string text;  // the source, echoed into manifests
};

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigError> errors;  // all of them, in line order
  bool ok() const { return errors.empty(); }
};

/// Parses and validates every field (model, functions, ranges) before any
/// sampling can happen.
ParseResult parse_config(std::string_view text);

/// "sin:axis=0,w=1.3,c=1" (w is the frequency or rate, c the scale).
geo::ScalarFunction parse_scalar_function(std::string_view spec);

/// Upper bound of |Ric + Hess f| for the model: kf, 0, 1/r^2.
double exact_kappa(const geo::ManifoldModel& model);

}  // namespace brpath
