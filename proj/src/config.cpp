#include "brpath/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "brpath/cylinder.hpp"
#include "brpath/errors.hpp"
#include "brpath/metricspace.hpp"
#include "brpath/params.hpp"

namespace brpath {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string shortest(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Entry {
  std::string value;
  int line = 0;
};

const std::map<std::string, std::vector<std::string>>& known_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"run", {"experiment", "model", "seed", "output"}},
      {"params",
       {"testfn", "function", "kappa", "x", "T", "t", "paths", "inner", "continuations", "pointwise", "steps",
        "eps", "estimator", "d", "v", "basis", "radius", "sides", "turns", "k", "gaps", "z"}},
  };
  return keys;
}

bool is_cone_experiment(const std::string& id) { return id.rfind("cone-", 0) == 0; }

class Reader {
 public:
  Reader(std::map<std::string, Entry> entries, std::vector<ConfigError>& errors)
      : entries_(std::move(entries)), errors_(errors) {}

  const Entry* find(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  void type_error(const std::string& key, const std::string& what) {
    const Entry* e = find(key);
    errors_.push_back({ConfigErrorKind::TypeError, e ? e->line : 0, key + ": " + what});
  }

  template <class Fn>
  void with(const std::string& key, Fn&& fn) {
    const Entry* e = find(key);
    if (!e) return;
    try {
      fn(e->value);
    } catch (const std::exception& ex) {
      errors_.push_back({ConfigErrorKind::TypeError, e->line, key + ": " + ex.what()});
    }
  }

  void number(const std::string& key, double& out, double lo, bool open_lo) {
    with(key, [&](const std::string& s) {
      const double v = parse_double(s, key);
      if (!std::isfinite(v) || v < lo || (open_lo && v == lo)) {
        throw InvalidArgument(std::string("must be ") + (open_lo ? "> " : ">= ") + shortest(lo));
      }
      out = v;
    });
  }

  template <class I>
  void integer(const std::string& key, I& out, long long lo, long long hi = 1LL << 40) {
    with(key, [&](const std::string& s) {
      long long v = 0;
      std::size_t used = 0;
      try {
        v = std::stoll(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != s.size()) throw InvalidArgument("expected an integer, got '" + s + "'");
      if (v < lo || v > hi) {
        throw InvalidArgument("must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      }
      out = static_cast<I>(v);
    });
  }

  void numbers(const std::string& key, std::vector<double>& out, double lo, bool open_lo) {
    with(key, [&](const std::string& s) {
      std::vector<double> v;
      for (const auto& item : split(s, ',')) {
        const double x = parse_double(item, key);
        if (!std::isfinite(x) || x < lo || (open_lo && x == lo)) {
          throw InvalidArgument("every value must be " + std::string(open_lo ? "> " : ">= ") +
                                shortest(lo));
        }
        v.push_back(x);
      }
      if (v.empty()) throw InvalidArgument("empty list");
      out = std::move(v);
    });
  }

 private:
  std::map<std::string, Entry> entries_;
  std::vector<ConfigError>& errors_;
};

}  // namespace

std::string_view to_string(ConfigErrorKind k) {
  switch (k) {
    case ConfigErrorKind::UnknownKey: return "UnknownKey";
    case ConfigErrorKind::TypeError: return "TypeError";
    case ConfigErrorKind::MissingRequired: return "MissingRequired";
  }
  return "?";
}

std::string ConfigError::format() const {
  std::string s = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
  return s + std::string(to_string(kind)) + ": " + message;
}

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{
      "r2",          "r3",          "r45",           "r6-frequency",      "r7-logsob",
      "be-suite",    "finite-frequency", "dimensional", "cone-holonomy",  "cone-parallelogram",
      "cone-br-probe", "martingale-moments", "ito-isometry", "girsanov"};
  return ids;
}

geo::ScalarFunction parse_scalar_function(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string family(spec.substr(0, colon));
  geo::ScalarFunction u;
  u.family = geo::parse_family(family);
  u.param = u.family == geo::Family::Exp ? 0.5 : 1.0;
  if (colon == std::string_view::npos) return u;
  for (const auto& [k, v] : parse_params(spec.substr(colon + 1), spec)) {
    if (k == "axis") {
      u.axis = parse_int(v, "axis");
    } else if (k == "w") {
      u.param = parse_double(v, "w");
    } else if (k == "c") {
      u.scale = parse_double(v, "c");
    } else {
      throw InvalidArgument("function '" + std::string(spec) + "': unknown parameter '" + k + "'");
    }
  }
  return u;
}

double exact_kappa(const geo::ManifoldModel& model) {
  switch (model.kind()) {
    case geo::Kind::EuclideanWeighted: return model.weight_coefficient();
    case geo::Kind::Circle: return 0.0;
    case geo::Kind::Sphere2: return 1.0 / (model.radius() * model.radius());
  }
  return 0.0;
}

ParseResult parse_config(std::string_view text) {
  ParseResult result;
  auto& errors = result.errors;
  std::map<std::string, Entry> entries;
  std::string section;
  int line_no = 0;
  std::istringstream is{std::string(text)};
  std::string raw;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back({ConfigErrorKind::TypeError, line_no, "malformed section header '" + line + "'"});
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!known_keys().count(section)) {
        errors.push_back({ConfigErrorKind::UnknownKey, line_no, "unknown section [" + section + "]"});
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back({ConfigErrorKind::TypeError, line_no, "expected key = value, got '" + line + "'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto sec = known_keys().find(section);
    if (section.empty()) {
      errors.push_back({ConfigErrorKind::UnknownKey, line_no, "key '" + key + "' outside any section"});
      continue;
    }
    if (sec == known_keys().end()) continue;  // already reported
    if (std::find(sec->second.begin(), sec->second.end(), key) == sec->second.end()) {
      errors.push_back({ConfigErrorKind::UnknownKey, line_no, "unknown key '" + key + "' in [" + section + "]"});
      continue;
    }
    const auto [it, fresh] = entries.emplace(key, Entry{value, line_no});
    if (!fresh) {
      errors.push_back({ConfigErrorKind::UnknownKey, line_no,
                        "duplicate key '" + key + "' (lines " + std::to_string(it->second.line) + " and " +
                            std::to_string(line_no) + ")"});
    }
  }

  ExperimentConfig cfg;
  cfg.text = std::string(text);
  Reader r(entries, errors);
  for (const char* key : {"experiment", "model", "seed"}) {
    if (!r.find(key)) errors.push_back({ConfigErrorKind::MissingRequired, 0, "[run] " + std::string(key)});
  }
  r.with("experiment", [&](const std::string& s) {
    const auto& ids = experiment_ids();
    if (std::find(ids.begin(), ids.end(), s) == ids.end()) throw InvalidArgument("unknown experiment '" + s + "'");
    cfg.experiment = s;
  });
  r.with("seed", [&](const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || s.front() == '-') {
      throw InvalidArgument("expected an unsigned 64-bit integer, got '" + s + "'");
    }
    cfg.seed = v;
  });
  r.with("output", [&](const std::string& s) { cfg.output = s; });

  // The model decides how the remaining fields are checked.
  std::optional<geo::ManifoldModel> model;
  r.with("model", [&](const std::string& s) {
    cfg.model = s;
    const bool cone_model = s.rfind("cone", 0) == 0;
    if (is_cone_experiment(cfg.experiment) || (cfg.experiment.empty() && cone_model)) {
      metric::ConeSpace::parse(s);
    } else {
      if (cone_model) throw InvalidArgument("the cone model only runs the cone-* experiments");
      model = geo::ManifoldModel::parse(s);
    }
  });

  r.with("kappa", [&](const std::string& s) {
    const double v = parse_double(s, "kappa");
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("kappa must be finite and >= 0, got '" + s + "'");
    cfg.kappa = v;
  });
  r.numbers("T", cfg.T, 0.0, true);
  r.numbers("t", cfg.t, 0.0, false);
  r.integer("paths", cfg.paths, 1);
  r.integer("inner", cfg.inner, 2);
  r.integer("continuations", cfg.continuations, 4);
  r.integer("pointwise", cfg.pointwise, 1);
  r.integer("steps", cfg.steps, 1, 1 << 16);
  r.numbers("eps", cfg.eps, 0.0, true);
  r.with("estimator", [&](const std::string& s) {
    if (s != "bismut" && s != "fd") throw InvalidArgument("estimator must be bismut or fd");
    cfg.estimator = s;
  });
  r.integer("d", cfg.d, 1, 1000);
  r.integer("basis", cfg.basis, 1, 4096);
  r.number("radius", cfg.radius, 0.0, true);
  r.integer("sides", cfg.sides, 3, 1 << 20);
  r.integer("turns", cfg.turns, 1, 1000);
  r.with("k", [&](const std::string& s) {
    std::vector<int> ks;
    for (const auto& item : split(s, ',')) {
      const int k = parse_int(item, "k");
      if (k < 1 || k > 3) throw InvalidArgument("moment orders must lie in 1..3");
      ks.push_back(k);
    }
    if (ks.empty()) throw InvalidArgument("empty list");
    cfg.k = ks;
  });
  r.numbers("gaps", cfg.gaps, 0.0, true);
  r.number("z", cfg.z, 0.0, true);
  r.with("x", [&](const std::string& s) {
    std::vector<double> v;
    for (const auto& item : split(s, ',')) v.push_back(parse_double(item, "x"));
    if (model) {
      geo::Vec c(static_cast<int>(v.size()));
      for (std::size_t i = 0; i < v.size(); ++i) c(static_cast<int>(i)) = v[i];
      if (c.size() != model->ambient_dimension()) {
        throw InvalidArgument("expected " + std::to_string(model->ambient_dimension()) + " coordinates");
      }
      model->point(c);
    }
    cfg.x = std::move(v);
  });
  r.with("v", [&](const std::string& s) {
    std::vector<double> v;
    for (const auto& item : split(s, ',')) v.push_back(parse_double(item, "v"));
    if (model && static_cast<int>(v.size()) != model->dimension()) {
      throw InvalidArgument("expected " + std::to_string(model->dimension()) + " components");
    }
    if (std::all_of(v.begin(), v.end(), [](double c) { return c == 0.0; })) throw InvalidArgument("v is zero");
    cfg.v = std::move(v);
  });
  r.with("testfn", [&](const std::string& s) {
    cfg.testfns = split(s, ';');
    for (const auto& spec : cfg.testfns) {
      const auto F = cyl::CylinderFunction::parse(spec);
      if (model) F.validate(*model);
    }
  });
  r.with("function", [&](const std::string& s) {
    cfg.functions = split(s, ';');
    for (const auto& spec : cfg.functions) {
      const auto u = parse_scalar_function(spec);
      if (model) u.validate(*model);
    }
  });
  if (model && cfg.d != 0 && cfg.d < model->dimension()) r.type_error("d", "must be >= the model dimension");

  std::stable_sort(errors.begin(), errors.end(), [](const ConfigError& a, const ConfigError& b) {
    return a.line < b.line;
  });
  if (errors.empty()) result.config = std::move(cfg);
  return result;
}

}  // namespace brpath
