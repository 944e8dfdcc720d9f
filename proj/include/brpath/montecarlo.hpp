#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

namespace brpath::mc {

// ---------------------------------------------------------------------------
// Keyed counter-based random streams.
// ---------------------------------------------------------------------------

/// Identifies one independent random substream. Identical keys reproduce
/// identical draws regardless of which worker consumes them.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t tag = 0;    // experiment tag, see tag_of()
  std::uint64_t path = 0;   // path index
  std::uint64_t stage = 0;  // stage / nesting index
};

/// Stable 64-bit tag for a textual experiment name (FNV-1a).
std::uint64_t tag_of(std::string_view name) noexcept;

/// Mixes two 64-bit words into one; used to fold nested indices into a stage.
std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept;

/// Philox4x32-10 generator. The key is derived from (seed, tag, stage), the
/// counter carries (draw index, path index). Satisfies
/// UniformRandomBitGenerator so it plugs into <random> when needed.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(const StreamKey& key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal via Box-Muller (pairs are cached).
  double normal();

  const StreamKey& key() const { return key_; }
  /// Child stream with the stage index folded in; independent of the parent.
  Stream child(std::uint64_t stage) const;

 private:
  void refill();

  StreamKey key_;
  std::array<std::uint32_t, 2> philox_key_{};
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

Stream derive_stream(const StreamKey& key);

// ---------------------------------------------------------------------------
// Estimates and accumulation.
// ---------------------------------------------------------------------------

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // sample standard deviation / sqrt(count)
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// Single-pass accumulator with Neumaier-compensated sums. Variance is taken
/// about the first value seen, which keeps the update stable for data with a
/// large common offset. Merging is associative but not commutative in the
/// last bits; callers merge shards in a fixed order.
class Accumulator {
 public:
  void add(double x);
  void merge(const Accumulator& other);

  std::size_t count() const { return n_; }
  double sum() const { return sum_.value(); }
  double mean() const;
  /// Unbiased sample variance; 0 when count < 2.
  double variance() const;
  Estimate estimate(std::uint64_t seed = 0, std::uint64_t stream = 0) const;

 private:
  struct Neumaier {
    double s = 0.0, c = 0.0;
    void add(double x);
    double value() const { return s + c; }
  };
  std::size_t n_ = 0;
  double shift_ = 0.0;
  Neumaier sum_, d1_, d2_;
};

/// Throws InsufficientSamples for fewer than two values.
Estimate accumulate(std::span<const double> values, std::uint64_t seed = 0,
                    std::uint64_t stream = 0);

/// An estimate together with its per-sample linearized contributions
/// (delta-method influence values shifted so their mean is the estimate).
/// The per-sample values are what a paired comparison differences.
struct SampledEstimate {
  Estimate est;
  std::vector<double> per_sample;
};

SampledEstimate sampled(std::vector<double> values, std::uint64_t seed = 0,
                        std::uint64_t stream = 0);

/// Builds a delta-method estimate for value = g(means) given the gradient of
/// g and the per-sample columns whose means are g's arguments.
SampledEstimate delta_method(double value, std::span<const double> gradient,
                             std::span<const std::vector<double>> columns,
                             std::uint64_t seed = 0, std::uint64_t stream = 0);

// ---------------------------------------------------------------------------
// One-sided comparisons, shared three-sigma convention.
// ---------------------------------------------------------------------------

inline constexpr double kDefaultZ = 3.0;

enum class Design { Independent, Paired };
enum class Verdict { Pass, Fail, Inconclusive };

std::string_view to_string(Verdict v);

struct Comparison {
  double margin = 0.0;   // rhs - lhs
  double se_diff = 0.0;
  double z = 0.0;        // margin / se_diff (0 when se_diff == 0 and margin == 0)
  Verdict verdict = Verdict::Pass;
};

/// Pass iff margin >= -z_crit * se. When the theory predicts equality, a
/// margin strictly inside the noise band is reported as inconclusive.
Verdict decide(double margin, double se, double z_crit, bool expect_equality = false);

Comparison compare_leq(const Estimate& lhs, const Estimate& rhs, double z_crit = kDefaultZ,
                       bool expect_equality = false);

/// Throws DesignMismatch when a paired design lacks aligned per-sample values.
Comparison compare_leq(const SampledEstimate& lhs, const SampledEstimate& rhs, Design design,
                       double z_crit = kDefaultZ, bool expect_equality = false);

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// One-sample KS statistic against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf);

}  // namespace brpath::mc

#include <algorithm>
#include <cmath>

template <class Cdf>
double brpath::mc::ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}
