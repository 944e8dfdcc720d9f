#include "brpath/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "brpath/errors.hpp"

namespace brpath::mc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> c,
                                           std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  return c;
}

}  // namespace

std::uint64_t tag_of(std::string_view name) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(a) ^ (b + 0x632BE59BD9B4E019ULL));
}

Stream::Stream(const StreamKey& key) : key_(key) {
  const std::uint64_t k = mix(mix(key.seed, key.tag), key.stage);
  philox_key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

void Stream::refill() {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(key_.path), static_cast<std::uint32_t>(key_.path >> 32)};
  buffer_ = philox4x32_10(counter, philox_key_);
  ++block_;
  buffered_ = 4;
}

std::uint64_t Stream::next_u64() {
  if (buffered_ < 2) refill();
  const std::uint64_t lo = buffer_[4 - buffered_];
  const std::uint64_t hi = buffer_[5 - buffered_];
  buffered_ -= 2;
  return (hi << 32) | lo;
}

double Stream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

Stream Stream::child(std::uint64_t stage) const {
  StreamKey k = key_;
  k.stage = mix(key_.stage, stage);
  return Stream(k);
}

Stream derive_stream(const StreamKey& key) { return Stream(key); }

// ---------------------------------------------------------------------------

void Accumulator::Neumaier::add(double x) {
  const double t = s + x;
  if (std::abs(s) >= std::abs(x)) {
    c += (s - t) + x;
  } else {
    c += (x - t) + s;
  }
  s = t;
}

void Accumulator::add(double x) {
  if (n_ == 0) shift_ = x;
  ++n_;
  sum_.add(x);
  const double d = x - shift_;
  d1_.add(d);
  d2_.add(d * d);
}

void Accumulator::merge(const Accumulator& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  // Re-center the other shard's shifted sums onto this shift.
  const double delta = other.shift_ - shift_;
  const double on = static_cast<double>(other.n_);
  sum_.add(other.sum_.s);
  sum_.add(other.sum_.c);
  d1_.add(other.d1_.value());
  d1_.add(on * delta);
  d2_.add(other.d2_.value());
  d2_.add(2.0 * delta * other.d1_.value());
  d2_.add(on * delta * delta);
  n_ += other.n_;
}

double Accumulator::mean() const {
  return n_ == 0 ? 0.0 : sum_.value() / static_cast<double>(n_);
}

double Accumulator::variance() const {
  if (n_ < 2) return 0.0;
  const double n = static_cast<double>(n_);
  const double s1 = d1_.value();
  const double v = (d2_.value() - s1 * s1 / n) / (n - 1.0);
  return v > 0.0 ? v : 0.0;
}

Estimate Accumulator::estimate(std::uint64_t seed, std::uint64_t stream) const {
  Estimate e;
  e.mean = mean();
  e.count = n_;
  e.se = n_ >= 2 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  e.seed = seed;
  e.stream = stream;
  return e;
}

Estimate accumulate(std::span<const double> values, std::uint64_t seed, std::uint64_t stream) {
  if (values.size() < 2) {
    throw InsufficientSamples("at least 2 values required, got " + std::to_string(values.size()));
  }
  Accumulator acc;
  for (double v : values) acc.add(v);
  return acc.estimate(seed, stream);
}

SampledEstimate sampled(std::vector<double> values, std::uint64_t seed, std::uint64_t stream) {
  SampledEstimate out;
  out.est = accumulate(values, seed, stream);
  out.per_sample = std::move(values);
  return out;
}

SampledEstimate delta_method(double value, std::span<const double> gradient,
                             std::span<const std::vector<double>> columns, std::uint64_t seed,
                             std::uint64_t stream) {
  if (gradient.size() != columns.size() || columns.empty()) {
    throw InvalidArgument("delta_method: gradient/column count mismatch");
  }
  const std::size_t n = columns.front().size();
  std::vector<double> means(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != n) throw InvalidArgument("delta_method: ragged columns");
    Accumulator acc;
    for (double v : columns[c]) acc.add(v);
    means[c] = acc.mean();
  }
  std::vector<double> psi(n, value);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      psi[i] += gradient[c] * (columns[c][i] - means[c]);
    }
  }
  SampledEstimate out = sampled(std::move(psi), seed, stream);
  out.est.mean = value;
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

Verdict decide(double margin, double se, double z_crit, bool expect_equality) {
  const double band = z_crit * se;
  if (expect_equality && se > 0.0 && std::abs(margin) < band) return Verdict::Inconclusive;
  return margin >= -band ? Verdict::Pass : Verdict::Fail;
}

namespace {
Comparison finish(double margin, double se, double z_crit, bool expect_equality) {
  Comparison c;
  c.margin = margin;
  c.se_diff = se;
  c.z = se > 0.0 ? margin / se : 0.0;
  c.verdict = decide(margin, se, z_crit, expect_equality);
  return c;
}
}  // namespace

Comparison compare_leq(const Estimate& lhs, const Estimate& rhs, double z_crit,
                       bool expect_equality) {
  return finish(rhs.mean - lhs.mean, std::hypot(lhs.se, rhs.se), z_crit, expect_equality);
}

Comparison compare_leq(const SampledEstimate& lhs, const SampledEstimate& rhs, Design design,
                       double z_crit, bool expect_equality) {
  if (design == Design::Independent) return compare_leq(lhs.est, rhs.est, z_crit, expect_equality);
  if (lhs.per_sample.size() != rhs.per_sample.size() || lhs.per_sample.size() < 2) {
    throw DesignMismatch("paired comparison needs aligned per-sample values (" +
                         std::to_string(lhs.per_sample.size()) + " vs " +
                         std::to_string(rhs.per_sample.size()) + ")");
  }
  Accumulator diff;
  for (std::size_t i = 0; i < lhs.per_sample.size(); ++i) {
    diff.add(rhs.per_sample[i] - lhs.per_sample[i]);
  }
  return finish(rhs.est.mean - lhs.est.mean, diff.estimate().se, z_crit, expect_equality);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InsufficientSamples("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

}  // namespace brpath::mc
