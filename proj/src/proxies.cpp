#include "gac/proxies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gac {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Welford's accumulator; population (1/n) variance.
struct RunningVariance {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n == 0 ? 0.0 : m2 / static_cast<double>(n); }
};

void check_finite(const std::vector<double>& v, const char* msg) {
  for (double x : v) require(std::isfinite(x), msg);
}

}  // namespace

double phi(double p) {
  require(std::isfinite(p) && p >= 0.0 && p <= 1.0,
          "phi: probability must be in [0, 1]");
  return p * (1.0 - p);
}

double advantage_dispersion(const std::vector<double>& advantages) {
  require(!advantages.empty(), "advantage_dispersion: empty batch");
  check_finite(advantages, "advantage_dispersion: nonfinite advantage");
  RunningVariance acc;
  for (double a : advantages) acc.add(a);
  return acc.variance();
}

double trimmed_nll_variance(const std::vector<double>& nll, double trim_frac) {
  require(std::isfinite(trim_frac) && trim_frac >= 0.0 && trim_frac <= 0.4,
          "trimmed_nll_variance: trim_frac must be in [0, 0.4]");
  check_finite(nll, "trimmed_nll_variance: nonfinite entry");
  for (double x : nll)
    require(x >= 0.0, "trimmed_nll_variance: negative NLL entry");
  std::vector<double> sorted = nll;
  std::sort(sorted.begin(), sorted.end());
  const auto drop = static_cast<std::size_t>(
      std::floor(trim_frac * static_cast<double>(sorted.size())));
  require(sorted.size() >= 2 * drop + 2,
          "trimmed_nll_variance: fewer than two survivors after trimming");
  RunningVariance acc;
  for (std::size_t i = drop; i < sorted.size() - drop; ++i) acc.add(sorted[i]);
  return acc.variance();
}

void TokenCoefficients::add_sample(const std::vector<double>& rl_coeffs,
                                   const std::vector<double>& sft_coeffs,
                                   const std::vector<std::uint8_t>& token_mask) {
  require(rl_coeffs.size() == sft_coeffs.size() &&
              rl_coeffs.size() == token_mask.size(),
          "TokenCoefficients: per-sample streams must have equal length");
  require(!rl_coeffs.empty(), "TokenCoefficients: empty sample");
  if (sample_offsets.empty()) sample_offsets.push_back(0);
  rl.insert(rl.end(), rl_coeffs.begin(), rl_coeffs.end());
  sft.insert(sft.end(), sft_coeffs.begin(), sft_coeffs.end());
  mask.insert(mask.end(), token_mask.begin(), token_mask.end());
  sample_offsets.push_back(rl.size());
}

std::size_t TokenCoefficients::sample_count() const {
  return sample_offsets.empty() ? 0 : sample_offsets.size() - 1;
}

std::size_t TokenCoefficients::masked_count() const {
  std::size_t n = 0;
  for (std::uint8_t m : mask) n += (m != 0);
  return n;
}

void TokenCoefficients::validate() const {
  require(rl.size() == sft.size() && rl.size() == mask.size(),
          "TokenCoefficients: stream lengths differ");
  require(sample_count() >= 1, "TokenCoefficients: no samples");
  require(sample_offsets.front() == 0 && sample_offsets.back() == rl.size(),
          "TokenCoefficients: offsets do not cover the streams");
  check_finite(rl, "TokenCoefficients: nonfinite rl coefficient");
  check_finite(sft, "TokenCoefficients: nonfinite sft coefficient");
  for (std::size_t s = 0; s + 1 < sample_offsets.size(); ++s) {
    require(sample_offsets[s] < sample_offsets[s + 1],
            "TokenCoefficients: non-increasing sample offsets");
    bool any_masked = false;
    for (std::size_t i = sample_offsets[s]; i < sample_offsets[s + 1]; ++i)
      any_masked = any_masked || (mask[i] != 0);
    require(any_masked, "TokenCoefficients: sample with no masked tokens");
  }
}

DisagreementResult disagreement_proxy(const TokenCoefficients& coeffs) {
  coeffs.validate();
  RunningVariance rl_acc;
  RunningVariance sft_acc;
  for (std::size_t i = 0; i < coeffs.rl.size(); ++i) {
    if (coeffs.mask[i] == 0) continue;
    rl_acc.add(coeffs.rl[i]);
    sft_acc.add(coeffs.sft[i]);
  }
  const double rl_std = std::sqrt(rl_acc.variance());
  const double sft_std = std::sqrt(sft_acc.variance());

  DisagreementResult out;
  out.rl_flat = rl_std == 0.0;
  out.sft_flat = sft_std == 0.0;
  const auto z = [](double x, double mean, double stddev) {
    return stddev == 0.0 ? 0.0 : (x - mean) / stddev;
  };

  RunningVariance per_sample_mean;  // reused for its running mean only
  for (std::size_t s = 0; s + 1 < coeffs.sample_offsets.size(); ++s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = coeffs.sample_offsets[s];
         i < coeffs.sample_offsets[s + 1]; ++i) {
      if (coeffs.mask[i] == 0) continue;
      const double gap = z(coeffs.rl[i], rl_acc.mean, rl_std) -
                         z(coeffs.sft[i], sft_acc.mean, sft_std);
      sum += gap * gap;
      ++n;
    }
    per_sample_mean.add(sum / static_cast<double>(n));
  }
  out.value = per_sample_mean.mean;
  return out;
}

void EmaEstimates::validate() const {
  require(std::isfinite(decay) && decay >= 0.0 && decay <= 1.0,
          "EmaEstimates.decay must be in [0, 1]");
}

void EmaEstimates::update(const RawProxies& raw) {
  validate();
  require(std::isfinite(raw.sft_var) && raw.sft_var >= 0.0,
          "EmaEstimates.update: sft_var must be finite and >= 0");
  require(std::isfinite(raw.rl_var) && raw.rl_var >= 0.0,
          "EmaEstimates.update: rl_var must be finite and >= 0");
  require(std::isfinite(raw.disagreement_sq) && raw.disagreement_sq >= 0.0,
          "EmaEstimates.update: disagreement_sq must be finite and >= 0");
  if (!initialized) {
    sft_var = raw.sft_var;
    rl_var = raw.rl_var;
    disagreement_sq = raw.disagreement_sq;
    initialized = true;
    return;
  }
  const double keep = decay;
  const double take = 1.0 - decay;
  sft_var = keep * sft_var + take * raw.sft_var;
  rl_var = keep * rl_var + take * raw.rl_var;
  disagreement_sq = keep * disagreement_sq + take * raw.disagreement_sq;
}

RawProxies apply_degradation(const DegradationMode& mode, RawProxies raw,
                             const TokenCoefficients* coeffs,
                             std::mt19937_64& rng) {
  switch (mode.kind) {
    case DegradationKind::none:
      return raw;
    case DegradationKind::constant_rl_var:
      require(std::isfinite(mode.constant_value) && mode.constant_value >= 0.0,
              "apply_degradation: constant_value must be finite and >= 0");
      raw.rl_var = mode.constant_value;
      return raw;
    case DegradationKind::shuffled_disagreement: {
      require(coeffs != nullptr,
              "apply_degradation: shuffled mode needs token coefficients");
      TokenCoefficients shuffled = *coeffs;
      shuffled.validate();
      std::vector<std::size_t> masked_idx;
      for (std::size_t i = 0; i < shuffled.mask.size(); ++i)
        if (shuffled.mask[i] != 0) masked_idx.push_back(i);
      std::vector<double> values;
      values.reserve(masked_idx.size());
      for (std::size_t i : masked_idx) values.push_back(shuffled.rl[i]);
      std::shuffle(values.begin(), values.end(), rng);
      for (std::size_t k = 0; k < masked_idx.size(); ++k)
        shuffled.rl[masked_idx[k]] = values[k];
      raw.disagreement_sq = disagreement_proxy(shuffled).value;
      return raw;
    }
    case DegradationKind::random_disagreement: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      raw.disagreement_sq = unit(rng);
      return raw;
    }
  }
  throw std::logic_error("apply_degradation: unknown kind");
}

CrossCovEstimate estimate_cross_cov(
    const std::vector<std::pair<double, double>>& pairs, std::size_t window) {
  require(pairs.size() >= 2, "estimate_cross_cov: need at least two pairs");
  require(window >= 2, "estimate_cross_cov: window must be >= 2");
  for (const auto& [a, b] : pairs)
    require(std::isfinite(a) && std::isfinite(b),
            "estimate_cross_cov: nonfinite pair");

  const auto covariance = [&](std::size_t begin, std::size_t end) {
    RunningVariance xa;
    RunningVariance xb;
    for (std::size_t i = begin; i < end; ++i) {
      xa.add(pairs[i].first);
      xb.add(pairs[i].second);
    }
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i)
      acc += (pairs[i].first - xa.mean) * (pairs[i].second - xb.mean);
    return acc / static_cast<double>(end - begin);
  };

  CrossCovEstimate out;
  out.value = covariance(0, pairs.size());

  const std::size_t w = std::min(window, pairs.size());
  RunningVariance window_covs;
  for (std::size_t begin = 0; begin + w <= pairs.size(); ++begin)
    window_covs.add(covariance(begin, begin + w));
  const double spread = std::sqrt(window_covs.variance());
  out.cv = window_covs.mean == 0.0
               ? std::numeric_limits<double>::infinity()
               : spread / std::abs(window_covs.mean);
  return out;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "pearson_r: length mismatch");
  require(x.size() >= 3, "pearson_r: need at least three points");
  check_finite(x, "pearson_r: nonfinite x");
  check_finite(y, "pearson_r: nonfinite y");
  RunningVariance xa;
  RunningVariance ya;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xa.add(x[i]);
    ya.add(y[i]);
  }
  const double sx = std::sqrt(xa.variance());
  const double sy = std::sqrt(ya.variance());
  require(sx > 0.0 && sy > 0.0, "pearson_r: zero variance input");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += (x[i] - xa.mean) * (y[i] - ya.mean);
  const double r = acc / (static_cast<double>(x.size()) * sx * sy);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace gac
