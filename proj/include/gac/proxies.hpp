#pragma once

#include <cstdint>
#include <random>
#include <vector>

// Batch-statistic proxies for the noise moments consumed by the estimator.
// Everything here is an online quantity a training loop can afford each
// step: no second-order information, no extra forward passes.

namespace gac {

// Confidence weight p * (1 - p); peaks at p = 0.5, vanishes at both ends.
double phi(double p);

// Population variance (1/n) of per-sequence normalized advantages.
// Stands in for the RL gradient-noise level.
double advantage_dispersion(const std::vector<double>& advantages);

// Population variance after dropping floor(trim_frac * n) entries from each
// end of the sorted list. Guards the SFT noise proxy against stragglers.
// trim_frac in [0, 0.4]; at least two survivors required.
double trimmed_nll_variance(const std::vector<double>& nll,
                            double trim_frac);

// Per-token coefficient streams for one batch, stored flat with sample
// boundaries. mask marks response tokens; every sample needs at least one.
struct TokenCoefficients {
  std::vector<double> rl;                   // advantage per token
  std::vector<double> sft;                  // confidence weight per token
  std::vector<std::uint8_t> mask;           // 1 = response token
  std::vector<std::size_t> sample_offsets;  // n_samples + 1 entries

  void add_sample(const std::vector<double>& rl_coeffs,
                  const std::vector<double>& sft_coeffs,
                  const std::vector<std::uint8_t>& token_mask);
  std::size_t sample_count() const;
  std::size_t masked_count() const;
  void validate() const;
};

struct DisagreementResult {
  double value = 0.0;
  bool rl_flat = false;   // zero spread in the RL stream, z-scores zeroed
  bool sft_flat = false;  // same for the SFT stream
};

// Squared gap between the z-normalized coefficient streams, averaged per
// sample over its masked tokens, then over samples. Normalization uses the
// mean and population std over all masked tokens in the batch, so a common
// positive affine transform of either stream cancels. A zero-spread stream
// contributes all-zero z-scores and raises the matching flag.
DisagreementResult disagreement_proxy(const TokenCoefficients& coeffs);

// Raw per-refresh values of the three tracked statistics.
struct RawProxies {
  double sft_var = 0.0;
  double rl_var = 0.0;
  double disagreement_sq = 0.0;
};

// Exponential moving averages of the tracked statistics. The first update
// copies the raw values so there is no zero-start bias.
struct EmaEstimates {
  double decay = 0.9;  // in [0, 1]; 1 freezes the state after init
  double sft_var = 0.0;
  double rl_var = 0.0;
  double disagreement_sq = 0.0;
  bool initialized = false;

  void update(const RawProxies& raw);
  void validate() const;
};

// Stress modes that corrupt one statistic before the EMA sees it.
enum class DegradationKind {
  none,
  constant_rl_var,        // pin rl_var to constant_value
  shuffled_disagreement,  // permute the RL stream across masked tokens
  random_disagreement,    // replace disagreement with a U(0,1) draw
};

struct DegradationMode {
  DegradationKind kind = DegradationKind::none;
  double constant_value = 1.0;
  std::uint64_t seed = 0;  // seeds the rng owned by the caller
};

// Applies the mode to one raw triple. The caller owns the generator so that
// repeated draws advance (seeded once per run from DegradationMode::seed).
// shuffled_disagreement needs the token coefficients; passing nullptr for
// that mode is an input error.
RawProxies apply_degradation(const DegradationMode& mode, RawProxies raw,
                             const TokenCoefficients* coeffs,
                             std::mt19937_64& rng);

struct CrossCovEstimate {
  double value = 0.0;  // population covariance over all pairs
  double cv = 0.0;     // dispersion of sliding-window estimates / |mean|
};

// Cross-covariance between paired per-step noise summaries, plus a
// coefficient of variation over sliding windows (stride 1, length
// min(window, n)). A zero window mean makes cv infinite: the estimate is
// unusable and callers should fall back to c = 0.
CrossCovEstimate estimate_cross_cov(
    const std::vector<std::pair<double, double>>& pairs, std::size_t window);

// Pearson correlation; lengths must match, n >= 3, both sides need spread.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace gac
