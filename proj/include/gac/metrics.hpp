#pragma once

#include <map>
#include <string>
#include <vector>

#include "gac/trace.hpp"

// Stability metrics over run traces: accumulated KL excess, mixing-weight
// shift rates at step and window granularity, a spectral smoothing ratio,
// and per-arm aggregation with changes against a reference arm.

namespace gac {

// One-sided excess of the smoothed KL above target, unit step width.
double kl_area(const std::vector<double>& kl_ema, double kl_target);

// Fraction of consecutive pairs with |mu_t - mu_{t-1}| > threshold.
double large_shift_rate(const std::vector<double>& mu,
                        double threshold = 0.02);

// The same rate over the subsampled points mu_0, mu_w, mu_2w, ...: movement
// across whole refresh windows rather than single steps.
double windowed_shift_rate(const std::vector<double>& mu, std::size_t window,
                           double threshold = 0.02);

// Ratio of summed periodogram power above cutoff_frac of Nyquist,
// numerator series over denominator series. Equal lengths >= 8 required.
// Both sides zero -> 1; zero numerator -> 0; zero denominator -> +inf.
double oscillation_power_ratio(const std::vector<double>& numerator,
                               const std::vector<double>& denominator,
                               double cutoff_frac);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<double> per_seed;
};

MetricStats aggregate(const std::vector<double>& per_seed);

struct ArmSummary {
  std::string arm;
  MetricStats kl_area;
  MetricStats step_shift_rate;
  MetricStats window_shift_rate;
  MetricStats final_loss_mix;
  MetricStats potential_start;
  MetricStats potential_end;
};

struct StabilityReport {
  std::vector<ArmSummary> arms;  // sorted by arm name
  std::string reference_arm;
  // Percent change of each arm's mean vs the reference arm's, keyed by
  // "<arm>/<metric>"; negative means a reduction. Entries exist only where
  // the reference mean is nonzero.
  std::map<std::string, double> change_vs_reference;
  double kl_target = 0.0;
  std::size_t shift_window = 1;
};

StabilityReport summarize(
    const std::map<std::string, std::vector<RunTrace>>& traces_by_arm,
    const std::string& reference_arm, double kl_target,
    std::size_t shift_window);

// Aligned plain-text comparison table, one row per arm.
std::string report_to_text(const StabilityReport& report);

}  // namespace gac
