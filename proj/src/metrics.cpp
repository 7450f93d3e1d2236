#include "gac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace gac {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Summed one-sided periodogram power at frequency bins strictly above
// cutoff_frac of Nyquist; the DC bin never contributes. A constant series
// has exactly zero power there, so skip the DFT and its rounding noise.
double high_band_power(const std::vector<double>& x, double cutoff_frac) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) return 0.0;
  const std::size_t n = x.size();
  const std::size_t half = n / 2;
  double power = 0.0;
  for (std::size_t k = 1; k <= half; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(half);
    if (frac <= cutoff_frac) continue;
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * std::numbers::pi *
                           static_cast<double>(k) * static_cast<double>(t) /
                           static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    power += std::norm(acc);
  }
  return power;
}

double shift_rate_over(const std::vector<double>& points, double threshold) {
  std::size_t over = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (std::abs(points[i] - points[i - 1]) > threshold) ++over;
  return static_cast<double>(over) / static_cast<double>(points.size() - 1);
}

std::vector<double> column(const std::vector<RunTrace>& traces,
                           double (*pick)(const RunTrace&)) {
  std::vector<double> out;
  out.reserve(traces.size());
  for (const RunTrace& t : traces) out.push_back(pick(t));
  return out;
}

}  // namespace

double kl_area(const std::vector<double>& kl_ema, double kl_target) {
  require(!kl_ema.empty(), "kl_area: series must be nonempty");
  require(std::isfinite(kl_target) && kl_target >= 0.0,
          "kl_area: target must be >= 0");
  double area = 0.0;
  for (double v : kl_ema) area += std::max(0.0, v - kl_target);
  return area;
}

double large_shift_rate(const std::vector<double>& mu, double threshold) {
  require(mu.size() >= 2, "large_shift_rate: need at least two points");
  require(std::isfinite(threshold) && threshold > 0.0,
          "large_shift_rate: threshold must be > 0");
  return shift_rate_over(mu, threshold);
}

double windowed_shift_rate(const std::vector<double>& mu, std::size_t window,
                           double threshold) {
  require(window >= 1, "windowed_shift_rate: window must be >= 1");
  require(std::isfinite(threshold) && threshold > 0.0,
          "windowed_shift_rate: threshold must be > 0");
  std::vector<double> points;
  for (std::size_t i = 0; i < mu.size(); i += window) points.push_back(mu[i]);
  require(points.size() >= 2,
          "windowed_shift_rate: series shorter than one window");
  return shift_rate_over(points, threshold);
}

double oscillation_power_ratio(const std::vector<double>& numerator,
                               const std::vector<double>& denominator,
                               double cutoff_frac) {
  require(numerator.size() == denominator.size(),
          "oscillation_power_ratio: series lengths differ");
  require(numerator.size() >= 8,
          "oscillation_power_ratio: need at least 8 points");
  require(std::isfinite(cutoff_frac) && cutoff_frac >= 0.0 &&
              cutoff_frac < 1.0,
          "oscillation_power_ratio: cutoff_frac must be in [0, 1)");
  const double num = high_band_power(numerator, cutoff_frac);
  const double den = high_band_power(denominator, cutoff_frac);
  if (num == 0.0 && den == 0.0) return 1.0;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

MetricStats aggregate(const std::vector<double>& per_seed) {
  require(!per_seed.empty(), "aggregate: need at least one value");
  MetricStats stats;
  stats.per_seed = per_seed;
  for (double v : per_seed) stats.mean += v;
  stats.mean /= static_cast<double>(per_seed.size());
  double acc = 0.0;
  for (double v : per_seed) acc += (v - stats.mean) * (v - stats.mean);
  stats.stddev = std::sqrt(acc / static_cast<double>(per_seed.size()));
  return stats;
}

StabilityReport summarize(
    const std::map<std::string, std::vector<RunTrace>>& traces_by_arm,
    const std::string& reference_arm, double kl_target,
    std::size_t shift_window) {
  require(!traces_by_arm.empty(), "summarize: no arms");
  require(traces_by_arm.count(reference_arm) == 1,
          "summarize: reference arm has no traces");

  StabilityReport report;
  report.reference_arm = reference_arm;
  report.kl_target = kl_target;
  report.shift_window = shift_window;

  for (const auto& [arm, traces] : traces_by_arm) {
    require(!traces.empty(), "summarize: arm without traces");
    ArmSummary s;
    s.arm = arm;
    std::vector<double> areas, step_rates, window_rates;
    for (const RunTrace& t : traces) {
      require(!t.rows.empty(), "summarize: empty trace");
      areas.push_back(kl_area(t.kl_ema_series(), kl_target));
      const std::vector<double> mu = t.mu_series();
      step_rates.push_back(mu.size() >= 2 ? large_shift_rate(mu) : 0.0);
      window_rates.push_back(mu.size() > shift_window
                                 ? windowed_shift_rate(mu, shift_window)
                                 : 0.0);
    }
    s.kl_area = aggregate(areas);
    s.step_shift_rate = aggregate(step_rates);
    s.window_shift_rate = aggregate(window_rates);
    s.final_loss_mix = aggregate(
        column(traces, [](const RunTrace& t) { return t.rows.back().loss_mix; }));
    s.potential_start = aggregate(
        column(traces, [](const RunTrace& t) { return t.rows.front().potential; }));
    s.potential_end = aggregate(
        column(traces, [](const RunTrace& t) { return t.rows.back().potential; }));
    report.arms.push_back(std::move(s));
  }

  const auto ref = std::find_if(
      report.arms.begin(), report.arms.end(),
      [&](const ArmSummary& s) { return s.arm == reference_arm; });
  for (const ArmSummary& s : report.arms) {
    if (s.arm == reference_arm) continue;
    const std::pair<const char*, std::pair<double, double>> deltas[] = {
        {"kl_area", {s.kl_area.mean, ref->kl_area.mean}},
        {"step_shift_rate", {s.step_shift_rate.mean, ref->step_shift_rate.mean}},
        {"window_shift_rate",
         {s.window_shift_rate.mean, ref->window_shift_rate.mean}},
    };
    for (const auto& [metric, pair] : deltas) {
      if (pair.second == 0.0) continue;
      report.change_vs_reference[s.arm + "/" + metric] =
          100.0 * (pair.first - pair.second) / pair.second;
    }
  }
  return report;
}

std::string report_to_text(const StabilityReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %18s %18s %18s %14s\n", "arm",
                "kl_area", "step_shift", "window_shift", "final_loss");
  out += line;
  for (const ArmSummary& s : report.arms) {
    std::snprintf(line, sizeof(line),
                  "%-16s %9.4f +-%6.4f %9.4f +-%6.4f %9.4f +-%6.4f %14.6f\n",
                  s.arm.c_str(), s.kl_area.mean, s.kl_area.stddev,
                  s.step_shift_rate.mean, s.step_shift_rate.stddev,
                  s.window_shift_rate.mean, s.window_shift_rate.stddev,
                  s.final_loss_mix.mean);
    out += line;
  }
  for (const auto& [key, pct] : report.change_vs_reference) {
    std::snprintf(line, sizeof(line), "%-36s %+8.2f%% vs %s\n", key.c_str(),
                  pct, report.reference_arm.c_str());
    out += line;
  }
  return out;
}

}  // namespace gac
