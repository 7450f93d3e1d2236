#include "gac/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gac {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double required(const std::optional<double>& field, const char* rule,
                const char* name) {
  if (!field)
    throw std::invalid_argument(std::string(rule) +
                                ": missing observation field '" + name + "'");
  require(std::isfinite(*field), "baseline observation must be finite");
  return *field;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Latest-to-previous loss ratio; fewer than two entries (or a vanishing
// denominator) reads as "no progress signal" and returns 1.
double loss_ratio(const std::vector<double>& history) {
  if (history.size() < 2) return 1.0;
  const double prev = history[history.size() - 2];
  const double last = history[history.size() - 1];
  require(std::isfinite(prev) && std::isfinite(last),
          "dwa: nonfinite loss history entry");
  if (std::abs(prev) < 1e-12) return 1.0;
  return last / prev;
}

}  // namespace

void BaselineRule::validate() const {
  require(std::isfinite(constant_value),
          "BaselineRule.constant_value must be finite");
  require(std::isfinite(kappa) && kappa > 0.0,
          "BaselineRule.kappa must be > 0");
  require(std::isfinite(rewvar_floor) && rewvar_floor > 0.0,
          "BaselineRule.rewvar_floor must be > 0");
  require(calibration_window >= 1,
          "BaselineRule.calibration_window must be >= 1");
  require(std::isfinite(dwa_temperature) && dwa_temperature > 0.0,
          "BaselineRule.dwa_temperature must be > 0");
  schedule.validate();
}

BaselineController::BaselineController(BaselineRule rule) : rule_(rule) {
  rule_.validate();
}

double BaselineController::mu(const BaselineObservation& obs) {
  switch (rule_.kind) {
    case BaselineKind::constant:
      return clamp01(rule_.constant_value);
    case BaselineKind::schedule:
      return prior_mu(rule_.schedule, obs.step);
    case BaselineKind::kl_ctrl: {
      const double kl = required(obs.kl, "kl_ctrl", "kl");
      require(kl >= 0.0, "kl_ctrl: kl must be >= 0");
      return clamp01(1.0 - kl / rule_.kappa);
    }
    case BaselineKind::rewvar_ctrl: {
      const double var =
          required(obs.reward_variance, "rewvar_ctrl", "reward_variance");
      require(var >= 0.0, "rewvar_ctrl: reward_variance must be >= 0");
      const double raw = 1.0 / (var + rule_.rewvar_floor);
      rewvar_raw_.push_back(raw);
      if (rewvar_raw_.size() > rule_.calibration_window)
        rewvar_raw_.pop_front();
      double mean = 0.0;
      for (double r : rewvar_raw_) mean += r;
      mean /= static_cast<double>(rewvar_raw_.size());
      // Normalize so the running mean output over the window sits at 0.5.
      return clamp01(0.5 * raw / mean);
    }
    case BaselineKind::gradnorm_ctrl: {
      const double s = required(obs.grad_norm_sft, "gradnorm_ctrl",
                                "grad_norm_sft");
      const double r = required(obs.grad_norm_rl, "gradnorm_ctrl",
                                "grad_norm_rl");
      require(s >= 0.0 && r >= 0.0, "gradnorm_ctrl: norms must be >= 0");
      if (s + r == 0.0) return 0.5;  // no gradient mass on either side
      return s / (s + r);
    }
    case BaselineKind::dwa: {
      const double rs = loss_ratio(obs.loss_history_sft);
      const double rr = loss_ratio(obs.loss_history_rl);
      const double ws = std::exp(rs / rule_.dwa_temperature);
      const double wr = std::exp(rr / rule_.dwa_temperature);
      return ws / (ws + wr);
    }
  }
  throw std::logic_error("BaselineController: unknown rule kind");
}

}  // namespace gac
