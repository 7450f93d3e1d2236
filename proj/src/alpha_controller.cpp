#include "gac/alpha_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gac {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Case analysis shared by the public entry point and update_alpha; accepts
// ratio >= 0 so a zero KL reading maps onto the below-band branch.
double step_for_ratio(double ratio, const AlphaConfig& cfg) {
  if (ratio > 1.0 + cfg.hysteresis) return cfg.eta_up * (ratio - 1.0);
  if (ratio < 1.0 - cfg.hysteresis) return -cfg.eta_down * (1.0 - ratio);
  return 0.0;
}

}  // namespace

void AlphaConfig::validate() const {
  require(std::isfinite(kl_target) && kl_target > 0.0,
          "AlphaConfig.kl_target must be > 0");
  require(std::isfinite(alpha_min) && std::isfinite(alpha_max) &&
              0.0 <= alpha_min && alpha_min < alpha_max && alpha_max <= 1.0,
          "AlphaConfig: need 0 <= alpha_min < alpha_max <= 1");
  require(std::isfinite(eta_up) && eta_up > 0.0,
          "AlphaConfig.eta_up must be > 0");
  require(std::isfinite(eta_down) && eta_down > 0.0,
          "AlphaConfig.eta_down must be > 0");
  require(std::isfinite(hysteresis) && hysteresis >= 0.0,
          "AlphaConfig.hysteresis must be >= 0");
  require(std::isfinite(kl_ema_decay) && kl_ema_decay >= 0.0 &&
              kl_ema_decay < 1.0,
          "AlphaConfig.kl_ema_decay must be in [0, 1)");
  require(std::isfinite(alpha_init) && alpha_init >= alpha_min &&
              alpha_init <= alpha_max,
          "AlphaConfig.alpha_init must be in [alpha_min, alpha_max]");
}

AlphaState AlphaState::init(const AlphaConfig& cfg) {
  cfg.validate();
  return {cfg.alpha_init, 0.0, false};
}

double hysteresis_step(double kl_ratio, const AlphaConfig& cfg) {
  cfg.validate();
  require(std::isfinite(kl_ratio) && kl_ratio > 0.0,
          "hysteresis_step: kl_ratio must be finite and > 0");
  return step_for_ratio(kl_ratio, cfg);
}

AlphaState update_alpha(AlphaState s, double kl_raw, const AlphaConfig& cfg) {
  cfg.validate();
  require(std::isfinite(kl_raw) && kl_raw >= 0.0,
          "update_alpha: kl_raw must be finite and >= 0");
  if (!s.kl_initialized) {
    s.kl_ema = kl_raw;
    s.kl_initialized = true;
  } else {
    s.kl_ema = cfg.kl_ema_decay * s.kl_ema + (1.0 - cfg.kl_ema_decay) * kl_raw;
  }
  const double step = step_for_ratio(s.kl_ema / cfg.kl_target, cfg);
  s.alpha = std::clamp(s.alpha * std::exp(step), cfg.alpha_min, cfg.alpha_max);
  return s;
}

}  // namespace gac
