#pragma once

// Multiplicative feedback on the mixture target alpha, driven by the gap
// between a smoothed KL reading and its budget. A hysteresis band around the
// budget keeps alpha bit-identical while the ratio sits inside it.

namespace gac {

struct AlphaConfig {
  double kl_target = 0.02;    // > 0
  double alpha_min = 0.1;     // bounds inside [0, 1], min < max
  double alpha_max = 0.95;
  double eta_up = 0.2;        // gain above the band, > 0
  double eta_down = 0.3;      // gain below the band, > 0
  double hysteresis = 0.1;    // half-width h of the dead band, >= 0
  double kl_ema_decay = 0.9;  // in [0, 1)
  double alpha_init = 0.5;    // in [alpha_min, alpha_max]

  void validate() const;  // throws std::invalid_argument
};

struct AlphaState {
  double alpha = 0.5;
  double kl_ema = 0.0;
  bool kl_initialized = false;

  static AlphaState init(const AlphaConfig& cfg);
};

// Signed multiplicative step for a KL ratio r = kl_ema / kl_target:
//   r > 1 + h  ->  eta_up * (r - 1)
//   r < 1 - h  -> -eta_down * (1 - r)
//   otherwise      0
// The ratio must be positive and finite.
double hysteresis_step(double kl_ratio, const AlphaConfig& cfg);

// Folds one raw KL reading into the EMA (first call copies it), then applies
// alpha <- clip(alpha * exp(step), [alpha_min, alpha_max]). kl_raw must be
// finite and >= 0.
AlphaState update_alpha(AlphaState s, double kl_raw, const AlphaConfig& cfg);

}  // namespace gac
