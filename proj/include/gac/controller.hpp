#pragma once

#include <random>
#include <vector>

#include "gac/alpha_controller.hpp"
#include "gac/proxies.hpp"
#include "gac/schedule.hpp"

// Guarded adaptive controller for the mixing weight. Each step layers four
// safeguards over the closed-form target: an EMA toward the previous weight,
// a blend with the prior schedule, a per-step movement cap, and hard bounds.

namespace gac {

struct ControllerConfig {
  double beta_ema = 0.99;      // pull toward the previous weight, in [0, 1)
  double cap = 0.01;           // per-step |delta mu| ceiling, > 0
  double blend_lambda = 0.5;   // adaptive share of the blend, in [0, 1]
  long update_freq = 10;       // proxy refresh period, >= 1
  long early_freq_steps = 0;   // optional faster-refresh window (0 = off)
  long early_freq = 2;         // refresh period inside that window, >= 1
  double mu_min = 0.0;         // 0 <= mu_min < mu_max <= 1
  double mu_max = 1.0;
  double mu_init = 0.5;        // in [mu_min, mu_max]
  double trim_frac = 0.10;     // SFT variance trimming, in [0, 0.4]
  double stats_ema_decay = 0.9;  // in [0, 1)
  PriorSchedule prior;
  AlphaConfig alpha;
  DegradationMode degradation;

  void validate() const;  // throws std::invalid_argument
};

// Diagnostics frozen at the end of each step. Raw proxy values repeat the
// last refresh between refreshes.
enum StepFlag : unsigned {
  kFlagDegenerateTarget = 1u,  // flat objective; held the previous target
  kFlagRlFlat = 2u,            // zero spread in the RL coefficient stream
  kFlagSftFlat = 4u,           // zero spread in the SFT coefficient stream
};

struct StepDiagnostics {
  bool refreshed = false;
  RawProxies raw;
  double mu_star = 0.0;   // closed-form target from the EMA'd estimates
  double mu_ada = 0.0;    // after the EMA toward the previous weight
  double mu_blend = 0.0;  // after blending with the prior
  unsigned flags = 0;
};

// Everything the controller carries across steps. Copyable so callers can
// snapshot and replay.
struct ControllerState {
  double mu = 0.5;
  long step = 0;
  AlphaState alpha;
  EmaEstimates stats;
  std::mt19937_64 degradation_rng;
  StepDiagnostics last;

  static ControllerState init(const ControllerConfig& cfg);
};

// Per-step batch statistics feeding the proxy refresh.
struct StepInput {
  std::vector<double> advantages;  // normalized sequence advantages
  std::vector<double> sft_nll;     // length-normalized NLL per SFT sample
  TokenCoefficients coeffs;
  double kl_raw = 0.0;
};

struct StepOutcome {
  double mu = 0.5;
  double alpha = 0.5;
  StepDiagnostics diag;
};

// One control step from batch statistics. Any input error throws before the
// state is touched; the step is left unconsumed.
StepOutcome controller_step(ControllerState& s, const StepInput& in,
                            const ControllerConfig& cfg);

// Ground-truth variant for testbeds that know the noise moments exactly.
// Refresh cadence and degradation apply the same way; the shuffled mode is
// unavailable here (no token stream) and throws.
StepOutcome controller_step_exact(ControllerState& s, const RawProxies& raw,
                                  double kl_raw, const ControllerConfig& cfg);

// Training loss at weight mu: (1 - mu) * loss_rl + mu * loss_sft.
double compose_loss(double mu, double loss_rl, double loss_sft);

}  // namespace gac
