#include "gac/controller.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "gac/estimator.hpp"

namespace gac {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Shared tail of both step variants. `fresh` carries the degraded raw triple
// when this step is a refresh. Everything that can throw has already run.
StepOutcome advance(ControllerState& s, const std::optional<RawProxies>& fresh,
                    unsigned fresh_flags, double kl_raw,
                    const ControllerConfig& cfg) {
  StepDiagnostics diag = s.last;
  diag.refreshed = fresh.has_value();
  if (fresh) {
    diag.raw = *fresh;
    diag.flags = fresh_flags;
    s.stats.update(*fresh);
  } else {
    diag.flags &= ~kFlagDegenerateTarget;  // recomputed below
  }

  s.alpha = update_alpha(s.alpha, kl_raw, cfg.alpha);

  // Closed-form target from the smoothed estimates. A flat objective keeps
  // the previous target and raises a flag instead of erroring: the prior
  // still steers the blend.
  const double den =
      s.stats.disagreement_sq + s.stats.sft_var + s.stats.rl_var;
  if (den <= kDenEpsilon) {
    diag.mu_star = s.mu;
    diag.flags |= kFlagDegenerateTarget;
  } else {
    diag.mu_star = optimal_mu(
        NoiseMoments{s.stats.sft_var, s.stats.rl_var, s.stats.disagreement_sq,
                     0.0},
        MixtureTarget{s.alpha.alpha});
  }

  diag.mu_ada = cfg.beta_ema * s.mu + (1.0 - cfg.beta_ema) * diag.mu_star;
  diag.mu_blend = (1.0 - cfg.blend_lambda) * prior_mu(cfg.prior, s.step) +
                  cfg.blend_lambda * diag.mu_ada;

  // Cap, then bounds. When the cap is slack the blend value passes through
  // untouched so a pure-prior configuration reproduces the schedule exactly.
  const double delta = diag.mu_blend - s.mu;
  const double stepped = std::abs(delta) <= cfg.cap
                             ? diag.mu_blend
                             : s.mu + std::copysign(cfg.cap, delta);
  s.mu = std::clamp(stepped, cfg.mu_min, cfg.mu_max);
  s.step += 1;
  s.last = diag;
  return {s.mu, s.alpha.alpha, diag};
}

bool is_refresh_step(long step, const ControllerConfig& cfg) {
  const long freq =
      step < cfg.early_freq_steps ? cfg.early_freq : cfg.update_freq;
  return step % freq == 0;
}

}  // namespace

void ControllerConfig::validate() const {
  require(std::isfinite(beta_ema) && beta_ema >= 0.0 && beta_ema < 1.0,
          "ControllerConfig.beta_ema must be in [0, 1)");
  require(std::isfinite(cap) && cap > 0.0, "ControllerConfig.cap must be > 0");
  require(std::isfinite(blend_lambda) && blend_lambda >= 0.0 &&
              blend_lambda <= 1.0,
          "ControllerConfig.blend_lambda must be in [0, 1]");
  require(update_freq >= 1, "ControllerConfig.update_freq must be >= 1");
  require(early_freq_steps >= 0,
          "ControllerConfig.early_freq_steps must be >= 0");
  require(early_freq >= 1, "ControllerConfig.early_freq must be >= 1");
  require(std::isfinite(mu_min) && std::isfinite(mu_max) && 0.0 <= mu_min &&
              mu_min < mu_max && mu_max <= 1.0,
          "ControllerConfig: need 0 <= mu_min < mu_max <= 1");
  require(std::isfinite(mu_init) && mu_init >= mu_min && mu_init <= mu_max,
          "ControllerConfig.mu_init must be in [mu_min, mu_max]");
  require(std::isfinite(trim_frac) && trim_frac >= 0.0 && trim_frac <= 0.4,
          "ControllerConfig.trim_frac must be in [0, 0.4]");
  require(std::isfinite(stats_ema_decay) && stats_ema_decay >= 0.0 &&
              stats_ema_decay < 1.0,
          "ControllerConfig.stats_ema_decay must be in [0, 1)");
  prior.validate();
  alpha.validate();
}

ControllerState ControllerState::init(const ControllerConfig& cfg) {
  cfg.validate();
  ControllerState s;
  s.mu = cfg.mu_init;
  s.step = 0;
  s.alpha = AlphaState::init(cfg.alpha);
  s.stats.decay = cfg.stats_ema_decay;
  s.degradation_rng.seed(cfg.degradation.seed);
  s.last.mu_star = cfg.mu_init;
  s.last.mu_ada = cfg.mu_init;
  s.last.mu_blend = cfg.mu_init;
  return s;
}

StepOutcome controller_step(ControllerState& s, const StepInput& in,
                            const ControllerConfig& cfg) {
  cfg.validate();
  require(std::isfinite(in.kl_raw) && in.kl_raw >= 0.0,
          "controller_step: kl_raw must be finite and >= 0");
  std::optional<RawProxies> fresh;
  unsigned flags = 0;
  if (is_refresh_step(s.step, cfg)) {
    // All throwing work happens here, before any state mutation.
    RawProxies raw;
    raw.rl_var = advantage_dispersion(in.advantages);
    raw.sft_var = trimmed_nll_variance(in.sft_nll, cfg.trim_frac);
    const DisagreementResult d = disagreement_proxy(in.coeffs);
    raw.disagreement_sq = d.value;
    if (d.rl_flat) flags |= kFlagRlFlat;
    if (d.sft_flat) flags |= kFlagSftFlat;
    fresh = apply_degradation(cfg.degradation, raw, &in.coeffs,
                              s.degradation_rng);
  }
  return advance(s, fresh, flags, in.kl_raw, cfg);
}

StepOutcome controller_step_exact(ControllerState& s, const RawProxies& raw,
                                  double kl_raw, const ControllerConfig& cfg) {
  cfg.validate();
  require(std::isfinite(kl_raw) && kl_raw >= 0.0,
          "controller_step_exact: kl_raw must be finite and >= 0");
  require(std::isfinite(raw.sft_var) && raw.sft_var >= 0.0 &&
              std::isfinite(raw.rl_var) && raw.rl_var >= 0.0 &&
              std::isfinite(raw.disagreement_sq) && raw.disagreement_sq >= 0.0,
          "controller_step_exact: raw moments must be finite and >= 0");
  std::optional<RawProxies> fresh;
  if (is_refresh_step(s.step, cfg)) {
    fresh = apply_degradation(cfg.degradation, raw, nullptr,
                              s.degradation_rng);
  }
  return advance(s, fresh, 0, kl_raw, cfg);
}

double compose_loss(double mu, double loss_rl, double loss_sft) {
  require(std::isfinite(mu) && mu >= 0.0 && mu <= 1.0,
          "compose_loss: mu must be in [0, 1]");
  require(std::isfinite(loss_rl) && std::isfinite(loss_sft),
          "compose_loss: losses must be finite");
  return (1.0 - mu) * loss_rl + mu * loss_sft;
}

}  // namespace gac
