#include "gac/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gac {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void NoiseMoments::validate() const {
  require(std::isfinite(sft_var) && sft_var >= 0.0,
          "NoiseMoments.sft_var must be finite and >= 0");
  require(std::isfinite(rl_var) && rl_var >= 0.0,
          "NoiseMoments.rl_var must be finite and >= 0");
  require(std::isfinite(disagreement_sq) && disagreement_sq >= 0.0,
          "NoiseMoments.disagreement_sq must be finite and >= 0");
  require(std::isfinite(cross_cov), "NoiseMoments.cross_cov must be finite");
}

BiasSpec BiasSpec::isotropic(double gamma, double grad_norm_sq) {
  BiasSpec b;
  b.gamma = gamma;
  b.bias_inner = gamma * grad_norm_sq;
  b.bias_norm_sq = gamma * gamma * grad_norm_sq;
  return b;
}

void BiasSpec::validate() const {
  require(std::isfinite(bias_inner), "BiasSpec.bias_inner must be finite");
  require(std::isfinite(bias_norm_sq) && bias_norm_sq >= 0.0,
          "BiasSpec.bias_norm_sq must be finite and >= 0");
  require(std::isfinite(gamma), "BiasSpec.gamma must be finite");
}

void MixtureTarget::validate() const {
  require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0,
          "MixtureTarget.alpha must be in [0, 1]");
}

double mse_objective(double mu, const NoiseMoments& m, MixtureTarget t) {
  m.validate();
  t.validate();
  require(std::isfinite(mu), "mse_objective: mu must be finite");
  const double gap = mu - t.alpha;
  return gap * gap * m.disagreement_sq + mu * mu * m.sft_var +
         (1.0 - mu) * (1.0 - mu) * m.rl_var +
         2.0 * mu * (1.0 - mu) * m.cross_cov;
}

double biased_bound_objective(double mu, const NoiseMoments& m,
                              const BiasSpec& b, MixtureTarget t) {
  b.validate();
  return mse_objective(mu, m, t) + mu * mu * b.bias_norm_sq -
         2.0 * mu * b.bias_inner;
}

double optimal_mu(const NoiseMoments& m, MixtureTarget t) {
  m.validate();
  t.validate();
  require(m.cross_cov == 0.0,
          "optimal_mu: cross_cov must be 0 (use optimal_mu_correlated)");
  const double den = m.disagreement_sq + m.sft_var + m.rl_var;
  if (den <= kDenEpsilon)
    throw std::domain_error(
        "optimal_mu: degenerate moments, objective is flat");
  const double num = t.alpha * m.disagreement_sq + m.rl_var;
  return clamp01(num / den);
}

// The correlated and biased variants keep the same expression shape as
// optimal_mu so that zero extra terms reduce to it bit-for-bit.
MuEstimate optimal_mu_correlated(const NoiseMoments& m, MixtureTarget t) {
  m.validate();
  t.validate();
  const double den =
      m.disagreement_sq + m.sft_var + m.rl_var - 2.0 * m.cross_cov;
  if (den <= kDenEpsilon) {
    NoiseMoments independent = m;
    independent.cross_cov = 0.0;
    return {optimal_mu(independent, t), true};
  }
  const double num = t.alpha * m.disagreement_sq + m.rl_var - m.cross_cov;
  return {clamp01(num / den), false};
}

MuEstimate optimal_mu_biased(const NoiseMoments& m, const BiasSpec& b,
                             MixtureTarget t) {
  m.validate();
  b.validate();
  t.validate();
  const double den = m.disagreement_sq + m.sft_var + m.rl_var -
                     2.0 * m.cross_cov + b.bias_norm_sq;
  if (den <= kDenEpsilon) {
    NoiseMoments independent = m;
    independent.cross_cov = 0.0;
    return {optimal_mu(independent, t), true};
  }
  const double num = t.alpha * m.disagreement_sq + m.rl_var - m.cross_cov +
                     b.bias_inner;
  return {clamp01(num / den), false};
}

double grid_oracle_mu(const NoiseMoments& m, const std::optional<BiasSpec>& b,
                      MixtureTarget t, double step) {
  m.validate();
  t.validate();
  if (b) b->validate();
  require(std::isfinite(step) && step > 0.0 && step <= 0.1,
          "grid_oracle_mu: step must be in (0, 0.1]");
  const auto objective = [&](double mu) {
    return b ? biased_bound_objective(mu, m, *b, t) : mse_objective(mu, m, t);
  };
  double best_mu = 0.0;
  double best_val = objective(0.0);
  const long n = static_cast<long>(std::floor(1.0 / step));
  for (long k = 1; k <= n; ++k) {
    const double mu = std::min(k * step, 1.0);
    const double val = objective(mu);
    if (val < best_val) {
      best_val = val;
      best_mu = mu;
    }
  }
  if (n * step < 1.0) {
    const double val = objective(1.0);
    if (val < best_val) best_mu = 1.0;
  }
  return best_mu;
}

}  // namespace gac
