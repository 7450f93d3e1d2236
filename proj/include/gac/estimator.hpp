#pragma once

#include <optional>

// Closed-form mixing weights for two-source gradient averaging.
//
// The mixed update g(mu) = mu * g_sft + (1 - mu) * g_rl trades distance from
// the target mixture against estimator noise. The expected squared error is
// quadratic in mu, so the minimizer is available in closed form whenever the
// denominator (objective curvature) is positive.

namespace gac {

// Guard threshold for every closed-form denominator.
inline constexpr double kDenEpsilon = 1e-12;

// Second-moment summary of the two stochastic gradients. cross_cov is the
// scalar cross-covariance between the noise sources (0 when independent).
struct NoiseMoments {
  double sft_var = 0.0;          // >= 0
  double rl_var = 0.0;           // >= 0
  double disagreement_sq = 0.0;  // squared gap between clean gradients, >= 0
  double cross_cov = 0.0;

  void validate() const;  // throws std::invalid_argument
};

// Systematic-error summary for the biased variant. bias_inner is the inner
// product of the bias gap with the reference direction; callers construct it
// however they like (it is opaque here). gamma is the isotropic surrogate
// coefficient some callers use for that construction.
struct BiasSpec {
  double bias_inner = 0.0;
  double bias_norm_sq = 0.0;  // >= 0
  double gamma = 0.0;

  // bias_inner = gamma * grad_norm_sq under the isotropic surrogate.
  static BiasSpec isotropic(double gamma, double grad_norm_sq);
  void validate() const;
};

// Desired asymptotic SFT share.
struct MixtureTarget {
  double alpha = 0.5;  // in [0, 1]
  void validate() const;
};

// Closed-form value plus a flag for the degenerate-denominator fallback.
struct MuEstimate {
  double value = 0.0;
  bool degenerate_fallback = false;
};

// Expected squared error of the mixed gradient at weight mu.
double mse_objective(double mu, const NoiseMoments& m, MixtureTarget t);

// Upper-bound objective under systematic error: mse_objective plus
// mu^2 * bias_norm_sq - 2 * mu * bias_inner (mu-independent constants
// dropped, so the value may be negative; only the argmin matters).
double biased_bound_objective(double mu, const NoiseMoments& m,
                              const BiasSpec& b, MixtureTarget t);

// argmin of mse_objective for independent noise; requires cross_cov == 0.
// All-zero moments leave the objective flat: degenerate-input error.
double optimal_mu(const NoiseMoments& m, MixtureTarget t);

// Correlated-noise variant. A denominator at or below kDenEpsilon falls
// back to the independent formula and flags the event.
MuEstimate optimal_mu_correlated(const NoiseMoments& m, MixtureTarget t);

// Minimizer of biased_bound_objective; same fallback rule.
MuEstimate optimal_mu_biased(const NoiseMoments& m, const BiasSpec& b,
                             MixtureTarget t);

// Scan argmin of the matching objective over the grid {0, step, ..., 1};
// ties resolve toward the smaller mu. Slow reference used for validation.
double grid_oracle_mu(const NoiseMoments& m, const std::optional<BiasSpec>& b,
                      MixtureTarget t, double step);

}  // namespace gac
