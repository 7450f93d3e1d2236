#pragma once

#include <random>
#include <vector>

#include "gac/estimator.hpp"

// Diagonal quadratic testbed: two SPD objectives with known optima, plus
// Gaussian gradient noise with configurable per-coordinate second moments.
// Every quantity the controller estimates elsewhere is exact here.

namespace gac {

struct GaussianNoise {
  double sft_var = 0.0;    // per-coordinate noise variance, >= 0
  double rl_var = 0.0;
  double cross_cov = 0.0;  // per-coordinate; |c| <= sqrt(sft_var * rl_var)
  std::vector<double> bias_sft;  // systematic offsets; empty means zero
  std::vector<double> bias_rl;
};

struct QuadraticProblem {
  std::vector<double> curvature_sft;  // positive diagonal of A_s
  std::vector<double> curvature_rl;
  std::vector<double> optimum_sft;
  std::vector<double> optimum_rl;
  std::vector<double> theta_init;
  GaussianNoise noise;

  std::size_t dim() const { return curvature_sft.size(); }
  double smoothness_bound() const;  // largest curvature entry of either side
  void validate() const;            // throws std::invalid_argument
};

double quad_loss_sft(const QuadraticProblem& p, const std::vector<double>& theta);
double quad_loss_rl(const QuadraticProblem& p, const std::vector<double>& theta);
std::vector<double> quad_grad_sft(const QuadraticProblem& p,
                                  const std::vector<double>& theta);
std::vector<double> quad_grad_rl(const QuadraticProblem& p,
                                 const std::vector<double>& theta);

// Ground-truth noise moments at theta: the disagreement term is the exact
// squared gradient gap summed over coordinates, so the variance and
// covariance terms are the matching totals (dim() times the per-coordinate
// values).
NoiseMoments quad_exact_moments(const QuadraticProblem& p,
                                const std::vector<double>& theta);

struct SampledGradients {
  std::vector<double> sft;
  std::vector<double> rl;
};

// True gradients plus correlated Gaussian noise realizing (sft_var, rl_var,
// cross_cov) per coordinate, plus the configured biases.
SampledGradients quad_sample_gradients(const QuadraticProblem& p,
                                       const std::vector<double>& theta,
                                       std::mt19937_64& rng);

// Minimizer of alpha * L_sft + (1 - alpha) * L_rl; reference point for the
// descent potential.
std::vector<double> quad_mixture_optimum(const QuadraticProblem& p,
                                         double alpha);

}  // namespace gac
