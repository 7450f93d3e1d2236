#include "gac/sim/quadratic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gac {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_bias(const std::vector<double>& bias, std::size_t dim,
                const char* msg) {
  require(bias.empty() || bias.size() == dim, msg);
  for (double b : bias) require(std::isfinite(b), msg);
}

double bias_at(const std::vector<double>& bias, std::size_t i) {
  return bias.empty() ? 0.0 : bias[i];
}

}  // namespace

double QuadraticProblem::smoothness_bound() const {
  double l = 0.0;
  for (double c : curvature_sft) l = std::max(l, c);
  for (double c : curvature_rl) l = std::max(l, c);
  return l;
}

void QuadraticProblem::validate() const {
  const std::size_t d = dim();
  require(d >= 1, "QuadraticProblem: dimension must be >= 1");
  require(curvature_rl.size() == d && optimum_sft.size() == d &&
              optimum_rl.size() == d && theta_init.size() == d,
          "QuadraticProblem: field dimensions disagree");
  for (double c : curvature_sft)
    require(std::isfinite(c) && c > 0.0,
            "QuadraticProblem: curvature_sft entries must be > 0");
  for (double c : curvature_rl)
    require(std::isfinite(c) && c > 0.0,
            "QuadraticProblem: curvature_rl entries must be > 0");
  for (double v : optimum_sft)
    require(std::isfinite(v), "QuadraticProblem: nonfinite optimum_sft");
  for (double v : optimum_rl)
    require(std::isfinite(v), "QuadraticProblem: nonfinite optimum_rl");
  for (double v : theta_init)
    require(std::isfinite(v), "QuadraticProblem: nonfinite theta_init");
  require(std::isfinite(noise.sft_var) && noise.sft_var >= 0.0,
          "GaussianNoise.sft_var must be >= 0");
  require(std::isfinite(noise.rl_var) && noise.rl_var >= 0.0,
          "GaussianNoise.rl_var must be >= 0");
  require(std::isfinite(noise.cross_cov) &&
              noise.cross_cov * noise.cross_cov <=
                  noise.sft_var * noise.rl_var + 1e-15,
          "GaussianNoise.cross_cov violates |c| <= sqrt(ss * sr)");
  check_bias(noise.bias_sft, d, "GaussianNoise.bias_sft has wrong shape");
  check_bias(noise.bias_rl, d, "GaussianNoise.bias_rl has wrong shape");
}

double quad_loss_sft(const QuadraticProblem& p,
                     const std::vector<double>& theta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double d = theta[i] - p.optimum_sft[i];
    acc += 0.5 * p.curvature_sft[i] * d * d;
  }
  return acc;
}

double quad_loss_rl(const QuadraticProblem& p,
                    const std::vector<double>& theta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double d = theta[i] - p.optimum_rl[i];
    acc += 0.5 * p.curvature_rl[i] * d * d;
  }
  return acc;
}

std::vector<double> quad_grad_sft(const QuadraticProblem& p,
                                  const std::vector<double>& theta) {
  std::vector<double> g(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i)
    g[i] = p.curvature_sft[i] * (theta[i] - p.optimum_sft[i]);
  return g;
}

std::vector<double> quad_grad_rl(const QuadraticProblem& p,
                                 const std::vector<double>& theta) {
  std::vector<double> g(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i)
    g[i] = p.curvature_rl[i] * (theta[i] - p.optimum_rl[i]);
  return g;
}

NoiseMoments quad_exact_moments(const QuadraticProblem& p,
                                const std::vector<double>& theta) {
  p.validate();
  require(theta.size() == p.dim(), "quad_exact_moments: theta has wrong shape");
  const std::vector<double> gs = quad_grad_sft(p, theta);
  const std::vector<double> gr = quad_grad_rl(p, theta);
  double gap = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i)
    gap += (gs[i] - gr[i]) * (gs[i] - gr[i]);
  const double d = static_cast<double>(p.dim());
  return NoiseMoments{d * p.noise.sft_var, d * p.noise.rl_var, gap,
                      d * p.noise.cross_cov};
}

SampledGradients quad_sample_gradients(const QuadraticProblem& p,
                                       const std::vector<double>& theta,
                                       std::mt19937_64& rng) {
  p.validate();
  require(theta.size() == p.dim(),
          "quad_sample_gradients: theta has wrong shape");
  SampledGradients out{quad_grad_sft(p, theta), quad_grad_rl(p, theta)};
  const double ss = std::sqrt(p.noise.sft_var);
  // Conditional factorization keeps the pair exactly at the target
  // covariance: eps_r = (c / ss^2) * eps_s + residual.
  const double resid_var =
      p.noise.sft_var > 0.0
          ? p.noise.rl_var -
                p.noise.cross_cov * p.noise.cross_cov / p.noise.sft_var
          : p.noise.rl_var;
  const double resid_sd = std::sqrt(std::max(0.0, resid_var));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double eps_s = ss * z1;
    const double eps_r =
        (p.noise.sft_var > 0.0 ? (p.noise.cross_cov / p.noise.sft_var) * eps_s
                               : 0.0) +
        resid_sd * z2;
    out.sft[i] += eps_s + bias_at(p.noise.bias_sft, i);
    out.rl[i] += eps_r + bias_at(p.noise.bias_rl, i);
  }
  return out;
}

std::vector<double> quad_mixture_optimum(const QuadraticProblem& p,
                                         double alpha) {
  p.validate();
  require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0,
          "quad_mixture_optimum: alpha must be in [0, 1]");
  std::vector<double> theta(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double ws = alpha * p.curvature_sft[i];
    const double wr = (1.0 - alpha) * p.curvature_rl[i];
    theta[i] = (ws * p.optimum_sft[i] + wr * p.optimum_rl[i]) / (ws + wr);
  }
  return theta;
}

}  // namespace gac
