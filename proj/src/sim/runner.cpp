#include "gac/sim/runner.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>

namespace gac {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double distance_sq(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

double vec_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

// What one step measured before the weight is chosen. Filling this consumes
// the batch rng identically for every arm.
struct StepSample {
  double loss_sft = 0.0;
  double loss_rl = 0.0;
  double kl_raw = 0.0;
  double reward_variance = 0.0;
  std::vector<double> grad_sft;
  std::vector<double> grad_rl;
  RawProxies exact;  // quadratic only
  StepInput input;   // toy only
};

StepSample sample_quadratic(const RunConfig& run,
                            const std::vector<double>& theta,
                            std::mt19937_64& rng) {
  const QuadraticProblem& p = run.quadratic;
  StepSample s;
  SampledGradients g = quad_sample_gradients(p, theta, rng);
  s.grad_sft = std::move(g.sft);
  s.grad_rl = std::move(g.rl);
  const NoiseMoments m = quad_exact_moments(p, theta);
  s.exact = RawProxies{m.sft_var, m.rl_var, m.disagreement_sq};
  s.loss_sft = quad_loss_sft(p, theta);
  s.loss_rl = quad_loss_rl(p, theta);
  s.kl_raw = run.kl_scale * distance_sq(theta, p.theta_init);
  s.reward_variance = m.rl_var;
  return s;
}

StepSample sample_toy(ToyPolicyProblem& toy, const std::vector<double>& theta,
                      std::mt19937_64& rng) {
  toy.theta = theta;
  StepSample s;
  const ToyBatch batch = sample_toy_batch(toy, rng);
  ToyGradients g = toy_exact_gradients(toy, batch);
  s.grad_sft = std::move(g.sft);
  s.grad_rl = std::move(g.rl);
  s.loss_sft = g.loss_sft;
  s.loss_rl = g.loss_rl;
  s.kl_raw = toy_exact_kl(toy);

  // Coefficient streams are paired per response token: the rollout's
  // advantage against phi of the probability of the token it actually
  // sampled. A group-shared sft stream would zero out the covariance the
  // disagreement proxy measures (advantages sum to 0 within each group).
  const std::vector<std::uint8_t> mask(toy.seq_len, 1);
  std::vector<double> rewards;
  for (std::size_t g_i = 0; g_i < batch.groups.size(); ++g_i) {
    const std::size_t prompt = batch.prompts[g_i];
    std::vector<std::vector<double>> probs(toy.seq_len);
    for (std::size_t t = 0; t < toy.seq_len; ++t)
      probs[t] = toy_token_probs(toy, toy.theta, prompt, t);
    const RolloutGroup& group = batch.groups[g_i];
    for (std::size_t i = 0; i < group.sequences.size(); ++i) {
      const double adv = group.advantages[i];
      s.input.advantages.push_back(adv);
      rewards.push_back(group.rewards[i]);
      std::vector<double> sft_coeffs(toy.seq_len);
      for (std::size_t t = 0; t < toy.seq_len; ++t)
        sft_coeffs[t] = phi(probs[t][group.sequences[i][t]]);
      s.input.coeffs.add_sample(std::vector<double>(toy.seq_len, adv),
                                sft_coeffs, mask);
    }
  }
  s.input.sft_nll = toy_expert_nll(toy, batch);
  s.input.kl_raw = s.kl_raw;
  s.reward_variance = advantage_dispersion(rewards);
  return s;
}

}  // namespace

void LyapunovSpec::validate() const {
  require(std::isfinite(rho) && rho >= 0.0, "LyapunovSpec.rho must be >= 0");
  require(std::isfinite(alpha_ref), "LyapunovSpec.alpha_ref must be finite");
  require(!theta_star.empty(), "LyapunovSpec.theta_star must be nonempty");
  for (double v : theta_star)
    require(std::isfinite(v), "LyapunovSpec.theta_star must be finite");
}

double lyapunov_potential(const std::vector<double>& theta, double mu,
                          const LyapunovSpec& spec) {
  spec.validate();
  require(theta.size() == spec.theta_star.size(),
          "lyapunov_potential: dimension mismatch");
  require(std::isfinite(mu), "lyapunov_potential: mu must be finite");
  const double dist = distance_sq(theta, spec.theta_star);
  const double dmu = mu - spec.alpha_ref;
  return dist + spec.rho * dmu * dmu;
}

void RunConfig::validate() const {
  require(steps >= 1, "RunConfig.steps must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate > 0.0,
          "RunConfig.learning_rate must be > 0");
  require(std::isfinite(kl_scale) && kl_scale >= 0.0,
          "RunConfig.kl_scale must be >= 0");
  require(std::isfinite(kl_ema_decay) && kl_ema_decay >= 0.0 &&
              kl_ema_decay < 1.0,
          "RunConfig.kl_ema_decay must be in [0, 1)");
  require(std::isfinite(potential.rho) && potential.rho >= 0.0,
          "PotentialSpec.rho must be >= 0");
  require(std::isfinite(potential.alpha_ref),
          "PotentialSpec.alpha_ref must be finite");
  require(std::isfinite(potential.toy_target_boost),
          "PotentialSpec.toy_target_boost must be finite");
  if (testbed == TestbedKind::quadratic)
    quadratic.validate();
  else
    toy.validate();
}

std::vector<double> potential_anchor(const RunConfig& run) {
  run.validate();
  if (run.testbed == TestbedKind::quadratic) {
    const double a = std::min(1.0, std::max(0.0, run.potential.alpha_ref));
    return quad_mixture_optimum(run.quadratic, a);
  }
  return toy_expert_target(run.toy, run.potential.toy_target_boost);
}

RunTrace run_training(const RunConfig& run, const ArmSpec& arm,
                      std::uint64_t seed) {
  run.validate();
  require(!arm.name.empty(), "ArmSpec.name must be nonempty");
  if (arm.guided)
    arm.controller.validate();
  else
    arm.baseline.validate();

  RunTrace trace;
  trace.arm = arm.name;
  trace.seed = seed;
  trace.rows.reserve(static_cast<std::size_t>(run.steps));

  std::mt19937_64 batch_rng(seed);

  LyapunovSpec pot;
  pot.rho = run.potential.rho;
  pot.alpha_ref = run.potential.alpha_ref;
  pot.theta_star = potential_anchor(run);
  if (run.testbed == TestbedKind::quadratic)
    pot.smoothness = run.quadratic.smoothness_bound();

  ControllerState ctrl;
  std::optional<BaselineController> base;
  if (arm.guided)
    ctrl = ControllerState::init(arm.controller);
  else
    base.emplace(arm.baseline);

  std::vector<double> theta = run.testbed == TestbedKind::quadratic
                                  ? run.quadratic.theta_init
                                  : run.toy.theta;
  ToyPolicyProblem toy = run.toy;  // local copy whose logits track the run

  std::vector<double> hist_sft;
  std::vector<double> hist_rl;
  double base_kl_ema = 0.0;
  bool base_kl_seen = false;

  for (long t = 0; t < run.steps; ++t) {
    StepSample s = run.testbed == TestbedKind::quadratic
                       ? sample_quadratic(run, theta, batch_rng)
                       : sample_toy(toy, theta, batch_rng);
    if (!std::isfinite(s.loss_sft) || !std::isfinite(s.loss_rl) ||
        !std::isfinite(s.kl_raw)) {
      trace.aborted = true;
      trace.abort_reason = "nonfinite loss or kl at step " + std::to_string(t);
      break;
    }

    TraceRow row;
    row.step = t;
    row.kl_raw = s.kl_raw;
    double mu = 0.0;
    if (arm.guided) {
      const StepOutcome out =
          run.testbed == TestbedKind::quadratic
              ? controller_step_exact(ctrl, s.exact, s.kl_raw, arm.controller)
              : controller_step(ctrl, s.input, arm.controller);
      mu = out.mu;
      row.alpha = out.alpha;
      row.kl_ema = ctrl.alpha.kl_ema;
      row.sft_var_raw = out.diag.raw.sft_var;
      row.rl_var_raw = out.diag.raw.rl_var;
      row.disagree_raw = out.diag.raw.disagreement_sq;
      row.sft_var_ema = ctrl.stats.sft_var;
      row.rl_var_ema = ctrl.stats.rl_var;
      row.disagree_ema = ctrl.stats.disagreement_sq;
      row.mu_star = out.diag.mu_star;
      row.mu_ada = out.diag.mu_ada;
      row.mu_blend = out.diag.mu_blend;
      row.flags = out.diag.flags;
    } else {
      BaselineObservation obs;
      obs.kl = s.kl_raw;
      obs.reward_variance = s.reward_variance;
      obs.grad_norm_sft = vec_norm(s.grad_sft);
      obs.grad_norm_rl = vec_norm(s.grad_rl);
      obs.loss_history_sft = hist_sft;
      obs.loss_history_rl = hist_rl;
      obs.step = t;
      mu = base->mu(obs);
      base_kl_ema = base_kl_seen ? run.kl_ema_decay * base_kl_ema +
                                       (1.0 - run.kl_ema_decay) * s.kl_raw
                                 : s.kl_raw;
      base_kl_seen = true;
      row.alpha = kNan;
      row.kl_ema = base_kl_ema;
      row.sft_var_raw = row.rl_var_raw = row.disagree_raw = kNan;
      row.sft_var_ema = row.rl_var_ema = row.disagree_ema = kNan;
      row.mu_star = row.mu_ada = row.mu_blend = kNan;
    }
    if (!std::isfinite(mu)) {
      trace.aborted = true;
      trace.abort_reason = "nonfinite weight at step " + std::to_string(t);
      break;
    }

    hist_sft.push_back(s.loss_sft);
    hist_rl.push_back(s.loss_rl);

    row.mu = mu;
    row.loss_sft = s.loss_sft;
    row.loss_rl = s.loss_rl;
    row.loss_mix = compose_loss(mu, s.loss_rl, s.loss_sft);
    row.potential = lyapunov_potential(theta, mu, pot);

    double step_norm_sq = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double d = run.learning_rate *
                       (mu * s.grad_sft[i] + (1.0 - mu) * s.grad_rl[i]);
      theta[i] -= d;
      step_norm_sq += d * d;
    }
    trace.rows.push_back(row);
    trace.step_norms.push_back(std::sqrt(step_norm_sq));
    if (!all_finite(theta)) {
      trace.aborted = true;
      trace.abort_reason =
          "nonfinite parameters after step " + std::to_string(t);
      break;
    }
  }
  return trace;
}

}  // namespace gac
