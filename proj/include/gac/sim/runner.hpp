#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gac/baselines.hpp"
#include "gac/controller.hpp"
#include "gac/sim/quadratic.hpp"
#include "gac/sim/toy_policy.hpp"
#include "gac/trace.hpp"

// Training loop shared by both testbeds: sample a batch, pick a mixing
// weight, descend, record. The batch stream depends only on (testbed, seed),
// never on the arm, so different arms are comparable draw for draw.

namespace gac {

enum class TestbedKind { quadratic, toy_policy };

struct LyapunovSpec {
  double rho = 1.0;  // weight on the mixing term, >= 0
  double alpha_ref = 0.5;
  std::vector<double> theta_star;
  double smoothness = 0.0;  // informational; largest curvature when known
  double step_bound = 0.0;  // per-step parameter movement bound, 0 = unset

  void validate() const;  // throws std::invalid_argument
};

// ||theta - theta_star||^2 + rho * (mu - alpha_ref)^2.
double lyapunov_potential(const std::vector<double>& theta, double mu,
                          const LyapunovSpec& spec);

struct PotentialSpec {
  double rho = 1.0;
  double alpha_ref = 0.5;
  double toy_target_boost = 4.0;  // expert-logit lift anchoring toy runs
};

// One experimental arm: the guided controller or a single baseline rule.
struct ArmSpec {
  std::string name = "gac";
  bool guided = true;
  ControllerConfig controller;  // read when guided
  BaselineRule baseline;        // read otherwise
};

struct RunConfig {
  TestbedKind testbed = TestbedKind::quadratic;
  long steps = 800;
  double learning_rate = 0.05;
  // Quadratic runs have no policy distribution, so the drift signal fed to
  // the target controller is kl_scale * ||theta - theta_init||^2.
  double kl_scale = 1.0;
  double kl_ema_decay = 0.9;  // smoothing for the baseline arms' kl_ema column
  PotentialSpec potential;
  QuadraticProblem quadratic;
  ToyPolicyProblem toy;

  void validate() const;  // throws std::invalid_argument
};

// Reference point the potential measures against under this config: the
// mixture optimum at alpha_ref (quadratic) or boosted expert logits (toy).
std::vector<double> potential_anchor(const RunConfig& run);

RunTrace run_training(const RunConfig& run, const ArmSpec& arm,
                      std::uint64_t seed);

}  // namespace gac
