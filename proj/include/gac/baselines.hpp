#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "gac/schedule.hpp"

// Reference mixing-weight rules. Each maps cheap per-step observations to a
// weight in [0, 1]; none of them sees the noise decomposition the guided
// controller uses.

namespace gac {

enum class BaselineKind {
  constant,      // fixed weight
  schedule,      // follow a prior schedule verbatim
  kl_ctrl,       // back off RL as KL grows: 1 - kl/kappa
  rewvar_ctrl,   // inverse reward variance, self-calibrated
  gradnorm_ctrl, // SFT share of the gradient-norm mass
  dwa,           // softmax over loss ratios, SFT share
};

struct BaselineRule {
  BaselineKind kind = BaselineKind::constant;
  double constant_value = 0.58;  // widely used fixed-mix reference point
  double kappa = 0.05;           // kl_ctrl: KL level where mu reaches 0, > 0
  double rewvar_floor = 1e-3;    // rewvar_ctrl: additive floor, > 0
  std::size_t calibration_window = 50;  // rewvar_ctrl: running-mean span, >= 1
  double dwa_temperature = 2.0;  // > 0
  PriorSchedule schedule;

  void validate() const;  // throws std::invalid_argument
};

// Observations a rule may consume. Absent fields a rule requires raise an
// error naming the field. Loss histories are ordered oldest to newest.
struct BaselineObservation {
  std::optional<double> kl;
  std::optional<double> reward_variance;
  std::optional<double> grad_norm_sft;
  std::optional<double> grad_norm_rl;
  std::vector<double> loss_history_sft;
  std::vector<double> loss_history_rl;
  long step = 0;
};

// Stateless except rewvar_ctrl's calibration buffer, which tracks the recent
// raw readings so the rule's running mean output sits near 0.5.
class BaselineController {
 public:
  explicit BaselineController(BaselineRule rule);
  double mu(const BaselineObservation& obs);

  const BaselineRule& rule() const { return rule_; }

 private:
  BaselineRule rule_;
  std::deque<double> rewvar_raw_;
};

}  // namespace gac
