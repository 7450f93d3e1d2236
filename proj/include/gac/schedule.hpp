#pragma once

// Deterministic prior schedules for the mixing weight. The blended
// controller anchors its adaptive estimate to one of these curves.

namespace gac {

enum class ScheduleKind { warmup_cosine, constant, linear };

struct PriorSchedule {
  ScheduleKind kind = ScheduleKind::warmup_cosine;
  long warmup_steps = 80;  // 0 <= warmup_steps <= total_steps
  long total_steps = 800;  // >= 1
  double mu_start = 0.85;  // all three levels in [0, 1]
  double mu_peak = 0.85;
  double mu_end = 0.15;

  void validate() const;  // throws std::invalid_argument
};

// Schedule value at step t (t >= 0). Steps past total_steps clamp to the
// final value. Knots are exact: t=0 -> mu_start (constant/linear/cosine with
// a warmup), t=warmup_steps -> mu_peak, t>=total_steps -> mu_end.
double prior_mu(const PriorSchedule& schedule, long t);

}  // namespace gac
