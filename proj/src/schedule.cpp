#include "gac/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gac {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_level(double v, const char* msg) {
  require(std::isfinite(v) && v >= 0.0 && v <= 1.0, msg);
}

}  // namespace

void PriorSchedule::validate() const {
  require(total_steps >= 1, "PriorSchedule.total_steps must be >= 1");
  require(warmup_steps >= 0 && warmup_steps <= total_steps,
          "PriorSchedule.warmup_steps must be in [0, total_steps]");
  check_level(mu_start, "PriorSchedule.mu_start must be in [0, 1]");
  check_level(mu_peak, "PriorSchedule.mu_peak must be in [0, 1]");
  check_level(mu_end, "PriorSchedule.mu_end must be in [0, 1]");
}

double prior_mu(const PriorSchedule& schedule, long t) {
  schedule.validate();
  require(t >= 0, "prior_mu: negative step");
  switch (schedule.kind) {
    case ScheduleKind::constant:
      return schedule.mu_start;
    case ScheduleKind::linear: {
      if (t >= schedule.total_steps) return schedule.mu_end;
      const double x = static_cast<double>(t) /
                       static_cast<double>(schedule.total_steps);
      return schedule.mu_start + (schedule.mu_end - schedule.mu_start) * x;
    }
    case ScheduleKind::warmup_cosine: {
      if (t >= schedule.total_steps) return schedule.mu_end;
      if (t < schedule.warmup_steps) {
        const double x = static_cast<double>(t) /
                         static_cast<double>(schedule.warmup_steps);
        return schedule.mu_start +
               (schedule.mu_peak - schedule.mu_start) * x;
      }
      if (t == schedule.warmup_steps) return schedule.mu_peak;
      const double x =
          static_cast<double>(t - schedule.warmup_steps) /
          static_cast<double>(schedule.total_steps - schedule.warmup_steps);
      return schedule.mu_end + (schedule.mu_peak - schedule.mu_end) * 0.5 *
                                   (1.0 + std::cos(std::numbers::pi * x));
    }
  }
  throw std::logic_error("prior_mu: unknown schedule kind");
}

}  // namespace gac
