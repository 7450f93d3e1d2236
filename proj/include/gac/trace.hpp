#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Step-indexed record of one training run. The CSV column order is frozen;
// tests and downstream tooling rely on it byte for byte.

namespace gac {

struct TraceRow {
  long step = 0;
  double mu = 0.0;
  double alpha = 0.0;  // NaN on arms without a target controller
  double kl_raw = 0.0;
  double kl_ema = 0.0;
  double sft_var_raw = 0.0;  // proxy columns are NaN on baseline arms
  double rl_var_raw = 0.0;
  double disagree_raw = 0.0;
  double sft_var_ema = 0.0;
  double rl_var_ema = 0.0;
  double disagree_ema = 0.0;
  double mu_star = 0.0;
  double mu_ada = 0.0;
  double mu_blend = 0.0;
  double loss_sft = 0.0;
  double loss_rl = 0.0;
  double loss_mix = 0.0;
  double potential = 0.0;
  unsigned flags = 0;
};

struct RunTrace {
  std::string arm;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  bool aborted = false;  // a nonfinite value stopped the run early
  std::string abort_reason;
  std::vector<TraceRow> rows;
  std::vector<double> step_norms;  // per-step ||delta theta||, not serialized

  std::vector<double> mu_series() const;
  std::vector<double> kl_ema_series() const;
  std::vector<double> potential_series() const;
};

// Column names in their frozen order, comma separated.
extern const char* const kTraceCsvHeader;

// Shortest round-trip decimal rendering (std::to_chars).
std::string format_double(double v);

// Metadata comment line, header, then one line per row.
std::string trace_to_csv(const RunTrace& trace);

void write_file(const std::string& path, const std::string& bytes);

// FNV-1a over the canonical serialized config; stable across runs.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace gac
