#include "gac/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gac/estimator.hpp"
#include "gac/metrics.hpp"

namespace gac {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config error at " + path + ": " + what);
}

const json* child(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) fail(path, "expected an object");
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_num(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

long as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<long>();
}

std::string as_str(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

double num_or(const json& obj, const std::string& path, const char* key,
              double def) {
  const json* v = child(obj, path, key);
  return v ? as_num(*v, path + "." + key) : def;
}

long int_or(const json& obj, const std::string& path, const char* key,
            long def) {
  const json* v = child(obj, path, key);
  return v ? as_int(*v, path + "." + key) : def;
}

std::string str_or(const json& obj, const std::string& path, const char* key,
                   const std::string& def) {
  const json* v = child(obj, path, key);
  return v ? as_str(*v, path + "." + key) : def;
}

std::vector<double> vec_or(const json& obj, const std::string& path,
                           const char* key, std::vector<double> def) {
  const json* v = child(obj, path, key);
  if (!v) return def;
  const std::string p = path + "." + key;
  if (!v->is_array()) fail(p, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i)
    out.push_back(as_num((*v)[i], p + "[" + std::to_string(i) + "]"));
  return out;
}

ScheduleKind schedule_kind_from(const std::string& s, const std::string& path) {
  if (s == "warmup_cosine") return ScheduleKind::warmup_cosine;
  if (s == "constant") return ScheduleKind::constant;
  if (s == "linear") return ScheduleKind::linear;
  fail(path, "unknown schedule kind '" + s + "'");
}

const char* schedule_kind_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::warmup_cosine: return "warmup_cosine";
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::linear: return "linear";
  }
  return "?";
}

DegradationKind degradation_kind_from(const std::string& s,
                                      const std::string& path) {
  if (s == "none") return DegradationKind::none;
  if (s == "constant_rl_var") return DegradationKind::constant_rl_var;
  if (s == "shuffled_disagreement") return DegradationKind::shuffled_disagreement;
  if (s == "random_disagreement") return DegradationKind::random_disagreement;
  fail(path, "unknown degradation kind '" + s + "'");
}

const char* degradation_kind_name(DegradationKind k) {
  switch (k) {
    case DegradationKind::none: return "none";
    case DegradationKind::constant_rl_var: return "constant_rl_var";
    case DegradationKind::shuffled_disagreement: return "shuffled_disagreement";
    case DegradationKind::random_disagreement: return "random_disagreement";
  }
  return "?";
}

const char* baseline_kind_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::constant: return "constant";
    case BaselineKind::schedule: return "schedule";
    case BaselineKind::kl_ctrl: return "kl_ctrl";
    case BaselineKind::rewvar_ctrl: return "rewvar_ctrl";
    case BaselineKind::gradnorm_ctrl: return "gradnorm_ctrl";
    case BaselineKind::dwa: return "dwa";
  }
  return "?";
}

PriorSchedule parse_schedule(const json& obj, const std::string& path,
                             PriorSchedule out) {
  out.kind = schedule_kind_from(
      str_or(obj, path, "kind", schedule_kind_name(out.kind)), path + ".kind");
  out.warmup_steps = int_or(obj, path, "warmup_steps", out.warmup_steps);
  out.total_steps = int_or(obj, path, "total_steps", out.total_steps);
  out.mu_start = num_or(obj, path, "mu_start", out.mu_start);
  out.mu_peak = num_or(obj, path, "mu_peak", out.mu_peak);
  out.mu_end = num_or(obj, path, "mu_end", out.mu_end);
  return out;
}

ControllerConfig parse_controller(const json& obj, const std::string& path) {
  ControllerConfig c;
  c.beta_ema = num_or(obj, path, "beta_ema", c.beta_ema);
  c.cap = num_or(obj, path, "cap", c.cap);
  c.blend_lambda = num_or(obj, path, "blend_lambda", c.blend_lambda);
  c.update_freq = int_or(obj, path, "update_freq", c.update_freq);
  c.early_freq_steps = int_or(obj, path, "early_freq_steps", c.early_freq_steps);
  c.early_freq = int_or(obj, path, "early_freq", c.early_freq);
  c.mu_min = num_or(obj, path, "mu_min", c.mu_min);
  c.mu_max = num_or(obj, path, "mu_max", c.mu_max);
  c.mu_init = num_or(obj, path, "mu_init", c.mu_init);
  c.trim_frac = num_or(obj, path, "trim_frac", c.trim_frac);
  c.stats_ema_decay = num_or(obj, path, "stats_ema_decay", c.stats_ema_decay);
  if (const json* prior = child(obj, path, "prior"))
    c.prior = parse_schedule(*prior, path + ".prior", c.prior);
  if (const json* alpha = child(obj, path, "alpha")) {
    const std::string p = path + ".alpha";
    c.alpha.kl_target = num_or(*alpha, p, "kl_target", c.alpha.kl_target);
    c.alpha.alpha_min = num_or(*alpha, p, "alpha_min", c.alpha.alpha_min);
    c.alpha.alpha_max = num_or(*alpha, p, "alpha_max", c.alpha.alpha_max);
    c.alpha.eta_up = num_or(*alpha, p, "eta_up", c.alpha.eta_up);
    c.alpha.eta_down = num_or(*alpha, p, "eta_down", c.alpha.eta_down);
    c.alpha.hysteresis = num_or(*alpha, p, "hysteresis", c.alpha.hysteresis);
    c.alpha.kl_ema_decay = num_or(*alpha, p, "kl_ema_decay", c.alpha.kl_ema_decay);
    c.alpha.alpha_init = num_or(*alpha, p, "alpha_init", c.alpha.alpha_init);
  }
  if (const json* degr = child(obj, path, "degradation")) {
    const std::string p = path + ".degradation";
    c.degradation.kind = degradation_kind_from(
        str_or(*degr, p, "kind", degradation_kind_name(c.degradation.kind)),
        p + ".kind");
    c.degradation.constant_value =
        num_or(*degr, p, "constant_value", c.degradation.constant_value);
    c.degradation.seed = static_cast<std::uint64_t>(
        int_or(*degr, p, "seed", static_cast<long>(c.degradation.seed)));
  }
  return c;
}

ArmSpec parse_arm(const json& obj, const std::string& path) {
  ArmSpec arm;
  const json* name = child(obj, path, "name");
  if (!name) fail(path + ".name", "required");
  arm.name = as_str(*name, path + ".name");
  if (arm.name.empty()) fail(path + ".name", "must be nonempty");

  const std::string kind = str_or(obj, path, "kind", "gac");
  if (kind == "gac") {
    arm.guided = true;
    if (const json* ctrl = child(obj, path, "controller"))
      arm.controller = parse_controller(*ctrl, path + ".controller");
    return arm;
  }
  arm.guided = false;
  if (kind == "constant") {
    arm.baseline.kind = BaselineKind::constant;
    arm.baseline.constant_value =
        num_or(obj, path, "constant_value", arm.baseline.constant_value);
  } else if (kind == "schedule") {
    arm.baseline.kind = BaselineKind::schedule;
    if (const json* sched = child(obj, path, "schedule"))
      arm.baseline.schedule =
          parse_schedule(*sched, path + ".schedule", arm.baseline.schedule);
  } else if (kind == "kl_ctrl") {
    arm.baseline.kind = BaselineKind::kl_ctrl;
    arm.baseline.kappa = num_or(obj, path, "kappa", arm.baseline.kappa);
  } else if (kind == "rewvar_ctrl") {
    arm.baseline.kind = BaselineKind::rewvar_ctrl;
    arm.baseline.rewvar_floor =
        num_or(obj, path, "rewvar_floor", arm.baseline.rewvar_floor);
    arm.baseline.calibration_window = static_cast<std::size_t>(int_or(
        obj, path, "calibration_window",
        static_cast<long>(arm.baseline.calibration_window)));
  } else if (kind == "gradnorm_ctrl") {
    arm.baseline.kind = BaselineKind::gradnorm_ctrl;
  } else if (kind == "dwa") {
    arm.baseline.kind = BaselineKind::dwa;
    arm.baseline.dwa_temperature =
        num_or(obj, path, "dwa_temperature", arm.baseline.dwa_temperature);
  } else {
    fail(path + ".kind", "unknown arm kind '" + kind + "'");
  }
  return arm;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return out;
}

// --- canonical serialization -----------------------------------------------

ordered schedule_json(const PriorSchedule& s) {
  return ordered{{"kind", schedule_kind_name(s.kind)},
                 {"warmup_steps", s.warmup_steps},
                 {"total_steps", s.total_steps},
                 {"mu_start", s.mu_start},
                 {"mu_peak", s.mu_peak},
                 {"mu_end", s.mu_end}};
}

ordered controller_json(const ControllerConfig& c) {
  return ordered{
      {"beta_ema", c.beta_ema},
      {"cap", c.cap},
      {"blend_lambda", c.blend_lambda},
      {"update_freq", c.update_freq},
      {"early_freq_steps", c.early_freq_steps},
      {"early_freq", c.early_freq},
      {"mu_min", c.mu_min},
      {"mu_max", c.mu_max},
      {"mu_init", c.mu_init},
      {"trim_frac", c.trim_frac},
      {"stats_ema_decay", c.stats_ema_decay},
      {"prior", schedule_json(c.prior)},
      {"alpha",
       ordered{{"kl_target", c.alpha.kl_target},
               {"alpha_min", c.alpha.alpha_min},
               {"alpha_max", c.alpha.alpha_max},
               {"eta_up", c.alpha.eta_up},
               {"eta_down", c.alpha.eta_down},
               {"hysteresis", c.alpha.hysteresis},
               {"kl_ema_decay", c.alpha.kl_ema_decay},
               {"alpha_init", c.alpha.alpha_init}}},
      {"degradation",
       ordered{{"kind", degradation_kind_name(c.degradation.kind)},
               {"constant_value", c.degradation.constant_value},
               {"seed", c.degradation.seed}}}};
}

ordered arm_json(const ArmSpec& arm) {
  if (arm.guided)
    return ordered{{"name", arm.name},
                   {"kind", "gac"},
                   {"controller", controller_json(arm.controller)}};
  ordered j{{"name", arm.name},
            {"kind", baseline_kind_name(arm.baseline.kind)},
            {"constant_value", arm.baseline.constant_value},
            {"kappa", arm.baseline.kappa},
            {"rewvar_floor", arm.baseline.rewvar_floor},
            {"calibration_window", arm.baseline.calibration_window},
            {"dwa_temperature", arm.baseline.dwa_temperature}};
  if (arm.baseline.kind == BaselineKind::schedule)
    j["schedule"] = schedule_json(arm.baseline.schedule);
  return j;
}

ordered problem_json(const ExperimentConfig& cfg) {
  if (cfg.run.testbed == TestbedKind::quadratic) {
    const QuadraticProblem& p = cfg.run.quadratic;
    return ordered{{"curvature_sft", p.curvature_sft},
                   {"curvature_rl", p.curvature_rl},
                   {"optimum_sft", p.optimum_sft},
                   {"optimum_rl", p.optimum_rl},
                   {"theta_init", p.theta_init},
                   {"noise",
                    ordered{{"sft_var", p.noise.sft_var},
                            {"rl_var", p.noise.rl_var},
                            {"cross_cov", p.noise.cross_cov},
                            {"bias_sft", p.noise.bias_sft},
                            {"bias_rl", p.noise.bias_rl}}}};
  }
  const ToyPolicyProblem& p = cfg.run.toy;
  return ordered{{"vocab", p.vocab},
                 {"seq_len", p.seq_len},
                 {"group_size", p.group_size},
                 {"reward",
                  p.reward == RewardKind::exact_match ? "exact_match"
                                                      : "pattern_count"},
                 {"expert", p.expert},
                 {"theta", p.theta},
                 {"theta_ref", p.theta_ref}};
}

// --- parallel run pool ------------------------------------------------------

void run_parallel(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct RunJob {
  const ArmSpec* arm = nullptr;
  std::uint64_t seed = 0;
  RunTrace trace;
};

ordered stats_json(const MetricStats& s) {
  return ordered{{"mean", s.mean}, {"stddev", s.stddev},
                 {"per_seed", s.per_seed}};
}

ordered summary_json(const ArmSummary& s) {
  return ordered{{"kl_area", stats_json(s.kl_area)},
                 {"step_shift_rate", stats_json(s.step_shift_rate)},
                 {"window_shift_rate", stats_json(s.window_shift_rate)},
                 {"final_loss_mix", stats_json(s.final_loss_mix)},
                 {"potential_start", stats_json(s.potential_start)},
                 {"potential_end", stats_json(s.potential_end)}};
}

// Runs every (arm x seed) job, writes the trace CSVs, and reports. The
// summary is only meaningful when no run aborted.
struct ExecOutcome {
  bool any_aborted = false;
  std::map<std::string, std::vector<RunTrace>> by_arm;
};

ExecOutcome execute_runs(const ExperimentConfig& cfg, std::ostream& log) {
  const std::uint64_t hash = config_hash(cfg);
  fs::create_directories(cfg.out_dir);

  std::vector<RunJob> jobs;
  for (const ArmSpec& arm : cfg.arms)
    for (const std::uint64_t seed : cfg.seeds)
      jobs.push_back(RunJob{&arm, seed, RunTrace{}});

  run_parallel(jobs.size(), cfg.workers, [&](std::size_t i) {
    jobs[i].trace = run_training(cfg.run, *jobs[i].arm, jobs[i].seed);
    jobs[i].trace.config_hash = hash;
  });

  ExecOutcome out;
  for (RunJob& job : jobs) {
    const fs::path path =
        fs::path(cfg.out_dir) /
        (sanitize(job.arm->name) + "_seed" + std::to_string(job.seed) + ".csv");
    write_file(path.string(), trace_to_csv(job.trace));
    log << (job.trace.aborted ? "aborted " : "wrote   ") << path.string();
    if (job.trace.aborted) log << " (" << job.trace.abort_reason << ")";
    log << "\n";
    out.any_aborted = out.any_aborted || job.trace.aborted;
    out.by_arm[job.arm->name].push_back(std::move(job.trace));
  }
  return out;
}

}  // namespace

QuadraticProblem default_quadratic_problem() {
  QuadraticProblem p;
  p.curvature_sft = {1.0, 2.0};
  p.curvature_rl = {2.0, 1.0};
  p.optimum_sft = {0.3, -0.3};
  p.optimum_rl = {2.5, -2.0};
  p.theta_init = {0.0, 0.0};
  p.noise.sft_var = 0.05;
  p.noise.rl_var = 0.4;
  return p;
}

ToyPolicyProblem default_toy_problem() {
  ToyPolicyProblem p;
  p.vocab = 6;
  p.seq_len = 5;
  p.group_size = 8;
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<std::size_t> seq(p.seq_len);
    for (std::size_t t = 0; t < p.seq_len; ++t) seq[t] = (i + t) % p.vocab;
    p.expert.push_back(seq);
  }
  p.theta.assign(p.param_count(), 0.0);
  p.theta_ref.assign(p.param_count(), 0.0);
  return p;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail("config", std::string("not valid JSON: ") + e.what());
  }
  const std::string path = "config";
  if (!root.is_object()) fail(path, "expected a JSON object");

  ExperimentConfig cfg;
  const json* version = child(root, path, "version");
  if (!version) fail(path + ".version", "required");
  if (as_int(*version, path + ".version") != 1)
    fail(path + ".version", "unsupported version (expected 1)");

  const std::string testbed = str_or(root, path, "testbed", "quadratic");
  if (testbed == "quadratic")
    cfg.run.testbed = TestbedKind::quadratic;
  else if (testbed == "toy" || testbed == "toy_policy")
    cfg.run.testbed = TestbedKind::toy_policy;
  else
    fail(path + ".testbed", "unknown testbed '" + testbed + "'");

  cfg.run.steps = int_or(root, path, "steps", cfg.run.steps);
  cfg.run.learning_rate =
      num_or(root, path, "learning_rate", cfg.run.learning_rate);
  cfg.run.kl_scale = num_or(root, path, "kl_scale", cfg.run.kl_scale);
  cfg.run.kl_ema_decay =
      num_or(root, path, "kl_ema_decay", cfg.run.kl_ema_decay);
  cfg.kl_target = num_or(root, path, "kl_target", cfg.kl_target);
  cfg.shift_window = static_cast<std::size_t>(int_or(
      root, path, "shift_window", static_cast<long>(cfg.shift_window)));
  cfg.out_dir = str_or(root, path, "out_dir", cfg.out_dir);
  cfg.workers = static_cast<std::size_t>(
      int_or(root, path, "workers", static_cast<long>(cfg.workers)));

  if (const json* seeds = child(root, path, "seeds")) {
    const std::string p = path + ".seeds";
    if (!seeds->is_array() || seeds->empty())
      fail(p, "expected a nonempty array of integers");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < seeds->size(); ++i) {
      const long v = as_int((*seeds)[i], p + "[" + std::to_string(i) + "]");
      if (v < 0) fail(p + "[" + std::to_string(i) + "]", "must be >= 0");
      cfg.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }

  if (const json* pot = child(root, path, "potential")) {
    const std::string p = path + ".potential";
    cfg.run.potential.rho = num_or(*pot, p, "rho", cfg.run.potential.rho);
    cfg.run.potential.alpha_ref =
        num_or(*pot, p, "alpha_ref", cfg.run.potential.alpha_ref);
    cfg.run.potential.toy_target_boost = num_or(
        *pot, p, "toy_target_boost", cfg.run.potential.toy_target_boost);
  }

  cfg.run.quadratic = default_quadratic_problem();
  if (const json* quad = child(root, path, "quadratic")) {
    const std::string p = path + ".quadratic";
    QuadraticProblem& q = cfg.run.quadratic;
    q.curvature_sft = vec_or(*quad, p, "curvature_sft", q.curvature_sft);
    q.curvature_rl = vec_or(*quad, p, "curvature_rl", q.curvature_rl);
    q.optimum_sft = vec_or(*quad, p, "optimum_sft", q.optimum_sft);
    q.optimum_rl = vec_or(*quad, p, "optimum_rl", q.optimum_rl);
    q.theta_init = vec_or(*quad, p, "theta_init", q.theta_init);
    if (const json* noise = child(*quad, p, "noise")) {
      const std::string np = p + ".noise";
      q.noise.sft_var = num_or(*noise, np, "sft_var", q.noise.sft_var);
      q.noise.rl_var = num_or(*noise, np, "rl_var", q.noise.rl_var);
      q.noise.cross_cov = num_or(*noise, np, "cross_cov", q.noise.cross_cov);
      q.noise.bias_sft = vec_or(*noise, np, "bias_sft", q.noise.bias_sft);
      q.noise.bias_rl = vec_or(*noise, np, "bias_rl", q.noise.bias_rl);
    }
  }

  cfg.run.toy = default_toy_problem();
  if (const json* toy = child(root, path, "toy")) {
    const std::string p = path + ".toy";
    ToyPolicyProblem& t = cfg.run.toy;
    t.vocab = static_cast<std::size_t>(
        int_or(*toy, p, "vocab", static_cast<long>(t.vocab)));
    t.seq_len = static_cast<std::size_t>(
        int_or(*toy, p, "seq_len", static_cast<long>(t.seq_len)));
    t.group_size = static_cast<std::size_t>(
        int_or(*toy, p, "group_size", static_cast<long>(t.group_size)));
    const std::string reward = str_or(
        *toy, p, "reward",
        t.reward == RewardKind::exact_match ? "exact_match" : "pattern_count");
    if (reward == "exact_match")
      t.reward = RewardKind::exact_match;
    else if (reward == "pattern_count")
      t.reward = RewardKind::pattern_count;
    else
      fail(p + ".reward", "unknown reward kind '" + reward + "'");
    if (const json* expert = child(*toy, p, "expert")) {
      const std::string ep = p + ".expert";
      if (!expert->is_array() || expert->empty())
        fail(ep, "expected a nonempty array of token arrays");
      t.expert.clear();
      for (std::size_t i = 0; i < expert->size(); ++i) {
        const json& row = (*expert)[i];
        const std::string rp = ep + "[" + std::to_string(i) + "]";
        if (!row.is_array()) fail(rp, "expected an array of token indices");
        std::vector<std::size_t> seq;
        for (std::size_t j = 0; j < row.size(); ++j) {
          const long v = as_int(row[j], rp + "[" + std::to_string(j) + "]");
          if (v < 0) fail(rp + "[" + std::to_string(j) + "]", "must be >= 0");
          seq.push_back(static_cast<std::size_t>(v));
        }
        t.expert.push_back(std::move(seq));
      }
    }
    t.theta = vec_or(*toy, p, "theta",
                     std::vector<double>(t.param_count(), 0.0));
    t.theta_ref = vec_or(*toy, p, "theta_ref",
                         std::vector<double>(t.param_count(), 0.0));
  }

  const json* arms = child(root, path, "arms");
  if (!arms || !arms->is_array() || arms->empty())
    fail(path + ".arms", "expected a nonempty array");
  for (std::size_t i = 0; i < arms->size(); ++i)
    cfg.arms.push_back(
        parse_arm((*arms)[i], path + ".arms[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < cfg.arms.size(); ++i)
    for (std::size_t j = i + 1; j < cfg.arms.size(); ++j)
      if (cfg.arms[i].name == cfg.arms[j].name)
        fail(path + ".arms[" + std::to_string(j) + "].name",
             "duplicate arm name '" + cfg.arms[j].name + "'");

  cfg.reference_arm = str_or(root, path, "reference_arm", cfg.arms[0].name);
  bool found_ref = false;
  for (const ArmSpec& arm : cfg.arms) found_ref |= arm.name == cfg.reference_arm;
  if (!found_ref)
    fail(path + ".reference_arm",
         "no arm named '" + cfg.reference_arm + "'");

  if (const json* sweep = child(root, path, "sweep")) {
    const std::string p = path + ".sweep";
    if (!sweep->is_object()) fail(p, "expected an object of field -> values");
    for (const auto& [field, values] : sweep->items()) {
      if (!values.is_array() || values.empty())
        fail(p + "." + field, "expected a nonempty array of values");
      cfg.sweep[field] =
          std::vector<json>(values.begin(), values.end());
    }
  }

  if (cfg.workers < 1) fail(path + ".workers", "must be >= 1");
  if (cfg.shift_window < 1) fail(path + ".shift_window", "must be >= 1");
  if (!std::isfinite(cfg.kl_target) || cfg.kl_target < 0.0)
    fail(path + ".kl_target", "must be >= 0");

  // Semantic validation with the same error channel as the schema checks.
  try {
    cfg.run.validate();
    for (const ArmSpec& arm : cfg.arms) {
      if (arm.guided)
        arm.controller.validate();
      else
        arm.baseline.validate();
    }
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_config_json(const ExperimentConfig& cfg) {
  ordered j;
  j["version"] = cfg.version;
  j["testbed"] =
      cfg.run.testbed == TestbedKind::quadratic ? "quadratic" : "toy";
  j["steps"] = cfg.run.steps;
  j["learning_rate"] = cfg.run.learning_rate;
  j["kl_scale"] = cfg.run.kl_scale;
  j["kl_ema_decay"] = cfg.run.kl_ema_decay;
  j["kl_target"] = cfg.kl_target;
  j["shift_window"] = cfg.shift_window;
  j["seeds"] = cfg.seeds;
  j["potential"] = ordered{{"rho", cfg.run.potential.rho},
                           {"alpha_ref", cfg.run.potential.alpha_ref},
                           {"toy_target_boost",
                            cfg.run.potential.toy_target_boost}};
  j["problem"] = problem_json(cfg);
  ordered arms = ordered::array();
  for (const ArmSpec& arm : cfg.arms) arms.push_back(arm_json(arm));
  j["arms"] = std::move(arms);
  j["reference_arm"] = cfg.reference_arm;
  return j.dump();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(canonical_config_json(cfg));
}

void apply_controller_field(ControllerConfig& cfg, const std::string& field,
                            const nlohmann::json& value) {
  const std::string path = "sweep." + field;
  const auto num = [&] { return as_num(value, path); };
  const auto integer = [&] { return as_int(value, path); };
  const auto str = [&] { return as_str(value, path); };

  if (field == "beta_ema") cfg.beta_ema = num();
  else if (field == "cap") cfg.cap = num();
  else if (field == "blend_lambda") cfg.blend_lambda = num();
  else if (field == "update_freq") cfg.update_freq = integer();
  else if (field == "early_freq_steps") cfg.early_freq_steps = integer();
  else if (field == "early_freq") cfg.early_freq = integer();
  else if (field == "mu_min") cfg.mu_min = num();
  else if (field == "mu_max") cfg.mu_max = num();
  else if (field == "mu_init") cfg.mu_init = num();
  else if (field == "trim_frac") cfg.trim_frac = num();
  else if (field == "stats_ema_decay") cfg.stats_ema_decay = num();
  else if (field == "prior.kind") cfg.prior.kind = schedule_kind_from(str(), path);
  else if (field == "prior.warmup_steps") cfg.prior.warmup_steps = integer();
  else if (field == "prior.total_steps") cfg.prior.total_steps = integer();
  else if (field == "prior.mu_start") cfg.prior.mu_start = num();
  else if (field == "prior.mu_peak") cfg.prior.mu_peak = num();
  else if (field == "prior.mu_end") cfg.prior.mu_end = num();
  else if (field == "alpha.kl_target") cfg.alpha.kl_target = num();
  else if (field == "alpha.alpha_min") cfg.alpha.alpha_min = num();
  else if (field == "alpha.alpha_max") cfg.alpha.alpha_max = num();
  else if (field == "alpha.eta_up") cfg.alpha.eta_up = num();
  else if (field == "alpha.eta_down") cfg.alpha.eta_down = num();
  else if (field == "alpha.hysteresis") cfg.alpha.hysteresis = num();
  else if (field == "alpha.kl_ema_decay") cfg.alpha.kl_ema_decay = num();
  else if (field == "alpha.alpha_init") cfg.alpha.alpha_init = num();
  else if (field == "degradation.kind")
    cfg.degradation.kind = degradation_kind_from(str(), path);
  else if (field == "degradation.constant_value")
    cfg.degradation.constant_value = num();
  else if (field == "degradation.seed")
    cfg.degradation.seed = static_cast<std::uint64_t>(integer());
  else
    fail(path, "unknown controller field");
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
  const ExecOutcome out = execute_runs(cfg, log);
  if (out.any_aborted) {
    log << "one or more runs aborted; summaries skipped\n";
    return 1;
  }
  const StabilityReport report = summarize(out.by_arm, cfg.reference_arm,
                                           cfg.kl_target, cfg.shift_window);
  const std::uint64_t hash = config_hash(cfg);
  for (const ArmSummary& s : report.arms) {
    ordered j;
    j["arm"] = s.arm;
    j["config_hash"] = hash;
    j["kl_target"] = cfg.kl_target;
    j["shift_window"] = cfg.shift_window;
    j["seeds"] = cfg.seeds;
    j["metrics"] = summary_json(s);
    ordered changes = ordered::object();
    for (const auto& [key, pct] : report.change_vs_reference) {
      const std::string prefix = s.arm + "/";
      if (key.rfind(prefix, 0) == 0) changes[key.substr(prefix.size())] = pct;
    }
    j["change_vs_" + report.reference_arm] = std::move(changes);
    const fs::path path =
        fs::path(cfg.out_dir) / (sanitize(s.arm) + "_summary.json");
    write_file(path.string(), j.dump(2) + "\n");
    log << "wrote   " << path.string() << "\n";
  }
  log << report_to_text(report);
  return 0;
}

int cmd_validate(const ValidateOptions& opts, std::ostream& log) {
  if (opts.tuples < 1)
    throw std::invalid_argument("validate: tuples must be >= 1");

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.0, 4.0);

  bool all_pass = true;
  const auto report = [&](const char* name, bool pass,
                          const std::string& detail) {
    log << (pass ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) log << " — " << detail;
    log << "\n";
    all_pass = all_pass && pass;
  };

  // Closed form against the brute-force grid scan.
  {
    const double tol = 1.1 * opts.grid_step + 1e-12;
    std::size_t bad = 0;
    std::string first;
    for (std::size_t i = 0; i < opts.tuples; ++i) {
      NoiseMoments m;
      m.disagreement_sq = spread(rng);
      m.sft_var = spread(rng);
      m.rl_var = spread(rng) + 0.05;  // keeps the objective non-degenerate
      const MixtureTarget target{unit(rng)};
      double mu = optimal_mu(m, target);
      if (opts.inject_sign_flip) {
        // Deliberately broken closed form used to prove the oracle bites.
        const double den = m.disagreement_sq + m.sft_var + m.rl_var;
        const double num = -target.alpha * m.disagreement_sq + m.rl_var;
        mu = std::min(1.0, std::max(0.0, num / den));
      }
      const double oracle =
          grid_oracle_mu(m, std::nullopt, target, opts.grid_step);
      if (std::abs(mu - oracle) > tol) {
        ++bad;
        if (first.empty()) {
          std::ostringstream s;
          s << "tuple{disagreement_sq=" << m.disagreement_sq
            << ", sft_var=" << m.sft_var << ", rl_var=" << m.rl_var
            << ", alpha=" << target.alpha << "} mu=" << mu
            << " oracle=" << oracle;
          first = s.str();
        }
      }
    }
    std::ostringstream head;
    head << opts.tuples << " tuples, step " << opts.grid_step;
    report("closed form matches the grid oracle", bad == 0,
           bad == 0 ? head.str()
                    : head.str() + ", " + std::to_string(bad) +
                          " mismatches, first " + first);
  }

  // Reduction identities, bit for bit.
  {
    std::size_t bad_corr = 0;
    std::size_t bad_bias = 0;
    for (std::size_t i = 0; i < opts.tuples; ++i) {
      NoiseMoments m;
      m.disagreement_sq = spread(rng);
      m.sft_var = spread(rng);
      m.rl_var = spread(rng) + 0.05;
      const MixtureTarget target{unit(rng)};
      const double plain = optimal_mu(m, target);
      if (optimal_mu_correlated(m, target).value != plain) ++bad_corr;
      if (optimal_mu_biased(m, BiasSpec{}, target).value != plain) ++bad_bias;
    }
    report("correlated form reduces exactly at zero covariance",
           bad_corr == 0, bad_corr ? std::to_string(bad_corr) + " mismatches"
                                   : "");
    report("biased form reduces exactly at zero bias", bad_bias == 0,
           bad_bias ? std::to_string(bad_bias) + " mismatches" : "");
  }

  // Limit behavior.
  {
    NoiseMoments m;
    m.disagreement_sq = 0.0;
    m.sft_var = 0.7;
    m.rl_var = 0.3;
    const double mu = optimal_mu(m, MixtureTarget{0.2});
    const double expected = m.rl_var / (m.sft_var + m.rl_var);
    report("zero gap gives inverse-variance weighting", mu == expected, "");

    m.disagreement_sq = 1e12;
    m.sft_var = 1.0;
    m.rl_var = 1.0;
    const double pinned = optimal_mu(m, MixtureTarget{0.73});
    report("huge gap pins the weight at the target share",
           std::abs(pinned - 0.73) < 1e-6, "");
  }

  return all_pass ? 0 : 1;
}

int cmd_ablate(const ExperimentConfig& cfg, std::ostream& log) {
  const ArmSpec* base = nullptr;
  for (const ArmSpec& arm : cfg.arms)
    if (arm.guided) {
      base = &arm;
      break;
    }
  if (!base)
    throw std::invalid_argument(
        "config error at config.arms: ablate needs a gac arm");

  ExperimentConfig sub = cfg;
  sub.arms.clear();

  const auto add = [&](const char* name,
                       const std::function<void(ControllerConfig&)>& tweak) {
    ArmSpec arm = *base;
    arm.name = name;
    tweak(arm.controller);
    sub.arms.push_back(std::move(arm));
  };

  add("full", [](ControllerConfig&) {});
  add("no_cap", [](ControllerConfig& c) { c.cap = 1.0; });
  add("no_ema", [](ControllerConfig& c) { c.beta_ema = 0.0; });
  add("lambda_1", [](ControllerConfig& c) { c.blend_lambda = 1.0; });
  add("no_trim", [](ControllerConfig& c) { c.trim_frac = 0.0; });
  add("degr_constant_rl", [](ControllerConfig& c) {
    c.degradation.kind = DegradationKind::constant_rl_var;
  });
  add("degr_random", [](ControllerConfig& c) {
    c.degradation.kind = DegradationKind::random_disagreement;
  });
  if (cfg.run.testbed == TestbedKind::toy_policy) {
    // Shuffling needs a token stream, so it only exists on the toy testbed.
    add("degr_shuffled", [](ControllerConfig& c) {
      c.degradation.kind = DegradationKind::shuffled_disagreement;
    });
  }
  sub.reference_arm = "full";
  return cmd_run(sub, log);
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.sweep.empty())
    throw std::invalid_argument("config error at config.sweep: empty grid");
  const ArmSpec* base = nullptr;
  for (const ArmSpec& arm : cfg.arms)
    if (arm.guided) {
      base = &arm;
      break;
    }
  if (!base)
    throw std::invalid_argument(
        "config error at config.arms: sweep needs a gac arm");

  const std::vector<std::pair<std::string, std::vector<json>>> fields(
      cfg.sweep.begin(), cfg.sweep.end());
  std::size_t total = 1;
  for (const auto& [field, values] : fields) total *= values.size();

  ExperimentConfig sub = cfg;
  sub.arms.clear();
  for (std::size_t idx = 0; idx < total; ++idx) {
    ArmSpec arm = *base;
    std::size_t rest = idx;
    std::string label;
    for (const auto& [field, values] : fields) {
      const json& value = values[rest % values.size()];
      rest /= values.size();
      apply_controller_field(arm.controller, field, value);
      if (!label.empty()) label += ",";
      label += field + "=" +
               (value.is_string() ? value.get<std::string>() : value.dump());
    }
    arm.name = base->name + "[" + label + "]";
    sub.arms.push_back(std::move(arm));
  }
  sub.reference_arm = sub.arms.front().name;

  const ExecOutcome out = execute_runs(sub, log);
  if (out.any_aborted) {
    log << "one or more runs aborted; summaries skipped\n";
    return 1;
  }
  const StabilityReport report = summarize(out.by_arm, sub.reference_arm,
                                           sub.kl_target, sub.shift_window);
  ordered points = ordered::object();
  for (const ArmSummary& s : report.arms) points[s.arm] = summary_json(s);
  ordered j;
  j["config_hash"] = config_hash(sub);
  j["kl_target"] = sub.kl_target;
  j["seeds"] = sub.seeds;
  j["points"] = std::move(points);
  const fs::path path = fs::path(sub.out_dir) / "sweep_summary.json";
  write_file(path.string(), j.dump(2) + "\n");
  log << "wrote   " << path.string() << "\n";
  log << report_to_text(report);
  return 0;
}

}  // namespace gac
