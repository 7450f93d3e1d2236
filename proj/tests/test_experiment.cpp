#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "gac/experiment.hpp"

using namespace gac;
namespace fs = std::filesystem;

namespace {

const char* kMinimalConfig = R"({
  "version": 1,
  "arms": [{"name": "gac", "kind": "gac"}]
})";

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

// Scratch directory unique to a test case, wiped on entry so reruns are clean.
fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::path("exp_scratch") / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small_qudi_config(const std::string& out_name) {
  ExperimentConfig cfg = parse_config(kMinimalConfig);
  cfg.run.steps = 40;
  cfg.run.learning_rate = 0.05;
  cfg.seeds = {1};
  cfg.out_dir = scratch_dir(out_name).string();
  return cfg;
}

}  // namespace

TEST_CASE("minimal config fills documented defaults") {
  const ExperimentConfig cfg = parse_config(kMinimalConfig);
  CHECK(cfg.version == 1);
  CHECK(cfg.run.testbed == TestbedKind::quadratic);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.workers == 1);
  CHECK(cfg.kl_target == doctest::Approx(0.02));
  CHECK(cfg.shift_window == 10);
  CHECK(cfg.reference_arm == "gac");
  CHECK(cfg.arms.size() == 1);
  CHECK(cfg.arms[0].guided);
  CHECK(cfg.run.quadratic.dim() == 2);
  CHECK(cfg.run.quadratic.noise.rl_var == doctest::Approx(0.4));
  CHECK(cfg.run.toy.num_prompts() == 4);
  CHECK_NOTHROW(cfg.run.validate());
}

TEST_CASE("config errors carry the offending field path") {
  const auto message_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };

  CHECK(message_of("{]").find("config:") != std::string::npos);
  CHECK(message_of(R"({"arms": [{"name": "a"}]})").find("config.version") !=
        std::string::npos);
  CHECK(message_of(R"({"version": 2, "arms": [{"name": "a"}]})")
            .find("config.version") != std::string::npos);
  CHECK(message_of(R"({"version": 1, "arms": []})").find("config.arms") !=
        std::string::npos);
  CHECK(message_of(R"({"version": 1, "steps": "many",
                       "arms": [{"name": "a"}]})")
            .find("config.steps") != std::string::npos);
  CHECK(message_of(R"({"version": 1,
                       "arms": [{"kind": "gac"}]})")
            .find("config.arms[0].name") != std::string::npos);
  CHECK(message_of(R"({"version": 1,
                       "arms": [{"name": "a", "kind": "mystery"}]})")
            .find("config.arms[0].kind") != std::string::npos);
  CHECK(message_of(R"({"version": 1,
                       "arms": [{"name": "a"}, {"name": "a"}]})")
            .find("duplicate arm name") != std::string::npos);
  CHECK(message_of(R"({"version": 1, "reference_arm": "ghost",
                       "arms": [{"name": "a"}]})")
            .find("config.reference_arm") != std::string::npos);
  CHECK(message_of(R"({"version": 1, "testbed": "cluster",
                       "arms": [{"name": "a"}]})")
            .find("config.testbed") != std::string::npos);
  CHECK(message_of(R"({"version": 1, "sweep": {"cap": []},
                       "arms": [{"name": "a"}]})")
            .find("config.sweep.cap") != std::string::npos);
  CHECK(message_of(R"({"version": 1, "seeds": [],
                       "arms": [{"name": "a"}]})")
            .find("config.seeds") != std::string::npos);
}

TEST_CASE("arm and controller fields parse into the right knobs") {
  const char* text = R"({
    "version": 1,
    "testbed": "toy",
    "steps": 25,
    "kl_target": 0.05,
    "seeds": [7, 9],
    "toy": {"vocab": 4, "seq_len": 3, "group_size": 6,
            "reward": "exact_match",
            "expert": [[0, 1, 2], [3, 0, 1]]},
    "arms": [
      {"name": "full", "kind": "gac",
       "controller": {"beta_ema": 0.5, "cap": 0.2,
                      "prior": {"kind": "linear", "mu_start": 0.9,
                                "mu_end": 0.1, "warmup_steps": 0,
                                "total_steps": 25},
                      "alpha": {"kl_target": 0.5},
                      "degradation": {"kind": "random_disagreement",
                                      "seed": 11}}},
      {"name": "qcm", "kind": "constant", "constant_value": 0.33},
      {"name": "sched", "kind": "schedule",
       "schedule": {"kind": "constant", "mu_start": 0.4}},
      {"name": "klc", "kind": "kl_ctrl", "kappa": 0.02},
      {"name": "rv", "kind": "rewvar_ctrl", "calibration_window": 5},
      {"name": "gn", "kind": "gradnorm_ctrl"},
      {"name": "dwa", "kind": "dwa", "dwa_temperature": 1.5}
    ],
    "reference_arm": "qcm"
  })";
  const ExperimentConfig cfg = parse_config(text);
  CHECK(cfg.run.testbed == TestbedKind::toy_policy);
  CHECK(cfg.run.steps == 25);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7, 9});
  CHECK(cfg.run.toy.vocab == 4);
  CHECK(cfg.run.toy.num_prompts() == 2);
  CHECK(cfg.run.toy.reward == RewardKind::exact_match);
  CHECK(cfg.run.toy.theta.size() == cfg.run.toy.param_count());

  REQUIRE(cfg.arms.size() == 7);
  const ControllerConfig& c = cfg.arms[0].controller;
  CHECK(c.beta_ema == doctest::Approx(0.5));
  CHECK(c.cap == doctest::Approx(0.2));
  CHECK(c.prior.kind == ScheduleKind::linear);
  CHECK(c.alpha.kl_target == doctest::Approx(0.5));
  CHECK(c.degradation.kind == DegradationKind::random_disagreement);
  CHECK(c.degradation.seed == 11);
  CHECK(c.update_freq == 10);  // untouched default

  CHECK_FALSE(cfg.arms[1].guided);
  CHECK(cfg.arms[1].baseline.kind == BaselineKind::constant);
  CHECK(cfg.arms[1].baseline.constant_value == doctest::Approx(0.33));
  CHECK(cfg.arms[2].baseline.kind == BaselineKind::schedule);
  CHECK(cfg.arms[2].baseline.schedule.kind == ScheduleKind::constant);
  CHECK(cfg.arms[3].baseline.kappa == doctest::Approx(0.02));
  CHECK(cfg.arms[4].baseline.calibration_window == 5);
  CHECK(cfg.arms[5].baseline.kind == BaselineKind::gradnorm_ctrl);
  CHECK(cfg.arms[6].baseline.dwa_temperature == doctest::Approx(1.5));
  CHECK(cfg.reference_arm == "qcm");
}

TEST_CASE("canonical json and hash are stable and sensitive") {
  const ExperimentConfig a = parse_config(kMinimalConfig);
  const ExperimentConfig b = parse_config(kMinimalConfig);
  CHECK(canonical_config_json(a) == canonical_config_json(b));
  CHECK(config_hash(a) == config_hash(b));

  ExperimentConfig c = parse_config(kMinimalConfig);
  c.run.steps += 1;
  CHECK(config_hash(c) != config_hash(a));

  // Presentation-only knobs do not perturb the hash.
  ExperimentConfig d = parse_config(kMinimalConfig);
  d.out_dir = "elsewhere";
  d.workers = 8;
  CHECK(config_hash(d) == config_hash(a));
}

TEST_CASE("apply_controller_field reaches nested knobs and rejects unknowns") {
  ControllerConfig c;
  apply_controller_field(c, "beta_ema", nlohmann::json(0.42));
  CHECK(c.beta_ema == doctest::Approx(0.42));
  apply_controller_field(c, "update_freq", nlohmann::json(4));
  CHECK(c.update_freq == 4);
  apply_controller_field(c, "prior.kind", nlohmann::json("constant"));
  CHECK(c.prior.kind == ScheduleKind::constant);
  apply_controller_field(c, "alpha.eta_up", nlohmann::json(0.07));
  CHECK(c.alpha.eta_up == doctest::Approx(0.07));
  apply_controller_field(c, "degradation.kind",
                         nlohmann::json("constant_rl_var"));
  CHECK(c.degradation.kind == DegradationKind::constant_rl_var);

  CHECK_THROWS_WITH_AS(
      apply_controller_field(c, "momentum", nlohmann::json(0.9)),
      "config error at sweep.momentum: unknown controller field",
      std::invalid_argument);
  CHECK_THROWS_AS(apply_controller_field(c, "beta_ema", nlohmann::json("x")),
                  std::invalid_argument);
}

TEST_CASE("cmd_run writes one csv per run plus per-arm summaries") {
  ExperimentConfig cfg = small_qudi_config("run_basic");
  cfg.arms.push_back([] {
    ArmSpec arm;
    arm.name = "qcm";
    arm.guided = false;
    arm.baseline.kind = BaselineKind::constant;
    return arm;
  }());
  cfg.seeds = {1, 2};

  std::ostringstream log;
  REQUIRE(cmd_run(cfg, log) == 0);

  const fs::path dir(cfg.out_dir);
  CHECK(fs::exists(dir / "gac_seed1.csv"));
  CHECK(fs::exists(dir / "gac_seed2.csv"));
  CHECK(fs::exists(dir / "qcm_seed1.csv"));
  CHECK(fs::exists(dir / "qcm_seed2.csv"));
  CHECK(fs::exists(dir / "gac_summary.json"));
  CHECK(fs::exists(dir / "qcm_summary.json"));

  const auto summary =
      nlohmann::json::parse(read_file(dir / "gac_summary.json"));
  CHECK(summary.at("arm") == "gac");
  CHECK(summary.at("config_hash") == config_hash(cfg));
  CHECK(summary.at("metrics").at("kl_area").at("per_seed").size() == 2);
  // Non-reference arms carry the percent-change block.
  const auto qcm = nlohmann::json::parse(read_file(dir / "qcm_summary.json"));
  CHECK(qcm.at("change_vs_gac").contains("kl_area"));
  CHECK(log.str().find("gac") != std::string::npos);
}

TEST_CASE("reruns and parallel runs reproduce the same bytes") {
  ExperimentConfig cfg = small_qudi_config("run_repro_a");
  cfg.seeds = {1, 2, 3};
  std::ostringstream log;
  REQUIRE(cmd_run(cfg, log) == 0);
  const std::string first = read_file(fs::path(cfg.out_dir) / "gac_seed2.csv");

  ExperimentConfig again = small_qudi_config("run_repro_b");
  again.seeds = {1, 2, 3};
  again.workers = 3;
  std::ostringstream log2;
  REQUIRE(cmd_run(again, log2) == 0);
  const std::string second =
      read_file(fs::path(again.out_dir) / "gac_seed2.csv");
  CHECK(first == second);
}

TEST_CASE("cmd_run returns failure and keeps traces when a run aborts") {
  ExperimentConfig cfg = small_qudi_config("run_abort");
  cfg.run.learning_rate = 2000.0;  // guaranteed divergence
  cfg.run.steps = 60;
  std::ostringstream log;
  CHECK(cmd_run(cfg, log) == 1);
  CHECK(fs::exists(fs::path(cfg.out_dir) / "gac_seed1.csv"));
  CHECK_FALSE(fs::exists(fs::path(cfg.out_dir) / "gac_summary.json"));
  CHECK(log.str().find("aborted") != std::string::npos);
}

TEST_CASE("cmd_validate passes stock and fails the injected mutant") {
  ValidateOptions opts;
  opts.tuples = 200;
  opts.grid_step = 1e-3;

  std::ostringstream ok;
  CHECK(cmd_validate(opts, ok) == 0);
  CHECK(ok.str().find("[PASS] closed form matches the grid oracle") !=
        std::string::npos);
  CHECK(ok.str().find("[FAIL]") == std::string::npos);

  opts.inject_sign_flip = true;
  std::ostringstream bad;
  CHECK(cmd_validate(opts, bad) == 1);
  CHECK(bad.str().find("[FAIL] closed form matches the grid oracle") !=
        std::string::npos);
  CHECK(bad.str().find("tuple{") != std::string::npos);
}

TEST_CASE("ablation grid emits one run set per variant") {
  ExperimentConfig cfg = small_qudi_config("ablate_quad");
  cfg.run.steps = 30;
  std::ostringstream log;
  REQUIRE(cmd_ablate(cfg, log) == 0);
  const fs::path dir(cfg.out_dir);
  for (const char* arm : {"full", "no_cap", "no_ema", "lambda_1", "no_trim",
                          "degr_constant_rl", "degr_random"}) {
    CAPTURE(arm);
    CHECK(fs::exists(dir / (std::string(arm) + "_seed1.csv")));
    CHECK(fs::exists(dir / (std::string(arm) + "_summary.json")));
  }
  // Shuffled disagreement needs token streams, so it is toy-only.
  CHECK_FALSE(fs::exists(dir / "degr_shuffled_seed1.csv"));

  ExperimentConfig no_gac = small_qudi_config("ablate_no_gac");
  no_gac.arms[0].guided = false;
  no_gac.arms[0].baseline.kind = BaselineKind::constant;
  std::ostringstream log2;
  CHECK_THROWS_AS(cmd_ablate(no_gac, log2), std::invalid_argument);
}

TEST_CASE("sweep expands the cross product with labeled arms") {
  ExperimentConfig cfg = small_qudi_config("sweep_grid");
  cfg.run.steps = 25;
  cfg.sweep["beta_ema"] = {nlohmann::json(0.5), nlohmann::json(0.9)};
  cfg.sweep["cap"] = {nlohmann::json(0.01), nlohmann::json(0.05),
                      nlohmann::json(0.2)};
  std::ostringstream log;
  REQUIRE(cmd_sweep(cfg, log) == 0);

  const fs::path dir(cfg.out_dir);
  std::size_t csvs = 0;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".csv") ++csvs;
  CHECK(csvs == 6);  // 2 x 3 grid, one seed
  CHECK(fs::exists(dir / "sweep_summary.json"));
  const auto summary =
      nlohmann::json::parse(read_file(dir / "sweep_summary.json"));
  CHECK(summary.at("points").size() == 6);
  CHECK(summary.at("points").contains("gac[beta_ema=0.5,cap=0.01]"));

  ExperimentConfig empty = small_qudi_config("sweep_empty");
  std::ostringstream log2;
  CHECK_THROWS_AS(cmd_sweep(empty, log2), std::invalid_argument);
}
