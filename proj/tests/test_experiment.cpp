#include "folab/experiment.hpp"

#include <gtest/gtest.h>

using namespace folab;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("folab-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, RejectsUnknownKeysAndTasks) {
  EXPECT_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {"spectrum"}}, {"bogus", 1}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {"nonsense"}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {{{"task", "spectrum"}, {"Kay", 4}}}}}),
               ConfigError);
  EXPECT_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {{{"task", "spectrum"}, {"K", "four"}}}}}),
               ConfigError);
  EXPECT_THROW(parse_config(json{{"tasks", {"spectrum"}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", json::array()}}), ConfigError);
}

TEST(Config, OrderingAndSeeds) {
  EXPECT_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {"counting"}}}), ConfigError);
  EXPECT_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {"spectrum", {{"task", "fit"}, {"a_known", "auto"}}}}}),
               ConfigError);
  EXPECT_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {"verify-all"}}}), ConfigError);
  EXPECT_NO_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"seed", 3}, {"tasks", {"verify-all"}}}));
  EXPECT_NO_THROW(parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {{{"task", "verify-all"}, {"seed", 3}}}}}));
  EXPECT_THROW(resolve_operator("su2-conjugated", std::nullopt), ConfigError);
  EXPECT_NO_THROW(resolve_operator("su2-conjugated", 4));
  EXPECT_THROW(resolve_operator("no-such-operator", 1), ConfigError);
  EXPECT_THROW(resolve_operator(json{{"builtin", "flat-dirac-2d"}, {"colour", 1}}, 1), ConfigError);
}

TEST(Config, Builtins) {
  EXPECT_EQ(resolve_operator("flat-dirac-2d", {}).dim(), 2);
  EXPECT_EQ(resolve_operator("minkowski-4d", {}).dim(), 4);
  const OperatorData c = resolve_operator("dirac-shift-c", {});
  EXPECT_NEAR(c.Lsub().eval({0, 0, 0})(0, 0).real(), 0.3, 1e-15);
  const OperatorData w = resolve_operator(json{{"builtin", "flat-dirac-2d"}, {"weight", {{"exp_cos", 0.2}}}}, {});
  ASSERT_TRUE(w.weight().has_value());
  EXPECT_NEAR(w.weight()->eval({0.0, 0.0})(0, 0).real(), std::exp(0.2), 1e-10);
  const OperatorData r = resolve_operator(to_json(flat_dirac(3, 0.1)), {});
  EXPECT_EQ(r.dim(), 3);
}

TEST(Experiment, SpectrumCountingAsymptoticsFit) {
  const json cfg_json{{"operator", "flat-dirac-2d"},
                      {"bit_reproducible", true},
                      {"tasks",
                       {{{"task", "spectrum"}, {"K", 12}},
                        {{"task", "counting"}, {"lambdas", {1.5, 3.0}}},
                        {{"task", "asymptotics"}, {"expect", {{"a", kPi}, {"b", 0.0}, {"abs_tol", 1e-10}}}},
                        {{"task", "fit"}, {"window", {4.0, 8.0}}, {"a_known", nullptr}, {"expect", {{"a", kPi}, {"rel_tol", 0.05}}}}}}};
  const ExperimentConfig cfg = parse_config(cfg_json);
  const auto dir = scratch("spectrum");
  const RunOutcome out = run_experiment(cfg, resolve_operator(cfg.operator_spec, cfg.seed), dir);
  EXPECT_EQ(out.exit_code(), 0) << out.report.dump(2);
  const json& t = out.report["tasks"];
  EXPECT_EQ(t[1]["result"]["counts"][0]["N"].get<double>(), 8.0);  // positive eigenvalues |k| with |k| in {1, sqrt 2}
  EXPECT_FALSE(t[0].contains("seconds"));
  EXPECT_TRUE(std::filesystem::exists(dir / "spectrum_0.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "spectrum_0.json"));
}

TEST(Experiment, FailedExpectationSetsExitCode) {
  const ExperimentConfig cfg = parse_config(
      json{{"operator", "flat-dirac-2d"},
           {"tasks", {{{"task", "asymptotics"}, {"expect", {{"a", 0.7}, {"rel_tol", 1e-3}}}}}}});
  const RunOutcome out = run_experiment(cfg, resolve_operator(cfg.operator_spec, cfg.seed), scratch("expect"));
  EXPECT_EQ(out.exit_code(), 1);
  EXPECT_EQ(out.report["tasks"][0]["status"], "failed");
}

TEST(Experiment, TaskErrorsAreRecorded) {
  const ExperimentConfig cfg = parse_config(json{{"operator", "flat-dirac-2d"}, {"tasks", {"em-potential", "ellipticity"}}});
  const RunOutcome out = run_experiment(cfg, resolve_operator(cfg.operator_spec, cfg.seed), scratch("errors"));
  EXPECT_EQ(out.exit_code(), 1);
  EXPECT_EQ(out.report["tasks"][0]["status"], "error");
  EXPECT_EQ(out.report["tasks"][1]["status"], "ok");
  EXPECT_TRUE(out.report["tasks"][1]["result"]["elliptic"].get<bool>());
}

TEST(Experiment, GeometryFlowAndDirac) {
  const json cfg_json{{"operator", "minkowski-4d"},
                      {"seed", 5},
                      {"tasks",
                       {{{"task", "metric"}, {"grid", 2}},
                        {{"task", "csub"}, {"points", 3}},
                        {{"task", "em-potential"}, {"grid", 2}},
                        {{"task", "flow"}, {"t", 0.5}, {"q", {1.0, 0.0, 0.0, 0.0}}, {"y", {0.0, 0.0, 0.0, 0.0}}},
                        {{"task", "dirac4d"}, {"mass", 0.5}, {"samples", 50}}}}};
  const ExperimentConfig cfg = parse_config(cfg_json);
  const auto dir = scratch("geometry");
  const RunOutcome out = run_experiment(cfg, resolve_operator(cfg.operator_spec, cfg.seed), dir);
  EXPECT_EQ(out.exit_code(), 0) << out.report.dump(2);
  const json& t = out.report["tasks"];
  EXPECT_EQ(t[0]["result"]["signature"], json({3, 1}));
  EXPECT_EQ(t[4]["status"], "passed");
  EXPECT_TRUE(std::filesystem::exists(dir / "trajectory_3.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "em_potential_2.csv"));
}
