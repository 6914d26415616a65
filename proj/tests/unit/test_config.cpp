#include "clfstack/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace clfstack {
namespace {

const char* kTwoRobots = R"({
  "name": "two",
  "system": {"type": "single_integrator", "robot_count": 2, "workspace_dim": 2},
  "tasks": [
    {"id": "A", "type": "goto_goal", "params": {"goal": [1, 0]}, "robot_block": 0},
    {"id": "B", "type": "goto_goal", "params": {"goal": [0, 1], "c": 3}, "robot_block": 1}
  ],
  "schedule": {"segments": [
    {"t_start": 0, "t_end": 1, "relations": [{"higher": "A", "lower": "B"}]},
    {"t_start": 1, "t_end": 2, "l": 0.1, "relations": [{"higher": "B", "lower": "A"}]}
  ]},
  "simulation": {"dt": 0.01, "horizon": 2, "x0": [0, 0, 0, 0]}
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

void expect_rejected(const std::string& text, const std::string& needle) {
  try {
    parse_config(text);
    ADD_FAILURE() << "accepted; expected an error mentioning " << needle;
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(Config, ParsesDefaults) {
  const ScenarioConfig c = parse_config(kTwoRobots);
  EXPECT_EQ(c.tasks.size(), 2u);
  EXPECT_EQ(c.tasks[0].c, 1.0);
  EXPECT_EQ(c.tasks[1].c, 3.0);
  EXPECT_EQ(*c.tasks[1].robot_block, 1);
  EXPECT_EQ(c.schedule[0].l, 0.05);
  EXPECT_EQ(c.schedule[1].l, 0.1);
  EXPECT_EQ(c.controller.kappa, 10.0);
  EXPECT_EQ(c.output.checks, "none");
  EXPECT_FALSE(c.learning.has_value());
}

TEST(Config, RoundTripIsAFixedPoint) {
  const ScenarioConfig a = parse_config(kTwoRobots);
  const std::string s = serialize_config(a);
  const ScenarioConfig b = parse_config(s);
  EXPECT_EQ(a, b);
  EXPECT_EQ(serialize_config(b), s);
}

TEST(Config, ShippedScenariosRoundTrip) {
  for (const auto& e : std::filesystem::directory_iterator(CLFSTACK_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    const ScenarioConfig a = load_config(e.path().string());
    const ScenarioConfig b = parse_config(serialize_config(a), a.base_dir);
    EXPECT_EQ(a, b) << e.path();
  }
}

TEST(Config, RejectsUnknownKeys) {
  expect_rejected(replace(kTwoRobots, "\"horizon\"", "\"horizn\""), "simulation.horizn");
  expect_rejected(replace(kTwoRobots, "\"c\": 3", "\"c\": 3, \"gain\": 1"), "tasks[1].params.gain");
}

TEST(Config, RejectsBadValues) {
  expect_rejected(replace(kTwoRobots, "\"dt\": 0.01", "\"dt\": -1"), "simulation.dt");
  expect_rejected(replace(kTwoRobots, "\"l\": 0.1", "\"l\": 0.7"), "schedule.segments[1].l");
  expect_rejected(replace(kTwoRobots, "\"robot_block\": 1", "\"robot_block\": 5"), "tasks[1].robot_block");
  expect_rejected(replace(kTwoRobots, "\"goal\": [1, 0]", "\"goal\": [1, 0, 2]"), "tasks[0].params.goal");
  expect_rejected(replace(kTwoRobots, "[0, 0, 0, 0]", "[0, 0, 0]"), "simulation.x0");
  expect_rejected(replace(kTwoRobots, "\"t_end\": 2", "\"t_end\": 3"), "schedule");
  expect_rejected(replace(kTwoRobots, "\"goal\": [1, 0]", "\"goal\": \"north\""), "tasks[0].params.goal");
}

TEST(Config, RejectsUndefinedAndDuplicateIds) {
  expect_rejected(replace(kTwoRobots, "\"lower\": \"B\"", "\"lower\": \"Z\""), "undefined task id 'Z'");
  expect_rejected(replace(kTwoRobots, "\"id\": \"B\"", "\"id\": \"A\""), "tasks[1].id");
}

TEST(Config, RejectsMalformedJson) {
  expect_rejected("{\"name\": ", "config");
}

TEST(Config, BuildScenarioFromShippedHexagon) {
  const ScenarioConfig c = load_config(std::string(CLFSTACK_SCENARIO_DIR) + "/multirobot_hex.json");
  const Scenario s = build_scenario(c);
  EXPECT_EQ(s.system.state_dim(), 12);
  EXPECT_EQ(s.tasks.size(), 4u);
  EXPECT_EQ(s.schedule.segments.size(), 3u);
  EXPECT_EQ(s.schedule.segments[2].relations.size(), 5u);
  EXPECT_EQ(s.controller.kappa, 0.2);
  EXPECT_NO_THROW(s.validate());
}

TEST(Config, LqrTaskUsesRiccatiSolution) {
  const ScenarioConfig c = load_config(std::string(CLFSTACK_SCENARIO_DIR) + "/double_integrator.json");
  const Scenario s = build_scenario(c);
  const double s3 = std::sqrt(3.0);
  const Eigen::Vector2d x(1.0, 0.0);
  // x'Px with P = [[s3, 1], [1, s3]]
  EXPECT_NEAR(s.tasks[0].provider->value(x), s3, 1e-9);
  const LearningProblem lp = build_learning(c);
  EXPECT_EQ(lp.vi.actions.size(), 41u);
  EXPECT_EQ(lp.vi.grid.resolution, (std::vector<int>{81, 81}));
  EXPECT_NEAR(lp.stage_cost(x, Vector::Constant(1, 2.0)), 1.0 + 4.0, 1e-15);
}

TEST(Config, MissingGridArtifactIsReported) {
  std::string text = kTwoRobots;
  text = replace(text, R"({"id": "A", "type": "goto_goal", "params": {"goal": [1, 0]}, "robot_block": 0})",
                 R"({"id": "A", "type": "grid_value", "params": {"path": "no/such/grid.txt"}, "robot_block": 0})");
  const ScenarioConfig c = parse_config(text);
  try {
    build_scenario(c);
    ADD_FAILURE() << "built a scenario without its grid";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("clfstack learn"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace clfstack
