#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "qdet/config.hpp"
#include "qdet/errors.hpp"

using namespace qdet;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("minimal config resolves defaults") {
  const SimulationConfig cfg = load_config(
      "[scenario]\n"
      "name = stern_gerlach\n"
      "[engine]\n"
      "kind = grw\n");
  CHECK(cfg.scenario.name == ScenarioName::SternGerlachInterferometer);
  CHECK(cfg.engine.kind == TheoryEngine::Kind::Grw);
  CHECK(cfg.scenario.params.trials == 10000);
  CHECK(cfg.output.format == "csv");
  CHECK(cfg.output.dir.empty());
}

TEST_CASE("angles are degrees on disk, radians in memory") {
  const SimulationConfig cfg = load_config(
      "[scenario]\n"
      "name = epr_bell\n"
      "settings_a = 0, 90\n"
      "settings_b = 45, 135\n"
      "[engine]\n"
      "kind = endqt\n");
  REQUIRE(cfg.scenario.params.settings_a.size() == 2);
  CHECK(cfg.scenario.params.settings_a[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(cfg.scenario.params.settings_a[1] == Catch::Approx(kPi / 2));
  CHECK(cfg.scenario.params.settings_b[0] == Catch::Approx(kPi / 4));
  CHECK(cfg.scenario.params.settings_b[1] == Catch::Approx(3 * kPi / 4));
}

TEST_CASE("initiator list parses label:property pairs") {
  const SimulationConfig cfg = load_config(
      "[scenario]\n"
      "name = sdc_chain\n"
      "[engine]\n"
      "kind = endqt\n"
      "endqt.initiators = S0:A\n");
  REQUIRE(cfg.engine.endqt.initiators.size() == 1);
  CHECK(cfg.engine.endqt.initiators[0].first == "S0");
  CHECK(cfg.engine.endqt.initiators[0].second == 'A');
}

TEST_CASE("validation gathers every problem in one pass") {
  try {
    load_config(
        "[scenario]\n"
        "name = stern_gerlach\n"
        "trials = many\n"
        "[engine]\n"
        "kind = grw\n"
        "grw.lambda = -1\n"
        "[output]\n"
        "format = yaml\n");
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find("scenario.trials") != std::string::npos);
    CHECK(what.find("grw.lambda must be > 0") != std::string::npos);
    CHECK(what.find("output.format") != std::string::npos);
  }
}

TEST_CASE("negative collapse rate is rejected with a named path") {
  CHECK_THROWS_WITH(load_config("[scenario]\n"
                                "name = stern_gerlach\n"
                                "[engine]\n"
                                "kind = grw\n"
                                "grw.lambda = -1\n"),
                    Catch::Matchers::ContainsSubstring("grw.lambda must be > 0"));
}

TEST_CASE("unknown sections and keys are named") {
  CHECK_THROWS_WITH(load_config("[scenario]\n"
                                "name = stern_gerlach\n"
                                "colour = blue\n"
                                "[engine]\n"
                                "kind = grw\n"),
                    Catch::Matchers::ContainsSubstring("scenario.colour"));
  CHECK_THROWS_WITH(load_config("[scenario]\n"
                                "name = stern_gerlach\n"
                                "[engine]\n"
                                "kind = grw\n"
                                "[extras]\n"
                                "x = 1\n"),
                    Catch::Matchers::ContainsSubstring("unknown section [extras]"));
}

TEST_CASE("malformed lines carry line numbers") {
  CHECK_THROWS_WITH(load_config("[scenario\n"),
                    Catch::Matchers::ContainsSubstring("line 1"));
  CHECK_THROWS_WITH(load_config("[scenario]\nname stern_gerlach\n"),
                    Catch::Matchers::ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(load_config("dangling = 1\n"),
                    Catch::Matchers::ContainsSubstring("outside any [section]"));
}

TEST_CASE("missing required keys are reported") {
  CHECK_THROWS_WITH(load_config("[engine]\nkind = grw\n"),
                    Catch::Matchers::ContainsSubstring("scenario.name"));
  CHECK_THROWS_WITH(load_config("[scenario]\nname = stern_gerlach\n"),
                    Catch::Matchers::ContainsSubstring("engine.kind"));
  CHECK_THROWS_WITH(load_config("[scenario]\n"
                                "name = nowhere\n"
                                "[engine]\n"
                                "kind = grw\n"),
                    Catch::Matchers::ContainsSubstring("scenario.name"));
}

TEST_CASE("overrides apply before validation, later text entries win") {
  const std::string text =
      "[scenario]\n"
      "name = stern_gerlach\n"
      "trials = 5\n"
      "trials = 9\n"
      "[engine]\n"
      "kind = grw\n"
      "seed = 1\n";
  CHECK(load_config(text).scenario.params.trials == 9);
  const SimulationConfig cfg =
      load_config(text, {{"scenario.trials", "33"}, {"engine.seed", "123"}});
  CHECK(cfg.scenario.params.trials == 33);
  CHECK(cfg.engine.seed == 123);
  CHECK_THROWS_AS(load_config(text, {{"scenario.trials", "-2"}}),
                  ValidationError);
}

TEST_CASE("comments and blank lines are ignored") {
  const SimulationConfig cfg = load_config(
      "# a full-line comment\n"
      "\n"
      "[scenario]\n"
      "; another comment style\n"
      "name = weak_sweep\n"
      "points = 7\n"
      "[engine]\n"
      "kind = mwi_local\n");
  CHECK(cfg.scenario.params.points == 7);
  CHECK(cfg.engine.kind == TheoryEngine::Kind::Mwi);
  CHECK(cfg.engine.mwi_variant == MwiVariant::Local);
}

TEST_CASE("missing config file names the path") {
  CHECK_THROWS_WITH(load_config_file("/no/such/dir/run.cfg"),
                    Catch::Matchers::ContainsSubstring("/no/such/dir/run.cfg"));
}
