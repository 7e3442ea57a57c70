#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "epic/config.hpp"

using namespace epic;

TEST_CASE("defaults survive an empty config") {
  const ExperimentConfig cfg = parse_config_text("");
  CHECK(cfg.env_name == "chain_suite");
  CHECK(cfg.algo == "epicg");
  CHECK(cfg.K == 200);
  CHECK(cfg.N == 25);
  CHECK(cfg.beta == 1e-4);
  CHECK(cfg.lambda0 == 0.9);
  CHECK(cfg.alpha == 0.95);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("parses sections, comments and lists") {
  const std::string text = R"(# experiment
[env]
name = cartpole_uniform
H = 100
discount = 0.99

[algo]
name = epicg
K = 50        # desk scale
N = 10
beta = 0.01

[run]
seeds = 7, 8, 9
output_dir = /tmp/epic_test_out
)";
  const ExperimentConfig cfg = parse_config_text(text);
  CHECK(cfg.env_name == "cartpole_uniform");
  CHECK(cfg.H == 100);
  CHECK(cfg.K == 50);
  CHECK(cfg.N == 10);
  CHECK(cfg.beta == 0.01);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7, 8, 9});
  CHECK(cfg.output_dir == "/tmp/epic_test_out");
}

TEST_CASE("unknown keys are rejected with the offending line") {
  const std::string text = "[algo]\nname = epicg\nnot_a_key = 3\n";
  try {
    parse_config_text(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("not_a_key") != std::string::npos);
  }
}

TEST_CASE("malformed lines carry line numbers") {
  try {
    parse_config_text("[env]\nname cartpole_uniform\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_config_text("[nope]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("key = 1\n"), ConfigError);          // outside a section
  CHECK_THROWS_AS(parse_config_text("[algo]\nK = ten\n"), ConfigError);  // not a number
  CHECK_THROWS_AS(parse_config_text("[algo]\nK = 1.5\n"), ConfigError);  // not an integer
  CHECK_THROWS_AS(parse_config_text("[run]\nseeds =\n"), ConfigError);   // empty value
}

TEST_CASE("serialization round-trips every field") {
  ExperimentConfig cfg = parse_config_text("");
  cfg.env_name = "cartpole_gmm";
  cfg.algo = "epicg_ft";
  cfg.K = 123;
  cfg.N = 7;
  cfg.M = 3;
  cfg.beta = 0.00125;
  cfg.lambda0 = 0.88;
  cfg.kappa = 0.0;
  cfg.inner_steps = 12;
  cfg.seeds = {10, 20};
  cfg.output_dir = "deep/dir";
  cfg.sweep_N = {2, 4};
  cfg.verify_traces = 55;

  const ExperimentConfig back = parse_config_text(serialize_config(cfg));
  CHECK(back.env_name == cfg.env_name);
  CHECK(back.algo == cfg.algo);
  CHECK(back.K == cfg.K);
  CHECK(back.N == cfg.N);
  CHECK(back.M == cfg.M);
  CHECK(back.beta == cfg.beta);
  CHECK(back.lambda0 == cfg.lambda0);
  CHECK(back.kappa == cfg.kappa);
  CHECK(back.inner_steps == cfg.inner_steps);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.output_dir == cfg.output_dir);
  CHECK(back.sweep_N == cfg.sweep_N);
  CHECK(back.verify_traces == cfg.verify_traces);
  // Serializing again is a fixed point.
  CHECK(serialize_config(back) == serialize_config(cfg));
}

TEST_CASE("mlp policy keys parse and validate") {
  const ExperimentConfig cfg =
      parse_config_text("[algo]\npolicy = mlp\nhidden = 8,4\n");
  CHECK(cfg.policy == "mlp");
  CHECK(cfg.hidden == std::vector<int>{8, 4});
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig bad = parse_config_text("");
  bad.policy = "tabular";
  CHECK_THROWS(bad.validate());
  bad = parse_config_text("");
  bad.policy = "mlp";
  bad.hidden = {0};
  CHECK_THROWS(bad.validate());

  const ExperimentConfig back = parse_config_text(serialize_config(cfg));
  CHECK(back.policy == cfg.policy);
  CHECK(back.hidden == cfg.hidden);
}

TEST_CASE("validation catches out-of-range settings") {
  ExperimentConfig cfg = parse_config_text("");
  cfg.seeds.clear();
  CHECK_THROWS(cfg.validate());

  cfg = parse_config_text("");
  cfg.algo = "dream";
  CHECK_THROWS(cfg.validate());

  cfg = parse_config_text("");
  cfg.env_name = "mujoco";
  CHECK_THROWS(cfg.validate());

  cfg = parse_config_text("");
  cfg.lambda0 = 1.5;
  CHECK_THROWS(cfg.validate());
}
