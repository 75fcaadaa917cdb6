#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "arena/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"training arena for tool-using agents"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON run configuration file")
      ->check(CLI::ExistingFile);
  std::optional<std::string> opt_seed;
  app.add_option("--seed", opt_seed, "override the master seed");
  std::optional<std::string> opt_output;
  app.add_option("--output-dir", opt_output, "override paths.output_dir");
  std::optional<std::string> opt_eco;
  app.add_option("--ecosystem-dir", opt_eco, "override paths.ecosystem_dir");
  std::optional<std::string> opt_suite;
  app.add_option("--suite", opt_suite, "override paths.suite_file");
  std::optional<int> opt_par;
  app.add_option("--parallelism", opt_par, "override worker count");

  CLI::App* forge = app.add_subcommand("forge", "generate an environment ecosystem and taxonomy");
  CLI::App* synth = app.add_subcommand("synth-tasks", "synthesize a verifiable task suite");
  CLI::App* rollout = app.add_subcommand("rollout", "run a policy over the task suite");
  CLI::App* train = app.add_subcommand("train", "train the softmax policy with group-relative updates");
  CLI::App* arena_cmd = app.add_subcommand("arena", "run the evaluate/diagnose/expand/retrain loop");
  CLI::App* report = app.add_subcommand("report", "render metrics summaries and trajectory case tables");
  CLI::App* validate = app.add_subcommand("validate", "re-check stored bundles and task suites");
  CLI::App* toolc = app.add_subcommand("toolc", "parse and check one bundle; print the retained-tool report");
  (void)forge;
  (void)synth;
  (void)report;
  (void)validate;

  std::string policy_file;
  rollout->add_option("--policy", policy_file, "policy parameter JSON file")->check(CLI::ExistingFile);
  train->add_option("--policy", policy_file, "initial policy parameter JSON file")->check(CLI::ExistingFile);
  arena_cmd->add_option("--policy", policy_file, "initial policy parameter JSON file")->check(CLI::ExistingFile);

  std::optional<int> rounds, k, per_env;
  arena_cmd->add_option("--rounds", rounds, "self-evolution rounds");
  arena_cmd->add_option("--k", k, "arena environments per coarse category");
  arena_cmd->add_option("--per-env", per_env, "graph-task quota per arena environment per round");

  std::string bundle_dir;
  toolc->add_option("bundle", bundle_dir, "bundle directory to compile")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    arena::RunConfig cfg = arena::load_config(config_path);
    if (opt_seed) {
      // Reuse the config-side parsing so string seeds get the same checks.
      arena::ValueObject o;
      o["seed"] = arena::Value(*opt_seed);
      arena::ValueObject root = cfg.to_value().as_object();
      root["seed"] = o["seed"];
      cfg = arena::RunConfig::from_value(arena::Value(std::move(root)));
    }
    if (opt_output) cfg.paths.output_dir = *opt_output;
    if (opt_eco) cfg.paths.ecosystem_dir = *opt_eco;
    if (opt_suite) cfg.paths.suite_file = *opt_suite;
    if (opt_par) cfg.parallelism = *opt_par;
    // Flag overrides go through full validation again.
    cfg = arena::RunConfig::from_value(cfg.to_value());

    arena::VerbArgs vargs;
    vargs.bundle_dir = bundle_dir;
    vargs.policy_file = policy_file;
    vargs.rounds = rounds;
    vargs.k = k;
    vargs.per_env = per_env;
    const std::string verb = app.get_subcommands().front()->get_name();
    return arena::run_command(verb, std::move(cfg), vargs);
  } catch (const std::exception& e) {
    std::cerr << "arena: " << e.what() << "\n";
    return 1;
  }
}
