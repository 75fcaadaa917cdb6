#pragma once

// Command-line harness: a single schema-validated JSON config drives every
// pipeline stage (environment forging, task synthesis, rollouts, training,
// the self-evolution arena, reporting, validation).  All on-disk artifact
// formats produced by one verb are re-loadable by the functions here, and
// every run persists the effective post-default configuration next to its
// outputs.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arena/arena.hpp"

namespace arena {

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunPaths {
  std::string ecosystem_dir = "envs";  // bundle directories live here
  std::string suite_file;              // empty -> "<output_dir>/tasks.jsonl"
  std::string output_dir = "out";      // artifacts + effective config
};

struct ForgeConfig {
  std::vector<std::string> themes;  // empty -> every builtin theme
  int envs_per_theme = 2;
  int taxonomy_k1 = 2;  // coarse cluster count (<= k2)
  int taxonomy_k2 = 4;  // fine cluster count
};

struct SynthConfig {
  DifficultyKnobs knobs;
  int graph_per_env = 4;
  int prog_per_env = 2;
  bool consistency_filter = false;  // drop tasks the scripted solver cannot pass
};

struct RolloutConfig {
  int budget = 16;  // tool-call budget per episode
};

struct PolicyConfig {
  int dim = kFeatureDim;
  double temperature = 1.0;
};

// Full harness configuration.  Parsing is lenient (missing fields take the
// defaults above) but validating: every violation is reported with the dotted
// field path, e.g. "train.eps_low: must be > 0".
struct RunConfig {
  std::uint64_t seed = 42;
  RunPaths paths;
  ForgeConfig forge;
  SynthConfig synth;
  RolloutConfig rollout;
  PolicyConfig policy;
  GrpoConfig train;    // group_size 8, batch_tasks 32, eps 0.2/0.28, ...
  ArenaConfig arena;   // k 5, quotas, growth; out_dir is set from paths
  int arena_rounds = 2;
  int parallelism = 1;

  // Effective config echo: every field, defaults applied.
  Value to_value() const;
  static RunConfig from_value(const Value& v);

  // Suite path with the default applied.
  std::string suite_path() const;
};

// Read + parse + apply environment overrides (ARENA_OUTPUT_DIR replaces
// paths.output_dir, ARENA_PARALLELISM replaces parallelism; nothing else is
// consulted) + validate.  Throws ValueError with a field path on schema or
// range violations.
RunConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Environment bundle directories
//
//   <dir>/manifest.json        ids, tier labels, collection/tool names, reports
//   <dir>/db/<collection>.json {"schema": [...], "docs": [...]}
//   <dir>/tools.tl             concatenated tool/verifier sources
//   <dir>/tests.json           [{"tool": ..., "args": ..., ...}, ...]
// ---------------------------------------------------------------------------

void save_environment_dir(const EnvironmentBundle& env, const std::string& dir);

// Re-parses and re-checks every tool source against the stored database and
// re-runs the stored unit cases, so a loaded bundle is as trustworthy as a
// freshly generated one.  Throws on any parse/check/test regression.
EnvironmentBundle load_environment_dir(const std::string& dir);

// Raw per-tool scoring for validation commands: parse + check + unit-test each
// stored tool without demanding that all of them pass.
std::vector<ToolReport> audit_environment_dir(const std::string& dir);

// Every bundle directory under `dir`, sorted by env id.
std::vector<EnvironmentBundle> load_ecosystem(const std::string& dir);

// ---------------------------------------------------------------------------
// Task suites (JSON lines, one task per line, stable field order)
// ---------------------------------------------------------------------------

void save_suite(const std::vector<TaskRecord>& tasks, const std::string& path);
std::vector<TaskRecord> load_suite(const std::string& path);

// ---------------------------------------------------------------------------
// Trajectory dumps (JSON lines: one record per step, then an episode footer
// with termination reason, final answer, database digest, and reward)
// ---------------------------------------------------------------------------

struct EpisodeDump {
  std::string task_id;
  std::string env_id;
  std::vector<TrajectoryStep> steps;  // feature vectors are not persisted
  std::string terminated;
  Value final_answer;
  std::uint64_t final_db_digest = 0;
  double reward = 0.0;
};

EpisodeDump episode_dump(const Trajectory& t, const std::string& env_id, double reward);
void save_trajectories(const std::vector<EpisodeDump>& dumps, const std::string& path);
std::vector<EpisodeDump> load_trajectories(const std::string& path);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

// Human-readable digest of a training metrics CSV (step count, reward sweep,
// final entropy/KL/clip fraction).  Header-only or missing data yields a
// valid "no metrics" section.
std::string render_metrics_report(const std::string& csv_text);

// One case table per episode: outcome line, "Tools Used: k/n", then a
// numbered row per turn.  `tool_total` < 0 means the environment's tool
// count is unknown.
std::string render_case_table(const EpisodeDump& d, int tool_total);

// ---------------------------------------------------------------------------
// Command dispatch
// ---------------------------------------------------------------------------

// Extra per-verb arguments collected from the command line.
struct VerbArgs {
  std::string bundle_dir;             // toolc: bundle directory to compile
  std::string policy_file;            // rollout/train/arena: initial params
  std::optional<int> rounds;          // arena: override arena_rounds
  std::optional<int> k;               // arena: override arena.k
  std::optional<int> per_env;         // arena: override arena.per_env_graph
};

// Verbs: forge, synth-tasks, rollout, train, arena, report, validate, toolc.
// Returns a process exit code; 0 iff no stage errored.  Artifacts land under
// cfg.paths.output_dir (bundles under cfg.paths.ecosystem_dir), and the
// effective config is persisted alongside them.
int run_command(const std::string& verb, RunConfig cfg, const VerbArgs& args = {});

}  // namespace arena
