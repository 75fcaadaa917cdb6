// Python veneer over the native core. Structured data crosses the boundary
// as canonical JSON strings, so every object seen from Python is exactly the
// artifact format the command-line harness reads and writes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "arena/harness.hpp"

namespace py = pybind11;

namespace {

using namespace arena;

std::vector<std::string> theme_names() {
  std::vector<std::string> out;
  for (const ThemeTemplate& t : builtin_themes()) out.push_back(t.theme);
  return out;
}

std::string forge_environment(const std::string& theme, std::uint64_t seed) {
  return canonical_dump(generate_environment(builtin_theme(theme), seed).to_value(), -1);
}

EnvironmentBundle env_from_json(const std::string& text) {
  return EnvironmentBundle::from_value(canonical_parse(text));
}

std::vector<std::string> synthesize_suite(const std::string& env_json, int n_graph, int n_prog,
                                          std::uint64_t seed) {
  const EnvironmentBundle env = env_from_json(env_json);
  const std::vector<TaskRecord> tasks =
      synthesize_tasks(env, builtin_theme(env.theme), DifficultyKnobs{}, n_graph, n_prog, seed);
  std::vector<std::string> out;
  out.reserve(tasks.size());
  for (const TaskRecord& t : tasks) out.push_back(canonical_dump(t.to_value(), -1));
  return out;
}

std::vector<TaskRecord> tasks_from_json(const std::vector<std::string>& tasks_json) {
  std::vector<TaskRecord> tasks;
  tasks.reserve(tasks_json.size());
  for (const std::string& s : tasks_json) tasks.push_back(TaskRecord::from_value(canonical_parse(s)));
  return tasks;
}

double baseline_pass_rate(const std::string& env_json, const std::vector<std::string>& tasks_json,
                          int budget, std::uint64_t seed) {
  EnvironmentBundle env = env_from_json(env_json);
  const std::vector<TaskRecord> tasks = tasks_from_json(tasks_json);
  EnvMap envs;
  std::string id = env.env_id;
  envs.emplace(std::move(id), std::move(env));
  BaselinePolicy policy(0.0);
  return evaluate_policy(policy, tasks, envs, budget, seed).pass_rate;
}

double train_final_reward(const std::string& env_json, const std::vector<std::string>& tasks_json,
                          int steps, std::uint64_t seed) {
  const EnvironmentBundle env = env_from_json(env_json);
  const std::vector<TaskRecord> tasks = tasks_from_json(tasks_json);
  std::vector<TrainTask> batch;
  batch.reserve(tasks.size());
  for (const TaskRecord& t : tasks) batch.push_back(TrainTask{&t, &env});
  GrpoConfig cfg;
  cfg.steps = steps;
  cfg.group_size = 4;
  cfg.batch_tasks = static_cast<int>(tasks.size());
  cfg.budget = 12;
  return train(batch, zero_params(), cfg, seed).final_mean_reward;
}

std::string canonical_text(const std::string& text) {
  return canonical_dump(canonical_parse(text), -1);
}

std::uint64_t digest(const std::string& text) { return value_digest(canonical_parse(text)); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the tool-agent training arena";
  py::register_exception<arena::Error>(m, "ArenaError");
  m.def("theme_names", &theme_names, "Names of the built-in environment themes.");
  m.def("forge_environment", &forge_environment, py::arg("theme"), py::arg("seed"),
        "Generate one environment bundle; returns its canonical JSON.");
  m.def("synthesize_suite", &synthesize_suite, py::arg("env_json"), py::arg("n_graph"),
        py::arg("n_prog"), py::arg("seed"),
        "Synthesize graph and programmatic tasks; returns one canonical JSON record per task.");
  m.def("baseline_pass_rate", &baseline_pass_rate, py::arg("env_json"), py::arg("tasks_json"),
        py::arg("budget"), py::arg("seed"),
        "Run the scripted reference solver over a suite and return its pass rate.");
  m.def("train_final_reward", &train_final_reward, py::arg("env_json"), py::arg("tasks_json"),
        py::arg("steps"), py::arg("seed"),
        "Train a fresh softmax policy on the suite; returns the final mean reward.");
  m.def("canonicalize", &canonical_text, py::arg("text"),
        "Parse JSON and re-emit it in the canonical compact form.");
  m.def("value_digest", &digest, py::arg("text"),
        "Order-independent 64-bit digest of a JSON value.");
}
