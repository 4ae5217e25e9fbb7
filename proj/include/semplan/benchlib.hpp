#pragma once

// Experiment harness behind the CLI: world/dataset generation, training,
// single plan requests, budget-sweep benchmarking and model diagnostics.
// Benchmark output is two CSV files (raw rows and per-method summaries),
// each carrying the fully resolved config in a leading comment line.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semplan/baselines.hpp"
#include "semplan/planner.hpp"
#include "semplan/transition.hpp"
#include "semplan/worldoracle.hpp"

namespace semplan::bench {

struct MethodSpec {
  std::string name;  // row label
  std::string kind;  // random | greedy0 | greedy1 | vanilla-mcts | scope
  int samples_per_action = 5;                          // greedy1
  double latency_ms = 50.0;                            // vanilla-mcts
  std::string action_model, next_model, reward_model;  // scope
};

struct BudgetSpec {
  long iters = 0;    // > 0: iteration budget
  double ms = 0.0;   // > 0: wall-clock budget
  std::string label() const;
};

struct ExperimentConfig {
  std::string world_path;
  std::vector<MethodSpec> methods;
  std::vector<BudgetSpec> budgets;
  int trials = 5;
  int turns = 5;
  int depth = 4;
  double gamma = 0.9;
  double lambda = 0.1;
  int branching = 5;
  double reward_scale = 1.0;
  int num_starts = 50;
  std::vector<int> start_states{0, 1, 2};  // cycled over episodes
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_rows = "bench_rows.csv";
  std::string out_summary = "bench_summary.csv";

  std::string resolved_json() const;
};

ExperimentConfig load_experiment_config(const std::string& path);

struct BenchRow {
  std::string method;
  std::string budget;
  int trial = 0;
  int episode = 0;
  int start_state = 0;
  double cum_reward = 0.0;
  double rollouts_per_sec = 0.0;
  long sim_queries = 0;
  double wall_ms = 0.0;
};

struct BenchSummary {
  std::string method;
  std::string budget;
  long episodes = 0;
  double mean_reward = 0.0;
  double std_error = 0.0;
  double mean_rollouts_per_sec = 0.0;
  double mean_sim_queries = 0.0;
};

struct BenchOutput {
  std::vector<BenchRow> rows;
  std::vector<BenchSummary> summaries;
};

// Runs the full method x budget x trial x start grid. Rows are flushed to
// out_rows as they complete (canonical order), summaries written at the end.
BenchOutput run_bench(const ExperimentConfig& cfg);

std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows,
                                    const ExperimentConfig& cfg);

// Deterministic seed derivation for episode streams.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

// ---- CLI entry points -------------------------------------------------

struct GenWorldOpts {
  std::string kind = "benchmark";  // benchmark | random
  std::uint64_t seed = 0;
  int states = 12;
  int actions = 4;
  int dim = 8;
  std::string out = "world.json";
};
void cmd_gen_world(const GenWorldOpts& opts);

struct GenDataOpts {
  std::string world_path;
  int count = 10000;
  std::uint64_t seed = 0;
  int episode_turns = 5;
  std::string out = "transitions.jsonl";
  std::string reward_out;  // optional reward dataset
};
void cmd_gen_data(const GenDataOpts& opts);

struct TrainTransitionOpts {
  std::string data_path;
  std::string backend = "ensemble";  // ensemble | mdn
  std::string which = "action";      // action | next
  transition::TrainHyper hyper;
  std::uint64_t seed = 0;
  std::string out = "model.json";
  std::string aux_world;  // world providing the reward head for the aux loss
};
void cmd_train_transition(const TrainTransitionOpts& opts);

struct TrainRewardOpts {
  std::string data_path;
  reward::RewardTrainHyper hyper;
  std::uint64_t seed = 0;
  std::string out = "reward.json";
};
void cmd_train_reward(const TrainRewardOpts& opts);

struct PlanOpts {
  std::string request_path;  // JSON request document; or world + state below
  std::string world_path;
  int state = 0;
  std::string method = "scope";  // scope | scope-stub | vanilla-mcts
  std::string action_model, next_model, reward_model;
  planner::PlanConfig config;
  double latency_ms = 0.0;  // vanilla-mcts
  std::string out;          // result JSON; stdout when empty
};
void cmd_plan(const PlanOpts& opts);

struct BenchOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> depth;
  std::optional<std::string> out_rows;
  std::optional<std::string> out_summary;
};
void cmd_bench(const BenchOpts& opts);

struct DiagOpts {
  std::string data_path;
  std::string model_path;
  std::string which = "action";  // action | next
  std::string out;               // JSON; stdout when empty
};
void cmd_diag(const DiagOpts& opts);

}  // namespace semplan::bench
