// Command-line front end: world generation, dataset generation, model
// training, planning, budget-sweep benchmarking and diagnostics.

#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "semplan/benchlib.hpp"

namespace sb = semplan::bench;

int main(int argc, char** argv) {
  CLI::App app{"semplan: semantic-space conversation planning toolkit"};
  app.require_subcommand(1);

  sb::GenWorldOpts gw;
  auto* gen_world = app.add_subcommand("gen-world", "generate a latent world file");
  gen_world->add_option("--kind", gw.kind, "benchmark | random")->capture_default_str();
  gen_world->add_option("--seed", gw.seed)->capture_default_str();
  gen_world->add_option("--states", gw.states, "max states (random worlds)")
      ->capture_default_str();
  gen_world->add_option("--actions", gw.actions, "max actions (random worlds)")
      ->capture_default_str();
  gen_world->add_option("--dim", gw.dim, "embedding dimension")->capture_default_str();
  gen_world->add_option("--out", gw.out)->capture_default_str();

  sb::GenDataOpts gd;
  auto* gen_data = app.add_subcommand("gen-data", "roll episodes into a transition dataset");
  gen_data->add_option("--world", gd.world_path)->required();
  gen_data->add_option("--count", gd.count, "number of transitions")->capture_default_str();
  gen_data->add_option("--seed", gd.seed)->capture_default_str();
  gen_data->add_option("--episode-turns", gd.episode_turns)->capture_default_str();
  gen_data->add_option("--out", gd.out)->capture_default_str();
  gen_data->add_option("--reward-out", gd.reward_out, "also write a labeled reward dataset");

  sb::TrainTransitionOpts tt;
  auto* train_t = app.add_subcommand("train-transition", "train an action or next-state model");
  train_t->add_option("--data", tt.data_path)->required();
  train_t->add_option("--backend", tt.backend, "ensemble | mdn")->capture_default_str();
  train_t->add_option("--which", tt.which, "action | next")->capture_default_str();
  train_t->add_option("--epochs", tt.hyper.epochs)->capture_default_str();
  train_t->add_option("--lr", tt.hyper.lr)->capture_default_str();
  train_t->add_option("--hidden", tt.hyper.hidden)->capture_default_str();
  train_t->add_option("--members", tt.hyper.members)->capture_default_str();
  train_t->add_option("--jitter", tt.hyper.jitter_sigma)->capture_default_str();
  train_t->add_option("--k-mix", tt.hyper.mixture_k)->capture_default_str();
  train_t->add_option("--clip", tt.hyper.clip_norm)->capture_default_str();
  train_t->add_option("--aux-world", tt.aux_world,
                      "world file providing a reward head; enables the auxiliary loss");
  train_t->add_option("--seed", tt.seed)->capture_default_str();
  train_t->add_option("--out", tt.out)->capture_default_str();

  sb::TrainRewardOpts tr;
  auto* train_r = app.add_subcommand("train-reward", "train the reward model");
  train_r->add_option("--data", tr.data_path)->required();
  train_r->add_flag("--linear", tr.hyper.linear, "single linear layer");
  train_r->add_option("--epochs", tr.hyper.epochs)->capture_default_str();
  train_r->add_option("--lr", tr.hyper.lr)->capture_default_str();
  train_r->add_option("--hidden", tr.hyper.hidden)->capture_default_str();
  train_r->add_option("--seed", tr.seed)->capture_default_str();
  train_r->add_option("--out", tr.out)->capture_default_str();

  sb::PlanOpts pl;
  auto* plan = app.add_subcommand("plan", "select an action for one context");
  plan->add_option("--request", pl.request_path, "JSON plan request");
  plan->add_option("--world", pl.world_path);
  plan->add_option("--state", pl.state, "context id in the world")->capture_default_str();
  plan->add_option("--method", pl.method, "scope | scope-stub | vanilla-mcts")
      ->capture_default_str();
  plan->add_option("--action-model", pl.action_model);
  plan->add_option("--next-model", pl.next_model);
  plan->add_option("--reward-model", pl.reward_model);
  plan->add_option("--budget-ms", pl.config.budget_ms)->capture_default_str();
  plan->add_option("--budget-iters", pl.config.budget_iters)->capture_default_str();
  plan->add_option("--depth", pl.config.depth)->capture_default_str();
  plan->add_option("--gamma", pl.config.gamma)->capture_default_str();
  plan->add_option("--lambda", pl.config.lambda)->capture_default_str();
  plan->add_option("--branching", pl.config.branching)->capture_default_str();
  plan->add_option("--reward-scale", pl.config.reward_scale)->capture_default_str();
  plan->add_option("--seed", pl.config.seed)->capture_default_str();
  plan->add_option("--threads", pl.config.workers, "root-parallel workers")
      ->capture_default_str();
  plan->add_option("--latency-ms", pl.latency_ms, "injected latency (vanilla-mcts)")
      ->capture_default_str();
  plan->add_option("--out", pl.out, "result JSON path (stdout when omitted)");

  sb::BenchOpts be;
  std::uint64_t be_seed = 0;
  int be_threads = 0, be_depth = 0;
  std::string be_rows, be_summary;
  auto* bench = app.add_subcommand("bench", "run a budget-sweep benchmark");
  bench->add_option("--config", be.config_path)->required();
  auto* o_seed = bench->add_option("--seed", be_seed, "override config seed");
  auto* o_threads = bench->add_option("--threads", be_threads, "override config threads");
  auto* o_depth = bench->add_option("--depth", be_depth, "override config depth");
  auto* o_rows = bench->add_option("--out", be_rows, "override rows output path");
  auto* o_summary = bench->add_option("--out-summary", be_summary);

  sb::DiagOpts dg;
  auto* diag = app.add_subcommand("diag", "prediction diagnostics for a trained model");
  diag->add_option("--data", dg.data_path)->required();
  diag->add_option("--model", dg.model_path)->required();
  diag->add_option("--which", dg.which, "action | next")->capture_default_str();
  diag->add_option("--out", dg.out, "JSON path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_world->parsed()) sb::cmd_gen_world(gw);
    if (gen_data->parsed()) sb::cmd_gen_data(gd);
    if (train_t->parsed()) sb::cmd_train_transition(tt);
    if (train_r->parsed()) sb::cmd_train_reward(tr);
    if (plan->parsed()) sb::cmd_plan(pl);
    if (bench->parsed()) {
      if (o_seed->count()) be.seed = be_seed;
      if (o_threads->count()) be.threads = be_threads;
      if (o_depth->count()) be.depth = be_depth;
      if (o_rows->count()) be.out_rows = be_rows;
      if (o_summary->count()) be.out_summary = be_summary;
      sb::cmd_bench(be);
    }
    if (diag->parsed()) sb::cmd_diag(dg);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
