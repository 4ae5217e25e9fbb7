#include "semplan/benchlib.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <json.hpp>

namespace semplan::bench {

using nlohmann::json;

std::string BudgetSpec::label() const {
  if (iters > 0) return std::to_string(iters) + "it";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%gms", ms);
  return buf;
}

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (std::uint64_t p : parts) {
    h ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    h ^= h >> 31;
  }
  return h;
}

namespace {

json method_to_json(const MethodSpec& m) {
  json j{{"name", m.name}, {"kind", m.kind}};
  if (m.kind == "greedy1") j["samples_per_action"] = m.samples_per_action;
  if (m.kind == "vanilla-mcts") j["latency_ms"] = m.latency_ms;
  if (m.kind == "scope") {
    j["action_model"] = m.action_model;
    j["next_model"] = m.next_model;
    j["reward_model"] = m.reward_model;
  }
  return j;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string ExperimentConfig::resolved_json() const {
  json methods_j = json::array();
  for (const auto& m : methods) methods_j.push_back(method_to_json(m));
  json budgets_ms = json::array(), budgets_iters = json::array();
  for (const auto& b : budgets) {
    if (b.iters > 0)
      budgets_iters.push_back(b.iters);
    else
      budgets_ms.push_back(b.ms);
  }
  json j{{"world", world_path},
         {"methods", methods_j},
         {"budgets_ms", budgets_ms},
         {"budgets_iters", budgets_iters},
         {"trials", trials},
         {"turns", turns},
         {"depth", depth},
         {"gamma", gamma},
         {"lambda", lambda},
         {"branching", branching},
         {"reward_scale", reward_scale},
         {"num_starts", num_starts},
         {"start_states", start_states},
         {"seed", seed},
         {"threads", threads},
         {"out_rows", out_rows},
         {"out_summary", out_summary}};
  return j.dump();
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bench config: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config schema violation: " + std::string(e.what()));
  }

  ExperimentConfig cfg;
  if (!j.contains("world") || !j.contains("methods"))
    throw std::runtime_error("config schema violation: 'world' and 'methods' are required");
  cfg.world_path = j.at("world").get<std::string>();
  for (const auto& mj : j.at("methods")) {
    MethodSpec m;
    m.name = mj.at("name").get<std::string>();
    m.kind = mj.value("kind", m.name);
    m.samples_per_action = mj.value("samples_per_action", 5);
    m.latency_ms = mj.value("latency_ms", 50.0);
    m.action_model = mj.value("action_model", std::string{});
    m.next_model = mj.value("next_model", std::string{});
    m.reward_model = mj.value("reward_model", std::string{});
    if (m.kind != "random" && m.kind != "greedy0" && m.kind != "greedy1" &&
        m.kind != "vanilla-mcts" && m.kind != "scope")
      throw std::runtime_error("config schema violation: unknown method kind '" + m.kind + "'");
    if (m.kind == "scope" &&
        (m.action_model.empty() || m.next_model.empty() || m.reward_model.empty()))
      throw std::runtime_error("config schema violation: scope methods need model paths");
    cfg.methods.push_back(std::move(m));
  }
  for (const auto& b : j.value("budgets_ms", json::array()))
    cfg.budgets.push_back({0, b.get<double>()});
  for (const auto& b : j.value("budgets_iters", json::array()))
    cfg.budgets.push_back({b.get<long>(), 0.0});
  if (cfg.methods.empty() || cfg.budgets.empty())
    throw std::runtime_error("config schema violation: need >= 1 method and >= 1 budget");

  cfg.trials = j.value("trials", 5);
  cfg.turns = j.value("turns", 5);
  cfg.depth = j.value("depth", 4);
  cfg.gamma = j.value("gamma", 0.9);
  cfg.lambda = j.value("lambda", 0.1);
  cfg.branching = j.value("branching", 5);
  cfg.reward_scale = j.value("reward_scale", 1.0);
  cfg.num_starts = j.value("num_starts", 50);
  if (j.contains("start_states")) cfg.start_states = j.at("start_states").get<std::vector<int>>();
  cfg.seed = j.value("seed", 0ULL);
  cfg.threads = j.value("threads", 1);
  cfg.out_rows = j.value("out_rows", cfg.out_rows);
  cfg.out_summary = j.value("out_summary", cfg.out_summary);
  if (cfg.trials < 1 || cfg.turns < 1 || cfg.num_starts < 1 || cfg.start_states.empty())
    throw std::runtime_error("config schema violation: trials, turns and starts must be >= 1");
  return cfg;
}

namespace {

struct LoadedMethod {
  MethodSpec spec;
  std::optional<transition::TransitionModel> dynamics;
  std::optional<reward::RewardModel> rew;
};

LoadedMethod load_method(const MethodSpec& spec) {
  LoadedMethod m;
  m.spec = spec;
  if (spec.kind == "scope") {
    m.dynamics = transition::load_transition_model(spec.action_model, spec.next_model);
    m.rew = reward::load_reward_model(spec.reward_model);
  }
  return m;
}

std::vector<int> sample_candidates(const world::LatentWorld& w, int branching,
                                   numcore::Rng& rng) {
  std::vector<int> ids(w.actions_per_state);
  for (int i = 0; i < w.actions_per_state; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(std::max(branching, 1))));
  return ids;
}

std::vector<planner::SimAction> embed_candidates(const world::LatentWorld& w, int state,
                                                 const std::vector<int>& ids) {
  std::vector<planner::SimAction> out;
  out.reserve(ids.size());
  for (int a : ids) {
    planner::SimAction c;
    c.action_id = a;
    c.vec.resize(w.n);
    for (int i = 0; i < w.n; ++i)
      c.vec[i] = w.mid_embed[w.row(state, a)][i] - w.state_embed[state][i];
    out.push_back(std::move(c));
  }
  return out;
}

BenchRow run_episode(const world::LatentWorld& w, const LoadedMethod& method,
                     const BudgetSpec& budget, const ExperimentConfig& cfg, int trial,
                     int episode) {
  BenchRow row;
  row.method = method.spec.name;
  row.budget = budget.label();
  row.trial = trial;
  row.episode = episode;
  const int start = cfg.start_states[episode % cfg.start_states.size()];
  row.start_state = start;

  numcore::Rng env_rng(derive_seed({cfg.seed, 0xE17, static_cast<std::uint64_t>(trial),
                                    static_cast<std::uint64_t>(episode)}));
  numcore::Rng method_rng(derive_seed({cfg.seed, 0x3E7, static_cast<std::uint64_t>(trial),
                                       static_cast<std::uint64_t>(episode)}));

  planner::PlanConfig pc;
  pc.gamma = cfg.gamma;
  pc.branching = cfg.branching;
  pc.depth = cfg.depth;
  pc.lambda = cfg.lambda;
  pc.reward_scale = cfg.reward_scale;
  pc.budget_iters = budget.iters;
  pc.budget_ms = budget.ms;

  int l = start;
  double turns_with_stats = 0.0;
  for (int turn = 0; turn < cfg.turns; ++turn) {
    numcore::Rng cand_rng(derive_seed({cfg.seed, 0xCA2D, static_cast<std::uint64_t>(trial),
                                       static_cast<std::uint64_t>(episode),
                                       static_cast<std::uint64_t>(turn)}));
    const std::vector<int> ids = sample_candidates(w, cfg.branching, cand_rng);
    pc.seed = derive_seed({cfg.seed, 0x9127, static_cast<std::uint64_t>(trial),
                           static_cast<std::uint64_t>(episode), static_cast<std::uint64_t>(turn)});

    int chosen = 0;
    const std::string& kind = method.spec.kind;
    if (kind == "random") {
      chosen = baselines::select_random(embed_candidates(w, l, ids), method_rng);
    } else if (kind == "greedy0") {
      const int state = l;
      chosen = baselines::select_greedy0(
          embed_candidates(w, l, ids), [&](const planner::SimAction& a) {
            return world::expected_immediate_reward(w, state, a.action_id);
          });
    } else if (kind == "greedy1") {
      chosen = baselines::select_greedy1(w, l, ids, method.spec.samples_per_action, method_rng);
    } else if (kind == "vanilla-mcts") {
      const auto res =
          baselines::vanilla_mcts(w, l, ids, pc, {method.spec.latency_ms, 0.0});
      chosen = res.result.selected;
      row.rollouts_per_sec += res.result.stats.rollouts_per_sec;
      row.sim_queries += res.simulator_queries;
      row.wall_ms += res.result.stats.wall_ms;
      turns_with_stats += 1.0;
    } else {  // scope
      planner::LearnedSimulator sim(*method.dynamics, *method.rew);
      planner::SimState root{w.state_embed[l], l};
      const auto res = planner::plan(sim, root, embed_candidates(w, l, ids), pc);
      chosen = res.selected;
      row.rollouts_per_sec += res.stats.rollouts_per_sec;
      row.wall_ms += res.stats.wall_ms;
      turns_with_stats += 1.0;
    }

    const auto [next, r] = world::step(w, l, ids[chosen], env_rng);
    row.cum_reward += r;
    l = next;
  }
  if (turns_with_stats > 0.0) row.rollouts_per_sec /= turns_with_stats;
  return row;
}

}  // namespace

std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows,
                                    const ExperimentConfig& cfg) {
  std::vector<BenchSummary> out;
  for (const auto& m : cfg.methods) {
    for (const auto& b : cfg.budgets) {
      BenchSummary s;
      s.method = m.name;
      s.budget = b.label();
      double sum = 0.0, rps = 0.0, q = 0.0;
      std::vector<double> vals;
      for (const auto& r : rows) {
        if (r.method != m.name || r.budget != s.budget) continue;
        vals.push_back(r.cum_reward);
        sum += r.cum_reward;
        rps += r.rollouts_per_sec;
        q += static_cast<double>(r.sim_queries);
      }
      s.episodes = static_cast<long>(vals.size());
      if (s.episodes > 0) {
        s.mean_reward = sum / s.episodes;
        double var = 0.0;
        for (double v : vals) var += (v - s.mean_reward) * (v - s.mean_reward);
        if (s.episodes > 1)
          s.std_error = std::sqrt(var / (s.episodes - 1)) / std::sqrt(s.episodes);
        s.mean_rollouts_per_sec = rps / s.episodes;
        s.mean_sim_queries = q / s.episodes;
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

BenchOutput run_bench(const ExperimentConfig& cfg) {
  const world::LatentWorld w = world::load_world(cfg.world_path);
  for (int s : cfg.start_states)
    if (s < 0 || s >= w.num_states)
      throw std::runtime_error("config schema violation: start state out of range");

  std::vector<LoadedMethod> methods;
  methods.reserve(cfg.methods.size());
  for (const auto& m : cfg.methods) methods.push_back(load_method(m));

  struct Task {
    int method, budget, trial, episode;
  };
  std::vector<Task> tasks;
  for (int m = 0; m < static_cast<int>(cfg.methods.size()); ++m)
    for (int b = 0; b < static_cast<int>(cfg.budgets.size()); ++b)
      for (int t = 0; t < cfg.trials; ++t)
        for (int e = 0; e < cfg.num_starts; ++e) tasks.push_back({m, b, t, e});

  std::vector<BenchRow> rows(tasks.size());
  std::vector<std::atomic<bool>> done(tasks.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      rows[i] = run_episode(w, methods[t.method], cfg.budgets[t.budget], cfg, t.trial, t.episode);
      done[i].store(true, std::memory_order_release);
    }
  };

  std::ofstream out(cfg.out_rows);
  if (!out) throw std::runtime_error("cannot write " + cfg.out_rows);
  out << "# config: " << cfg.resolved_json() << "\n";
  out << "method,budget,trial,episode,start_state,cum_reward,rollouts_per_sec,"
         "sim_queries,wall_ms\n";

  const int n_threads = std::max(1, cfg.threads);
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);

  // Flush rows in canonical order as they complete, so an interrupted run
  // still leaves a valid prefix on disk.
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    while (!done[i].load(std::memory_order_acquire))
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    const BenchRow& r = rows[i];
    out << r.method << ',' << r.budget << ',' << r.trial << ',' << r.episode << ','
        << r.start_state << ',' << fmt_double(r.cum_reward) << ','
        << fmt_double(r.rollouts_per_sec) << ',' << r.sim_queries << ','
        << fmt_double(r.wall_ms) << "\n";
    out.flush();
  }
  for (auto& t : pool) t.join();

  BenchOutput result;
  result.rows = std::move(rows);
  result.summaries = summarize(result.rows, cfg);

  std::ofstream sout(cfg.out_summary);
  if (!sout) throw std::runtime_error("cannot write " + cfg.out_summary);
  sout << "# config: " << cfg.resolved_json() << "\n";
  sout << "method,budget,episodes,mean_reward,std_error,mean_rollouts_per_sec,"
          "mean_sim_queries\n";
  for (const auto& s : result.summaries) {
    sout << s.method << ',' << s.budget << ',' << s.episodes << ','
         << fmt_double(s.mean_reward) << ',' << fmt_double(s.std_error) << ','
         << fmt_double(s.mean_rollouts_per_sec) << ',' << fmt_double(s.mean_sim_queries)
         << "\n";
  }
  return result;
}

void cmd_gen_world(const GenWorldOpts& opts) {
  world::LatentWorld w;
  if (opts.kind == "benchmark") {
    w = world::make_benchmark_world(opts.seed, opts.dim);
  } else if (opts.kind == "random") {
    w = world::make_random_world(opts.seed, opts.states, opts.actions, opts.dim);
  } else {
    throw std::runtime_error("unknown world kind: " + opts.kind);
  }
  world::save_world(w, opts.out);
  std::cout << "wrote " << opts.out << " (" << w.num_states << " states, "
            << w.actions_per_state << " actions, n=" << w.n << ")\n";
}

void cmd_gen_data(const GenDataOpts& opts) {
  const world::LatentWorld w = world::load_world(opts.world_path);
  const auto records = world::gen_transition_dataset(w, opts.count, opts.seed,
                                                     opts.episode_turns);
  dataio::save_transitions(opts.out, records, w.n);
  std::cout << "wrote " << opts.out << " (" << records.size() << " transitions, n=" << w.n
            << ")\n";
  if (!opts.reward_out.empty()) {
    const auto rewards = world::gen_reward_dataset(w);
    dataio::save_rewards(opts.reward_out, rewards, w.n);
    std::cout << "wrote " << opts.reward_out << " (" << rewards.size() << " labeled states)\n";
  }
}

void cmd_train_transition(const TrainTransitionOpts& opts) {
  auto loaded = dataio::load_transitions(opts.data_path);
  if (loaded.empty_warning)
    std::cerr << "warning: dataset " << opts.data_path << " is empty\n";
  const transition::Backend backend = opts.backend == "mdn" ? transition::Backend::Mdn
                                      : opts.backend == "ensemble"
                                          ? transition::Backend::Ensemble
                                          : throw std::runtime_error("unknown backend: " +
                                                                     opts.backend);
  const transition::Submodel which =
      opts.which == "action" ? transition::Submodel::Action
      : opts.which == "next" ? transition::Submodel::NextState
                             : throw std::runtime_error("unknown submodel: " + opts.which);

  transition::TrainHyper hyper = opts.hyper;
  if (!opts.aux_world.empty()) {
    const world::LatentWorld w = world::load_world(opts.aux_world);
    if (w.reward_head.empty())
      throw std::runtime_error("aux world has no reward head");
    hyper.use_aux = true;
    hyper.aux_rows = numcore::Matrix(static_cast<int>(w.reward_head.size()), w.n);
    for (std::size_t j = 0; j < w.reward_head.size(); ++j)
      for (int i = 0; i < w.n; ++i) hyper.aux_rows(static_cast<int>(j), i) = w.reward_head[j][i];
  }

  const auto ckpt = transition::train_transition(loaded.records, backend, which, hyper,
                                                 opts.seed);
  ckpt.save(opts.out);
  std::cout << "wrote " << opts.out << " (kind=" << ckpt.kind
            << ", val_loss=" << (ckpt.val_loss.empty() ? 0.0 : ckpt.val_loss.back()) << ")\n";
}

void cmd_train_reward(const TrainRewardOpts& opts) {
  auto loaded = dataio::load_rewards(opts.data_path);
  if (loaded.empty_warning)
    std::cerr << "warning: dataset " << opts.data_path << " is empty\n";
  const auto ckpt = reward::train_reward(loaded.records, opts.hyper, opts.seed);
  ckpt.save(opts.out);
  std::cout << "wrote " << opts.out << " (kind=" << ckpt.kind
            << ", val_loss=" << (ckpt.val_loss.empty() ? 0.0 : ckpt.val_loss.back()) << ")\n";
}

void cmd_plan(const PlanOpts& opts) {
  planner::SimState root;
  std::vector<planner::SimAction> candidates;
  planner::PlanConfig pc = opts.config;

  std::optional<world::LatentWorld> w;
  if (!opts.world_path.empty()) w = world::load_world(opts.world_path);

  if (!opts.request_path.empty()) {
    std::ifstream in(opts.request_path);
    if (!in) throw std::runtime_error("cannot open plan request: " + opts.request_path);
    json j;
    in >> j;
    if (j.contains("context")) {
      root.point = j.at("context").get<numcore::Vec>();
    } else if (j.contains("context_id")) {
      if (!w) throw std::runtime_error("context_id request needs --world");
      root.latent = j.at("context_id").get<int>();
      root.point = w->state_embed.at(root.latent);
    } else {
      throw std::runtime_error("plan request needs 'context' or 'context_id'");
    }
    if (j.contains("candidates")) {
      for (const auto& c : j.at("candidates")) {
        planner::SimAction a;
        a.vec = c.get<numcore::Vec>();
        candidates.push_back(std::move(a));
      }
    } else if (j.contains("candidate_ids")) {
      if (!w || root.latent < 0)
        throw std::runtime_error("candidate_ids request needs --world and a context_id");
      candidates = embed_candidates(*w, root.latent, j.at("candidate_ids").get<std::vector<int>>());
    }
    if (j.contains("config")) {
      const json& c = j.at("config");
      pc.gamma = c.value("gamma", pc.gamma);
      pc.depth = c.value("depth", pc.depth);
      pc.lambda = c.value("lambda", pc.lambda);
      pc.branching = c.value("branching", pc.branching);
      pc.reward_scale = c.value("reward_scale", pc.reward_scale);
      pc.budget_iters = c.value("budget_iters", pc.budget_iters);
      pc.budget_ms = c.value("budget_ms", pc.budget_ms);
      pc.seed = c.value("seed", pc.seed);
    }
  } else {
    if (!w) throw std::runtime_error("plan needs --request or --world");
    root.latent = opts.state;
    root.point = w->state_embed.at(opts.state);
    std::vector<int> ids(w->actions_per_state);
    for (int i = 0; i < w->actions_per_state; ++i) ids[i] = i;
    candidates = embed_candidates(*w, opts.state, ids);
  }
  if (candidates.empty()) throw std::runtime_error("plan request has no candidates");

  planner::PlanResult res;
  if (opts.method == "scope") {
    const auto dynamics = transition::load_transition_model(opts.action_model, opts.next_model);
    const auto rew = reward::load_reward_model(opts.reward_model);
    planner::LearnedSimulator sim(dynamics, rew);
    res = planner::plan(sim, root, candidates, pc);
  } else if (opts.method == "scope-stub" || opts.method == "vanilla-mcts") {
    if (!w) throw std::runtime_error(opts.method + " needs --world");
    const double latency = opts.method == "vanilla-mcts" ? opts.latency_ms : 0.0;
    planner::WorldSimulator sim(*w, {latency, 0.0});
    res = planner::plan(sim, root, candidates, pc);
  } else {
    throw std::runtime_error("unknown plan method: " + opts.method);
  }

  json out{{"selected", res.selected},
           {"root_q", res.root_q},
           {"root_visits", res.root_visits},
           {"stats",
            {{"iterations", res.stats.iterations},
             {"wall_ms", res.stats.wall_ms},
             {"rollouts_per_sec", res.stats.rollouts_per_sec},
             {"max_depth", res.stats.max_depth},
             {"sim_queries", res.stats.sim_queries}}}};
  if (opts.out.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream f(opts.out);
    if (!f) throw std::runtime_error("cannot write " + opts.out);
    f << out.dump(2) << "\n";
    std::cout << "wrote " << opts.out << "\n";
  }
}

void cmd_bench(const BenchOpts& opts) {
  ExperimentConfig cfg = load_experiment_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.threads) cfg.threads = *opts.threads;
  if (opts.depth) cfg.depth = *opts.depth;
  if (opts.out_rows) cfg.out_rows = *opts.out_rows;
  if (opts.out_summary) cfg.out_summary = *opts.out_summary;

  const BenchOutput out = run_bench(cfg);
  std::cout << "method,budget,episodes,mean_reward,std_error\n";
  for (const auto& s : out.summaries)
    std::cout << s.method << ',' << s.budget << ',' << s.episodes << ','
              << fmt_double(s.mean_reward) << ',' << fmt_double(s.std_error) << "\n";
  std::cout << "wrote " << cfg.out_rows << " and " << cfg.out_summary << "\n";
}

void cmd_diag(const DiagOpts& opts) {
  const auto loaded = dataio::load_transitions(opts.data_path);
  const auto map = transition::from_checkpoint(dataio::Checkpoint::load(opts.model_path));
  const transition::Submodel which =
      opts.which == "action" ? transition::Submodel::Action
      : opts.which == "next" ? transition::Submodel::NextState
                             : throw std::runtime_error("unknown submodel: " + opts.which);
  const auto diag = transition::prediction_diagnostics(map, which, loaded.records);
  json j{{"mean_cos", diag.mean_cos},
         {"mean_ratio", diag.mean_ratio},
         {"used", diag.used},
         {"skipped", diag.skipped},
         {"cos_bins", diag.cos_bins},
         {"ratio_bins", diag.ratio_bins}};
  if (opts.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream f(opts.out);
    if (!f) throw std::runtime_error("cannot write " + opts.out);
    f << j.dump(2) << "\n";
    std::cout << "wrote " << opts.out << "\n";
  }
}

}  // namespace semplan::bench
