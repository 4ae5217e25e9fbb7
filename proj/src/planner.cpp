#include "semplan/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>
#include <unordered_map>

namespace semplan::planner {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Vec vec_diff(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

}  // namespace

std::pair<SimState, double> LearnedSimulator::turn(const SimState& s, const SimAction& a,
                                                   Rng& rng) const {
  SimState next;
  next.point = transition::sample_next_state(dynamics_, s.point, a.vec, rng);
  const double r = reward::instantaneous_reward(reward_, s.point, next.point);
  return {std::move(next), r};
}

std::vector<SimAction> LearnedSimulator::sample_actions(const SimState& s, int m,
                                                        Rng& rng) const {
  std::vector<SimAction> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i)
    out.push_back({transition::sample_action(dynamics_, s.point, rng), -1});
  return out;
}

std::pair<SimState, double> WorldSimulator::turn(const SimState& s, const SimAction& a,
                                                 Rng& rng) const {
  const int l = s.latent >= 0 ? s.latent : world::nearest_state(world_, s.point);
  int action = a.action_id;
  if (action < 0) {
    // Resolve the action from its semantic vector: s + h_a is a mid point.
    Vec mid(world_.n);
    for (int i = 0; i < world_.n; ++i) mid[i] = s.point[i] + a.vec[i];
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int cand = 0; cand < world_.actions_per_state; ++cand) {
      const Vec& e = world_.mid_embed[world_.row(l, cand)];
      double d2 = 0.0;
      for (int i = 0; i < world_.n; ++i) {
        const double d = mid[i] - e[i];
        d2 += d * d;
      }
      if (d2 < best_d2) {
        best_d2 = d2;
        best = cand;
      }
    }
    action = best;
  }
  const auto [next, r] = world::slow_simulate(world_, l, action, profile_, rng, counter_);
  return {SimState{world_.state_embed[next], next}, r};
}

std::vector<SimAction> WorldSimulator::sample_actions(const SimState& s, int m, Rng& rng) const {
  const int l = s.latent >= 0 ? s.latent : world::nearest_state(world_, s.point);
  // Distinct actions, uniformly ordered; all of them when m covers the set.
  std::vector<int> ids(world_.actions_per_state);
  for (int i = 0; i < world_.actions_per_state; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  const int take = std::min<int>(m, world_.actions_per_state);
  std::vector<SimAction> out;
  out.reserve(take);
  for (int i = 0; i < take; ++i) {
    const int a = ids[i];
    out.push_back({vec_diff(world_.mid_embed[world_.row(l, a)], world_.state_embed[l]), a});
  }
  return out;
}

Vec WorldEmbedder::context(int context_id) const {
  if (context_id < 0 || context_id >= world_.num_states)
    throw std::invalid_argument("embedder: unknown context id");
  return world_.state_embed[context_id];
}

Vec WorldEmbedder::with_action(int context_id, int action_id) const {
  if (context_id < 0 || context_id >= world_.num_states || action_id < 0 ||
      action_id >= world_.actions_per_state)
    throw std::invalid_argument("embedder: unknown context or action id");
  return world_.mid_embed[world_.row(context_id, action_id)];
}

std::pair<SemPoint, std::vector<SemAction>> project_root(const Embedder& embedder,
                                                         int context_id,
                                                         const std::vector<int>& action_ids) {
  if (action_ids.empty()) throw std::invalid_argument("project_root needs >= 1 candidate");
  const Vec root = embedder.context(context_id);
  std::vector<SemAction> actions;
  actions.reserve(action_ids.size());
  for (int a : action_ids) actions.push_back(vec_diff(embedder.with_action(context_id, a), root));
  return {root, std::move(actions)};
}

void ReplayBuffer::push(int node, int edge, double ret) {
  if (capacity_ == 0) return;
  if (entries_.size() < capacity_) {
    entries_.push_back({node, edge, ret});
  } else {
    entries_[head_] = {node, edge, ret};
    head_ = (head_ + 1) % capacity_;
  }
}

double uct_score(double q, long n_s, long n_sa, double lambda) {
  if (n_s < 1 || n_sa < 1) throw std::invalid_argument("uct_score needs n_s, n_sa >= 1");
  return q + lambda * std::sqrt(std::log(static_cast<double>(n_s)) /
                                static_cast<double>(n_sa));
}

double q_update(double q_prev, long n_sa_after, double r_hat) {
  if (n_sa_after < 1) throw std::invalid_argument("q_update needs the post-increment count");
  const double n = static_cast<double>(n_sa_after);
  return q_prev * (1.0 - 1.0 / n) + r_hat / n;
}

double rollout(const TurnSimulator& sim, const SimState& start, int depth, double gamma,
               Rng& rng) {
  double ret = 0.0;
  double g = 1.0;
  SimState s = start;
  for (int d = 0; d < depth; ++d) {
    std::vector<SimAction> acts = sim.sample_actions(s, 1, rng);
    if (acts.empty()) throw std::runtime_error("rollout aborted: no action sampled");
    auto [next, r] = sim.turn(s, acts[0], rng);
    ret += g * r;
    g *= gamma;
    s = std::move(next);
  }
  return ret;
}

RefreshStats replay_refresh(SearchTree& tree, const ReplayBuffer& buffer) {
  RefreshStats stats;
  std::unordered_map<std::uint64_t, std::pair<double, long>> acc;
  for (const ReplayEntry& e : buffer.entries()) {
    if (e.node < 0 || e.node >= static_cast<int>(tree.nodes.size()) || e.edge < 0 ||
        e.edge >= static_cast<int>(tree.nodes[e.node].edges.size())) {
      ++stats.stale_skipped;
      continue;
    }
    auto& slot = acc[(static_cast<std::uint64_t>(e.node) << 20) |
                     static_cast<std::uint64_t>(e.edge)];
    slot.first += e.ret;
    slot.second += 1;
  }
  for (const auto& [key, sum_count] : acc) {
    const int node = static_cast<int>(key >> 20);
    const int edge = static_cast<int>(key & ((1u << 20) - 1));
    tree.nodes[node].edges[edge].q = sum_count.first / static_cast<double>(sum_count.second);
    ++stats.edges_updated;
  }
  return stats;
}

namespace {

struct PathStep {
  int node;
  int edge;
  int child_slot;
};

PlanResult plan_single(const TurnSimulator& sim, const SimState& root,
                       const std::vector<SimAction>& candidates, const PlanConfig& cfg) {
  PlanResult result;
  result.buffer = std::make_shared<ReplayBuffer>(cfg.replay_capacity);
  SearchTree& tree = result.tree;

  Node root_node;
  root_node.state = root;
  root_node.depth = 0;
  for (const auto& c : candidates) {
    Edge e;
    e.action = c;
    root_node.edges.push_back(std::move(e));
  }
  tree.nodes.push_back(std::move(root_node));

  Rng rng(cfg.seed);
  const long queries_before = sim.queries();
  const auto t0 = Clock::now();
  long iters = 0;
  int max_depth = 0;
  std::vector<PathStep> path;

  while (true) {
    if (cfg.budget_iters > 0 && iters >= cfg.budget_iters) break;
    if (cfg.budget_iters <= 0 && cfg.budget_ms > 0.0 && ms_since(t0) >= cfg.budget_ms) break;
    if (cfg.budget_iters <= 0 && cfg.budget_ms <= 0.0) break;

    path.clear();
    int node_idx = 0;
    double leaf_return = 0.0;

    while (true) {
      Node& node = tree.nodes[node_idx];
      if (node.depth >= cfg.depth) break;  // depth bound: terminal

      std::vector<int> unexplored;
      for (std::size_t e = 0; e < node.edges.size(); ++e)
        if (!node.edges[e].explored()) unexplored.push_back(static_cast<int>(e));

      if (!unexplored.empty()) {
        std::uniform_int_distribution<int> pick(0, static_cast<int>(unexplored.size()) - 1);
        const int eidx = unexplored[pick(rng)];
        auto [child_state, r] = sim.turn(node.state, node.edges[eidx].action, rng);

        Node child;
        child.state = std::move(child_state);
        child.depth = node.depth + 1;
        if (child.depth < cfg.depth)
          for (auto& a : sim.sample_actions(child.state, cfg.branching, rng)) {
            Edge e;
            e.action = std::move(a);
            child.edges.push_back(std::move(e));
          }
        const int child_idx = static_cast<int>(tree.nodes.size());
        max_depth = std::max(max_depth, child.depth);
        tree.nodes.push_back(std::move(child));

        Node& nd = tree.nodes[node_idx];  // re-resolve: push_back may reallocate
        nd.edges[eidx].children.push_back(child_idx);
        nd.edges[eidx].child_reward.push_back(r);
        path.push_back({node_idx, eidx, 0});

        leaf_return = rollout(sim, tree.nodes[child_idx].state,
                              cfg.depth - tree.nodes[child_idx].depth, cfg.gamma, rng);
        break;
      }

      // All edges explored: UCT pick, lowest index on ties.
      int best_e = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < node.edges.size(); ++e) {
        const double s =
            uct_score(node.edges[e].q, std::max(node.visits, 1), node.edges[e].visits,
                      cfg.lambda);
        if (s > best_score) {
          best_score = s;
          best_e = static_cast<int>(e);
        }
      }

      Edge& edge = tree.nodes[node_idx].edges[best_e];
      int slot = 0;
      const bool widen =
          cfg.progressive_widening &&
          static_cast<double>(edge.visits) >
              cfg.pw_c * std::pow(static_cast<double>(tree.nodes[node_idx].visits),
                                  cfg.pw_alpha) &&
          static_cast<int>(edge.children.size()) < edge.visits;
      if (widen) {
        auto [child_state, r] = sim.turn(tree.nodes[node_idx].state, edge.action, rng);
        Node child;
        child.state = std::move(child_state);
        child.depth = tree.nodes[node_idx].depth + 1;
        if (child.depth < cfg.depth)
          for (auto& a : sim.sample_actions(child.state, cfg.branching, rng)) {
            Edge e;
            e.action = std::move(a);
            child.edges.push_back(std::move(e));
          }
        const int child_idx = static_cast<int>(tree.nodes.size());
        max_depth = std::max(max_depth, child.depth);
        tree.nodes.push_back(std::move(child));
        Edge& ed = tree.nodes[node_idx].edges[best_e];
        ed.children.push_back(child_idx);
        ed.child_reward.push_back(r);
        slot = static_cast<int>(ed.children.size()) - 1;
      } else if (edge.children.size() > 1) {
        std::uniform_int_distribution<int> pick(0, static_cast<int>(edge.children.size()) - 1);
        slot = pick(rng);
      }
      path.push_back({node_idx, best_e, slot});
      node_idx = tree.nodes[node_idx].edges[best_e].children[slot];
    }

    // Backpropagate: the return at an edge is its own turn reward plus the
    // discounted return observed below it.
    double ret = cfg.reward_scale * leaf_return;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      Node& node = tree.nodes[it->node];
      Edge& edge = node.edges[it->edge];
      ret = cfg.reward_scale * edge.child_reward[it->child_slot] + cfg.gamma * ret;
      ++edge.visits;
      ++node.visits;
      edge.q = q_update(edge.q, edge.visits, ret);
      result.buffer->push(it->node, it->edge, ret);
    }
    if (cfg.record_trace) {
      std::vector<std::pair<int, int>> t;
      for (const auto& s : path) t.emplace_back(s.node, s.edge);
      result.trace.push_back(std::move(t));
    }

    ++iters;
    if (cfg.replay_refresh_every > 0 && iters % cfg.replay_refresh_every == 0)
      replay_refresh(tree, *result.buffer);
  }

  const double wall = ms_since(t0);
  result.stats.iterations = iters;
  result.stats.wall_ms = wall;
  result.stats.rollouts_per_sec = wall > 0.0 ? iters / (wall / 1000.0) : 0.0;
  result.stats.max_depth = max_depth;
  result.stats.sim_queries = sim.queries() - queries_before;

  const Node& rn = tree.nodes[0];
  result.root_q.resize(rn.edges.size());
  result.root_visits.resize(rn.edges.size());
  for (std::size_t e = 0; e < rn.edges.size(); ++e) {
    result.root_q[e] = rn.edges[e].q;
    result.root_visits[e] = rn.edges[e].visits;
  }
  result.selected = 0;
  for (std::size_t e = 1; e < rn.edges.size(); ++e)
    if (result.root_q[e] > result.root_q[result.selected]) result.selected = static_cast<int>(e);
  return result;
}

}  // namespace

PlanResult plan(const TurnSimulator& sim, const SimState& root,
                const std::vector<SimAction>& candidates, const PlanConfig& cfg) {
  if (candidates.empty()) throw std::invalid_argument("plan needs >= 1 candidate");
  if (cfg.budget_iters <= 0 && cfg.budget_ms <= 0.0)
    throw std::invalid_argument("plan needs a positive budget");
  if (cfg.branching < 1 || cfg.depth < 1 || cfg.lambda < 0.0)
    throw std::invalid_argument("invalid plan config");

  if (cfg.workers <= 1) return plan_single(sim, root, candidates, cfg);

  // Root parallelism: independent trees, root Q merged by visit weight.
  const long queries_before = sim.queries();
  std::vector<PlanResult> results(cfg.workers);
  std::vector<std::thread> threads;
  threads.reserve(cfg.workers);
  for (int w = 0; w < cfg.workers; ++w) {
    threads.emplace_back([&, w]() {
      PlanConfig local = cfg;
      local.workers = 1;
      local.seed = cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(w);
      results[w] = plan_single(sim, root, candidates, local);
    });
  }
  for (auto& t : threads) t.join();
  const long queries_total = sim.queries() - queries_before;

  PlanResult merged;
  merged.root_q.assign(candidates.size(), 0.0);
  merged.root_visits.assign(candidates.size(), 0);
  for (const auto& r : results) {
    for (std::size_t e = 0; e < candidates.size(); ++e) {
      merged.root_q[e] += r.root_q[e] * r.root_visits[e];
      merged.root_visits[e] += r.root_visits[e];
    }
    merged.stats.iterations += r.stats.iterations;
    merged.stats.max_depth = std::max(merged.stats.max_depth, r.stats.max_depth);
    merged.stats.wall_ms = std::max(merged.stats.wall_ms, r.stats.wall_ms);
  }
  for (std::size_t e = 0; e < candidates.size(); ++e)
    if (merged.root_visits[e] > 0) merged.root_q[e] /= merged.root_visits[e];
  merged.stats.sim_queries = queries_total;
  merged.stats.rollouts_per_sec =
      merged.stats.wall_ms > 0.0 ? merged.stats.iterations / (merged.stats.wall_ms / 1000.0)
                                 : 0.0;
  merged.selected = 0;
  for (std::size_t e = 1; e < candidates.size(); ++e)
    if (merged.root_q[e] > merged.root_q[merged.selected])
      merged.selected = static_cast<int>(e);
  merged.tree = std::move(results[0].tree);
  merged.buffer = results[0].buffer;
  return merged;
}

}  // namespace semplan::planner
