#pragma once

// Monte Carlo tree search over semantic points. The tree engine is simulator
// agnostic: a learned simulator (transition + reward models) gives the fast
// in-space planner, and a kernel-backed simulator with injected latency gives
// the expensive-query baseline. Both share the exact same tree mechanics.

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "semplan/numcore.hpp"
#include "semplan/reward.hpp"
#include "semplan/transition.hpp"
#include "semplan/worldoracle.hpp"

namespace semplan::planner {

using numcore::Rng;
using numcore::Vec;

using SemPoint = Vec;
using SemAction = Vec;

struct SimState {
  SemPoint point;
  int latent = -1;  // set when a ground-truth simulator produced the state
};

struct SimAction {
  SemAction vec;
  int action_id = -1;  // set for world-backed candidates
};

// One conversation turn plus candidate-action sampling; the only surface the
// tree engine sees. Implementations must be safe for concurrent const use
// with caller-owned rng streams.
class TurnSimulator {
 public:
  virtual ~TurnSimulator() = default;
  // Environment response to taking action a at s: next state and the
  // instantaneous reward of the turn.
  virtual std::pair<SimState, double> turn(const SimState& s, const SimAction& a,
                                           Rng& rng) const = 0;
  virtual std::vector<SimAction> sample_actions(const SimState& s, int m, Rng& rng) const = 0;
  virtual long queries() const { return 0; }
};

class LearnedSimulator : public TurnSimulator {
 public:
  LearnedSimulator(const transition::TransitionModel& dynamics, const reward::RewardModel& rew)
      : dynamics_(dynamics), reward_(rew) {}

  std::pair<SimState, double> turn(const SimState& s, const SimAction& a, Rng& rng) const override;
  std::vector<SimAction> sample_actions(const SimState& s, int m, Rng& rng) const override;

 private:
  const transition::TransitionModel& dynamics_;
  const reward::RewardModel& reward_;
};

// Exact-kernel simulator in embedding space; every turn pays the latency
// profile and bumps the query counter.
class WorldSimulator : public TurnSimulator {
 public:
  WorldSimulator(const world::LatentWorld& w, world::SimLatencyProfile profile = {})
      : world_(w), profile_(profile) {}

  std::pair<SimState, double> turn(const SimState& s, const SimAction& a, Rng& rng) const override;
  std::vector<SimAction> sample_actions(const SimState& s, int m, Rng& rng) const override;
  long queries() const override { return counter_.count.load(); }

  const world::LatentWorld& latent_world() const { return world_; }

 private:
  const world::LatentWorld& world_;
  world::SimLatencyProfile profile_;
  mutable world::QueryCounter counter_;
};

// Pluggable embedding surface: f(context) and f(context followed by action).
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dim() const = 0;
  virtual Vec context(int context_id) const = 0;
  virtual Vec with_action(int context_id, int action_id) const = 0;
};

class WorldEmbedder : public Embedder {
 public:
  explicit WorldEmbedder(const world::LatentWorld& w) : world_(w) {}
  int dim() const override { return world_.n; }
  Vec context(int context_id) const override;
  Vec with_action(int context_id, int action_id) const override;

 private:
  const world::LatentWorld& world_;
};

// Root projection: h_root = f(context), h_a_j = f(context + a_j) - f(context).
std::pair<SemPoint, std::vector<SemAction>> project_root(const Embedder& embedder,
                                                         int context_id,
                                                         const std::vector<int>& action_ids);

struct PlanConfig {
  double gamma = 0.9;
  int branching = 5;        // m actions attached at expanded interior nodes
  int depth = 5;            // D, turns
  double lambda = 0.1;      // UCT exploration constant
  long budget_iters = 0;    // > 0: run exactly this many iterations
  double budget_ms = 0.0;   // > 0: no new iteration after the deadline
  double reward_scale = 1.0;
  std::uint64_t seed = 0;

  // Chance-node re-sampling (off by default: one stored child per edge).
  bool progressive_widening = false;
  double pw_c = 1.0;
  double pw_alpha = 0.5;

  std::size_t replay_capacity = 100000;
  int replay_refresh_every = 64;

  int workers = 1;  // > 1: independent root-parallel trees, visit-weighted merge
  bool record_trace = false;
};

struct Edge {
  SimAction action;
  int visits = 0;   // N(s,a)
  double q = 0.0;
  std::vector<int> children;       // sampled child nodes; one unless widening
  std::vector<double> child_reward;  // scaled turn reward per child
  bool explored() const { return !children.empty(); }
};

struct Node {
  SimState state;
  int depth = 0;
  int visits = 0;  // N(s)
  std::vector<Edge> edges;
};

struct SearchTree {
  std::vector<Node> nodes;  // nodes[0] is the root
};

struct ReplayEntry {
  int node = 0;
  int edge = 0;
  double ret = 0.0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
  void push(int node, int edge, double ret);
  const std::vector<ReplayEntry>& entries() const { return entries_; }
  std::size_t capacity() const { return capacity_; }

 private:
  std::vector<ReplayEntry> entries_;
  std::size_t head_ = 0;  // FIFO ring once full
  std::size_t capacity_;
};

double uct_score(double q, long n_s, long n_sa, double lambda);

// Incremental running mean; n_sa_after is the visit count after incrementing.
double q_update(double q_prev, long n_sa_after, double r_hat);

// Discounted return of a simulated path of `depth` turns from `start`.
double rollout(const TurnSimulator& sim, const SimState& start, int depth, double gamma,
               Rng& rng);

struct RefreshStats {
  long edges_updated = 0;
  long stale_skipped = 0;
};

// Recomputes every buffered edge's Q as the exact mean of its buffered
// returns; entries referencing nodes/edges outside the tree are skipped.
RefreshStats replay_refresh(SearchTree& tree, const ReplayBuffer& buffer);

struct PlanStats {
  long iterations = 0;
  double wall_ms = 0.0;
  double rollouts_per_sec = 0.0;
  int max_depth = 0;
  long sim_queries = 0;
};

struct PlanResult {
  int selected = 0;
  std::vector<double> root_q;
  std::vector<int> root_visits;
  PlanStats stats;
  SearchTree tree;
  std::shared_ptr<ReplayBuffer> buffer;
  // One entry per iteration when record_trace is set: the traversed
  // (node, edge) path.
  std::vector<std::vector<std::pair<int, int>>> trace;
};

PlanResult plan(const TurnSimulator& sim, const SimState& root,
                const std::vector<SimAction>& candidates, const PlanConfig& cfg);

}  // namespace semplan::planner
