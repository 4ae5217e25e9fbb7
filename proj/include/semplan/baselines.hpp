#pragma once

// Comparison methods run against the same environment and candidate sets as
// the semantic-space planner: uniform random choice, exact and sampled
// myopic selection, and full tree search over the expensive simulator.

#include <functional>
#include <vector>

#include "semplan/planner.hpp"
#include "semplan/worldoracle.hpp"

namespace semplan::baselines {

using numcore::Rng;

int select_random(const std::vector<planner::SimAction>& candidates, Rng& rng);

// Argmax of a direct per-candidate score with no look-ahead; lowest index on
// ties, NaN scores rejected.
int select_greedy0(const std::vector<planner::SimAction>& candidates,
                   const std::function<double(const planner::SimAction&)>& score);

// Monte Carlo one-step mean reward per candidate action, argmax.
int select_greedy1(const world::LatentWorld& w, int state,
                   const std::vector<int>& candidate_actions, int samples_per_action, Rng& rng);

struct VanillaResult {
  planner::PlanResult result;
  long simulator_queries = 0;
};

// Tree search identical to the semantic planner but with every simulated
// turn paying the latency profile of the expensive simulator.
VanillaResult vanilla_mcts(const world::LatentWorld& w, int state,
                           const std::vector<int>& candidate_actions,
                           const planner::PlanConfig& cfg,
                           const world::SimLatencyProfile& profile);

}  // namespace semplan::baselines
