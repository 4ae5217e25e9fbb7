#include "semplan/baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace semplan::baselines {

int select_random(const std::vector<planner::SimAction>& candidates, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("no candidates to select from");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(candidates.size()) - 1);
  return pick(rng);
}

int select_greedy0(const std::vector<planner::SimAction>& candidates,
                   const std::function<double(const planner::SimAction&)>& score) {
  if (candidates.empty()) throw std::invalid_argument("no candidates to select from");
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = score(candidates[i]);
    if (std::isnan(s)) throw std::invalid_argument("rejected input: NaN candidate score");
    if (s > best_score) {
      best_score = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int select_greedy1(const world::LatentWorld& w, int state,
                   const std::vector<int>& candidate_actions, int samples_per_action, Rng& rng) {
  if (candidate_actions.empty()) throw std::invalid_argument("no candidates to select from");
  if (samples_per_action < 1) throw std::invalid_argument("samples_per_action must be >= 1");
  int best = 0;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidate_actions.size(); ++i) {
    double sum = 0.0;
    for (int s = 0; s < samples_per_action; ++s)
      sum += world::step(w, state, candidate_actions[i], rng).second;
    const double mean = sum / samples_per_action;
    if (mean > best_mean) {
      best_mean = mean;
      best = static_cast<int>(i);
    }
  }
  return best;
}

VanillaResult vanilla_mcts(const world::LatentWorld& w, int state,
                           const std::vector<int>& candidate_actions,
                           const planner::PlanConfig& cfg,
                           const world::SimLatencyProfile& profile) {
  planner::WorldSimulator sim(w, profile);
  planner::SimState root{w.state_embed[state], state};
  std::vector<planner::SimAction> candidates;
  candidates.reserve(candidate_actions.size());
  for (int a : candidate_actions) {
    planner::SimAction c;
    c.action_id = a;
    c.vec.resize(w.n);
    for (int i = 0; i < w.n; ++i)
      c.vec[i] = w.mid_embed[w.row(state, a)][i] - w.state_embed[state][i];
    candidates.push_back(std::move(c));
  }
  VanillaResult out;
  out.result = planner::plan(sim, root, candidates, cfg);
  out.simulator_queries = sim.queries();
  return out;
}

}  // namespace semplan::baselines
