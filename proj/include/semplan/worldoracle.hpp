#pragma once

// Synthetic ground-truth environment: a finite latent MDP with an injective
// embedding into R^n. Serves as data generator, evaluation environment,
// latency-injected "expensive simulator", and exact expectimax oracle.

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "semplan/dataio.hpp"
#include "semplan/numcore.hpp"

namespace semplan::world {

using numcore::Rng;
using numcore::Vec;

struct LatentWorld {
  int n = 0;                  // embedding dimension
  int num_states = 0;         // latent topic states
  int actions_per_state = 0;

  // Row (l * actions_per_state + a): successor distribution over states and
  // the per-successor turn reward r(l, a, l').
  std::vector<Vec> kernel;
  std::vector<Vec> rewards;

  std::vector<Vec> state_embed;  // E(l)
  std::vector<Vec> mid_embed;    // E(l after action a), one per (l, a)

  // Present for potential-consistent worlds: r(l,a,l') = pot[l'] - pot[l],
  // and reward_head maps an embedding to its potential.
  Vec state_potential;
  std::vector<Vec> reward_head;  // usually a single row

  std::uint64_t embed_seed = 0;

  int row(int l, int a) const { return l * actions_per_state + a; }
  void validate() const;  // kernel rows sum to 1, E injective, rewards finite
};

struct SimLatencyProfile {
  double fixed_ms = 0.0;
  double jitter_ms = 0.0;  // adds U[0, jitter_ms)
};

struct QueryCounter {
  std::atomic<long> count{0};
};

// One environment turn: l' ~ P(.|l,a), reward r(l,a,l').
std::pair<int, double> step(const LatentWorld& w, int l, int a, Rng& rng);

// step with the profile's injected delay; increments the counter.
std::pair<int, double> slow_simulate(const LatentWorld& w, int l, int a,
                                     const SimLatencyProfile& profile, Rng& rng,
                                     QueryCounter& counter);

struct ExpectimaxResult {
  int best_action = 0;
  double value = 0.0;
};

// Exact finite-horizon dynamic programming; ties broken toward the lowest
// action index. Guarded to |L| * |A| * horizon <= 1e7 table entries.
ExpectimaxResult expectimax(const LatentWorld& w, int l, int horizon, double gamma);

// Expected immediate turn reward of action a at state l, from the kernel.
double expected_immediate_reward(const LatentWorld& w, int l, int a);

// Transition records from episodes under a uniform-random behavior policy.
std::vector<dataio::TransitionRecord> gen_transition_dataset(const LatentWorld& w, int count,
                                                             std::uint64_t seed,
                                                             int episode_turns = 5);

// Reward-model training set: every state and mid embedding labeled with its
// potential. Requires a potential-consistent world.
std::vector<dataio::RewardRecord> gen_reward_dataset(const LatentWorld& w);

// Nearest embedded latent state to a semantic point (exact for points that
// are images of E; used to run exact-kernel simulation in embedding space).
int nearest_state(const LatentWorld& w, const Vec& point);

// Benchmark world: 12 topic states, 4 actions, trap/lure structure where the
// myopically best first action differs from the horizon-optimal one, and all
// rewards are exactly consistent with a linear potential on embeddings.
LatentWorld make_benchmark_world(std::uint64_t seed, int n = 8);

// Random world for oracle-agreement runs: mostly-deterministic kernel rows
// and nonnegative rewards, regenerated until state 0 has a clear optimality
// gap at the probe horizon so the optimal action is identifiable.
LatentWorld make_random_world(std::uint64_t seed, int max_states = 12, int max_actions = 4,
                              int n = 8);

void save_world(const LatentWorld& w, const std::string& path);
LatentWorld load_world(const std::string& path);

}  // namespace semplan::world
