#include "semplan/worldoracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace semplan::world {

using nlohmann::json;

void LatentWorld::validate() const {
  if (num_states < 1 || actions_per_state < 1 || n < 1)
    throw std::invalid_argument("world must have states, actions and a positive dim");
  const int rows = num_states * actions_per_state;
  if (static_cast<int>(kernel.size()) != rows || static_cast<int>(rewards.size()) != rows)
    throw std::invalid_argument("kernel/reward row count does not match states*actions");
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(kernel[r].size()) != num_states ||
        static_cast<int>(rewards[r].size()) != num_states)
      throw std::invalid_argument("kernel/reward row " + std::to_string(r) + " has bad length");
    double sum = 0.0;
    for (double p : kernel[r]) {
      if (p < 0.0) throw std::invalid_argument("negative kernel probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("kernel row " + std::to_string(r) + " sums to " +
                                  std::to_string(sum));
    if (!numcore::all_finite(rewards[r]))
      throw std::invalid_argument("non-finite reward entries");
  }
  if (static_cast<int>(state_embed.size()) != num_states ||
      static_cast<int>(mid_embed.size()) != rows)
    throw std::invalid_argument("embedding table sizes do not match world");

  // Injectivity: all state and mid embeddings pairwise distinct.
  std::vector<const Vec*> all;
  for (const auto& e : state_embed) all.push_back(&e);
  for (const auto& e : mid_embed) all.push_back(&e);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (static_cast<int>(all[i]->size()) != n)
      throw std::invalid_argument("embedding dimension mismatch");
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double d2 = 0.0;
      for (int c = 0; c < n; ++c) {
        const double d = (*all[i])[c] - (*all[j])[c];
        d2 += d * d;
      }
      if (d2 <= 1e-12)
        throw std::invalid_argument("embedding map is not injective");
    }
  }
}

std::pair<int, double> step(const LatentWorld& w, int l, int a, Rng& rng) {
  if (l < 0 || l >= w.num_states) throw std::invalid_argument("invalid state id");
  if (a < 0 || a >= w.actions_per_state) throw std::invalid_argument("invalid action id");
  const Vec& row = w.kernel[w.row(l, a)];
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  int next = w.num_states - 1;
  double acc = 0.0;
  for (int s = 0; s < w.num_states; ++s) {
    acc += row[s];
    if (r < acc) {
      next = s;
      break;
    }
  }
  return {next, w.rewards[w.row(l, a)][next]};
}

std::pair<int, double> slow_simulate(const LatentWorld& w, int l, int a,
                                     const SimLatencyProfile& profile, Rng& rng,
                                     QueryCounter& counter) {
  double delay = profile.fixed_ms;
  if (profile.jitter_ms > 0.0) {
    std::uniform_real_distribution<double> u(0.0, profile.jitter_ms);
    delay += u(rng);
  }
  if (delay > 0.0)
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
  counter.count.fetch_add(1, std::memory_order_relaxed);
  return step(w, l, a, rng);
}

ExpectimaxResult expectimax(const LatentWorld& w, int l, int horizon, double gamma) {
  if (l < 0 || l >= w.num_states) throw std::invalid_argument("invalid state id");
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  const double table = static_cast<double>(w.num_states) * w.actions_per_state * horizon;
  if (table > 1e7) throw std::invalid_argument("expectimax size guard exceeded");

  if (horizon == 0) return {0, 0.0};

  Vec v_prev(w.num_states, 0.0);
  Vec v_cur(w.num_states, 0.0);
  std::vector<int> best(w.num_states, 0);
  for (int h = 1; h <= horizon; ++h) {
    for (int s = 0; s < w.num_states; ++s) {
      double best_v = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < w.actions_per_state; ++a) {
        const Vec& row = w.kernel[w.row(s, a)];
        const Vec& rew = w.rewards[w.row(s, a)];
        double q = 0.0;
        for (int sn = 0; sn < w.num_states; ++sn)
          if (row[sn] > 0.0) q += row[sn] * (rew[sn] + gamma * v_prev[sn]);
        if (q > best_v) {
          best_v = q;
          best_a = a;
        }
      }
      v_cur[s] = best_v;
      best[s] = best_a;
    }
    std::swap(v_prev, v_cur);
  }
  return {best[l], v_prev[l]};
}

double expected_immediate_reward(const LatentWorld& w, int l, int a) {
  if (l < 0 || l >= w.num_states || a < 0 || a >= w.actions_per_state)
    throw std::invalid_argument("invalid state or action id");
  const Vec& row = w.kernel[w.row(l, a)];
  const Vec& rew = w.rewards[w.row(l, a)];
  double e = 0.0;
  for (int s = 0; s < w.num_states; ++s) e += row[s] * rew[s];
  return e;
}

std::vector<dataio::TransitionRecord> gen_transition_dataset(const LatentWorld& w, int count,
                                                             std::uint64_t seed,
                                                             int episode_turns) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_state(0, w.num_states - 1);
  std::uniform_int_distribution<int> pick_action(0, w.actions_per_state - 1);

  std::vector<dataio::TransitionRecord> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    int l = pick_state(rng);
    for (int t = 0; t < episode_turns && static_cast<int>(out.size()) < count; ++t) {
      const int a = pick_action(rng);
      const auto [next, r] = step(w, l, a, rng);
      (void)r;
      out.push_back({w.state_embed[l], w.mid_embed[w.row(l, a)], w.state_embed[next]});
      l = next;
    }
  }
  return out;
}

std::vector<dataio::RewardRecord> gen_reward_dataset(const LatentWorld& w) {
  if (w.reward_head.empty())
    throw std::invalid_argument("world has no reward head; cannot label states");
  const Vec& row = w.reward_head[0];
  auto score = [&](const Vec& e) {
    double y = 0.0;
    for (int i = 0; i < w.n; ++i) y += row[i] * e[i];
    return y;
  };
  std::vector<dataio::RewardRecord> out;
  for (const auto& e : w.state_embed) out.push_back({e, score(e)});
  for (const auto& e : w.mid_embed) out.push_back({e, score(e)});
  return out;
}

int nearest_state(const LatentWorld& w, const Vec& point) {
  if (static_cast<int>(point.size()) != w.n)
    throw std::invalid_argument("point dimension does not match world");
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int s = 0; s < w.num_states; ++s) {
    double d2 = 0.0;
    for (int i = 0; i < w.n; ++i) {
      const double d = point[i] - w.state_embed[s][i];
      d2 += d * d;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = s;
    }
  }
  return best;
}

namespace {

// Fills embeddings: coordinate 0 carries the potential when given, the rest
// are seeded Gaussian coordinates.
void fill_embeddings(LatentWorld& w, const Vec& state_pot, const Vec& mid_pot,
                     std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  auto gen = [&](double pot, bool use_pot) {
    Vec e(w.n);
    e[0] = use_pot ? pot : g(rng) * 1.5;
    for (int i = 1; i < w.n; ++i) e[i] = g(rng) * 1.5;
    return e;
  };
  const bool use_pot = !state_pot.empty();
  w.state_embed.clear();
  w.mid_embed.clear();
  for (int s = 0; s < w.num_states; ++s)
    w.state_embed.push_back(gen(use_pot ? state_pot[s] : 0.0, use_pot));
  for (int r = 0; r < w.num_states * w.actions_per_state; ++r)
    w.mid_embed.push_back(gen(use_pot ? mid_pot[r] : 0.0, use_pot));
}

// Spreads probability p uniformly over the states in zone.
void add_mass(Vec& row, const std::vector<int>& zone, double p) {
  for (int s : zone) row[s] += p / static_cast<double>(zone.size());
}

}  // namespace

LatentWorld make_benchmark_world(std::uint64_t seed, int n) {
  if (n < 2) throw std::invalid_argument("benchmark world needs n >= 2");
  LatentWorld w;
  w.n = n;
  w.num_states = 12;
  w.actions_per_state = 4;
  w.embed_seed = seed;

  // Zones: conversations start neutral; the "lure" zone pays off immediately
  // but slides into a low-potential drain; the "pit" is a deep sticky region
  // reached mostly through the risky action; the ladder is the slow,
  // sustainable climb. The myopically best first action (flashy -> lure)
  // differs from the horizon-optimal one (build -> ladder).
  const std::vector<int> neutral{0, 1, 2}, lure{3, 4, 5}, drain{6, 7}, pit{8};
  const std::vector<int> lad0{9}, lad1{10}, lad2{11};
  w.state_potential = {0.0, 0.0, 0.0, 1.2, 1.2, 1.2, -1.2, -1.2, -4.5, 0.7, 1.5, 2.4};

  const int rows = w.num_states * w.actions_per_state;
  w.kernel.assign(rows, Vec(w.num_states, 0.0));
  w.rewards.assign(rows, Vec(w.num_states, 0.0));

  auto set_row = [&](int l, int a,
                     std::initializer_list<std::pair<const std::vector<int>*, double>> mix) {
    Vec& row = w.kernel[w.row(l, a)];
    for (const auto& [zone, p] : mix) add_mass(row, *zone, p);
  };

  for (int l : neutral) {
    set_row(l, 0, {{&lure, 0.85}, {&neutral, 0.15}});            // flashy
    set_row(l, 1, {{&lad0, 0.80}, {&neutral, 0.20}});            // build
    set_row(l, 2, {{&neutral, 0.90}, {&lad0, 0.10}});            // chat
    set_row(l, 3, {{&lure, 0.45}, {&neutral, 0.25}, {&pit, 0.30}});  // risky
  }
  for (int l : lure) {
    set_row(l, 0, {{&drain, 0.70}, {&neutral, 0.30}});
    set_row(l, 1, {{&drain, 0.50}, {&neutral, 0.50}});
    set_row(l, 2, {{&drain, 0.55}, {&lure, 0.45}});
    set_row(l, 3, {{&drain, 0.50}, {&pit, 0.30}, {&lure, 0.20}});
  }
  for (int l : drain) {
    set_row(l, 0, {{&neutral, 0.50}, {&drain, 0.50}});
    set_row(l, 1, {{&neutral, 0.30}, {&drain, 0.70}});
    set_row(l, 2, {{&neutral, 0.15}, {&drain, 0.85}});
    set_row(l, 3, {{&lure, 0.20}, {&pit, 0.15}, {&drain, 0.65}});
  }
  for (int l : pit) {
    set_row(l, 0, {{&drain, 0.25}, {&pit, 0.75}});
    set_row(l, 1, {{&drain, 0.15}, {&pit, 0.85}});
    set_row(l, 2, {{&drain, 0.10}, {&pit, 0.90}});
    set_row(l, 3, {{&neutral, 0.10}, {&pit, 0.90}});
  }
  {
    const int l = 9;
    set_row(l, 0, {{&lure, 0.60}, {&lad0, 0.40}});
    set_row(l, 1, {{&lad1, 0.80}, {&lad0, 0.20}});
    set_row(l, 2, {{&lad0, 0.90}, {&neutral, 0.10}});
    set_row(l, 3, {{&lad1, 0.45}, {&lure, 0.25}, {&pit, 0.30}});
  }
  {
    const int l = 10;
    set_row(l, 0, {{&lure, 0.50}, {&lad1, 0.50}});
    set_row(l, 1, {{&lad2, 0.80}, {&lad1, 0.20}});
    set_row(l, 2, {{&lad1, 0.90}, {&lad0, 0.10}});
    set_row(l, 3, {{&lad2, 0.50}, {&lure, 0.20}, {&pit, 0.30}});
  }
  {
    const int l = 11;
    set_row(l, 0, {{&lure, 0.60}, {&lad2, 0.40}});
    set_row(l, 1, {{&lad2, 0.75}, {&lad1, 0.25}});
    set_row(l, 2, {{&lad2, 0.92}, {&lad1, 0.08}});
    set_row(l, 3, {{&neutral, 0.30}, {&lad2, 0.70}});
  }

  // Rewards are exactly potential differences, so the cumulative episode
  // reward telescopes to the potential of the final state.
  for (int l = 0; l < w.num_states; ++l)
    for (int a = 0; a < w.actions_per_state; ++a)
      for (int s = 0; s < w.num_states; ++s)
        w.rewards[w.row(l, a)][s] = w.state_potential[s] - w.state_potential[l];

  // Mid-state potentials: the "score" of the agent's own turn, offset per
  // action flavor. Flashy responses look great in isolation.
  const Vec action_offset{1.8, 0.4, 0.1, 0.9};
  Vec mid_pot(rows, 0.0);
  for (int l = 0; l < w.num_states; ++l)
    for (int a = 0; a < w.actions_per_state; ++a)
      mid_pot[w.row(l, a)] = w.state_potential[l] + action_offset[a];

  fill_embeddings(w, w.state_potential, mid_pot, seed);
  Vec head(n, 0.0);
  head[0] = 1.0;
  w.reward_head = {head};

  w.validate();

  // The whole point of this world: myopia picks a different first action
  // than the horizon-optimal policy at every conversation starter.
  for (int l : neutral) {
    int myopic = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < w.actions_per_state; ++a) {
      const double e = expected_immediate_reward(w, l, a);
      if (e > best) {
        best = e;
        myopic = a;
      }
    }
    const auto opt = expectimax(w, l, 5, 0.9);
    if (myopic == opt.best_action)
      throw std::logic_error("benchmark world lost its myopia gap");
  }
  return w;
}

LatentWorld make_random_world(std::uint64_t seed, int max_states, int max_actions, int n) {
  for (std::uint64_t attempt = 0; attempt < 200; ++attempt) {
    Rng rng(seed + attempt * 0x9e3779b97f4a7c15ULL);
    LatentWorld w;
    w.n = n;
    std::uniform_int_distribution<int> states_d(6, max_states);
    std::uniform_int_distribution<int> actions_d(2, max_actions);
    w.num_states = states_d(rng);
    w.actions_per_state = actions_d(rng);
    w.embed_seed = seed + attempt * 0x9e3779b97f4a7c15ULL + 1;

    const int rows = w.num_states * w.actions_per_state;
    w.kernel.assign(rows, Vec(w.num_states, 0.0));
    w.rewards.assign(rows, Vec(w.num_states, 0.0));
    std::uniform_real_distribution<double> dom(0.80, 0.95);
    std::uniform_real_distribution<double> base_d(0.0, 1.8);
    std::uniform_real_distribution<double> jit(0.0, 0.2);
    std::uniform_int_distribution<int> pick(0, w.num_states - 1);
    for (int r = 0; r < rows; ++r) {
      const int main_s = pick(rng);
      const double p = dom(rng);
      Vec& row = w.kernel[r];
      row[main_s] += p;
      int alt1 = pick(rng), alt2 = pick(rng);
      row[alt1] += (1.0 - p) * 0.6;
      row[alt2] += (1.0 - p) * 0.4;
      const double base = base_d(rng);
      for (int s = 0; s < w.num_states; ++s) w.rewards[r][s] = base + jit(rng);
    }
    fill_embeddings(w, {}, {}, w.embed_seed);
    w.validate();

    // Keep only worlds where the optimal first action at the probe state is
    // clearly separated, so a frozen-chance-node search can identify it.
    const int probe = 0;
    const auto opt = expectimax(w, probe, 3, 0.9);
    double second = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < w.actions_per_state; ++a) {
      if (a == opt.best_action) continue;
      double q = 0.0;
      const Vec& row = w.kernel[w.row(probe, a)];
      const Vec& rew = w.rewards[w.row(probe, a)];
      for (int s = 0; s < w.num_states; ++s) {
        if (row[s] <= 0.0) continue;
        q += row[s] * (rew[s] + 0.9 * expectimax(w, s, 2, 0.9).value);
      }
      second = std::max(second, q);
    }
    if (opt.value >= 1.0 && opt.value - second >= 0.35) return w;
  }
  throw std::runtime_error("could not generate an identifiable random world");
}

void save_world(const LatentWorld& w, const std::string& path) {
  json j{{"n", w.n},
         {"states", w.num_states},
         {"actions", w.actions_per_state},
         {"embed_seed", w.embed_seed},
         {"kernel", w.kernel},
         {"rewards", w.rewards},
         {"state_embed", w.state_embed},
         {"mid_embed", w.mid_embed},
         {"state_potential", w.state_potential},
         {"reward_head", w.reward_head}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write world file: " + path);
  out << j.dump(2) << "\n";
}

LatentWorld load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world file: " + path);
  json j;
  in >> j;
  LatentWorld w;
  w.n = j.at("n").get<int>();
  w.num_states = j.at("states").get<int>();
  w.actions_per_state = j.at("actions").get<int>();
  w.embed_seed = j.at("embed_seed").get<std::uint64_t>();
  w.kernel = j.at("kernel").get<std::vector<Vec>>();
  w.rewards = j.at("rewards").get<std::vector<Vec>>();
  w.state_embed = j.at("state_embed").get<std::vector<Vec>>();
  w.mid_embed = j.at("mid_embed").get<std::vector<Vec>>();
  w.state_potential = j.value("state_potential", Vec{});
  w.reward_head = j.value("reward_head", std::vector<Vec>{});
  w.validate();
  return w;
}

}  // namespace semplan::world
