#pragma once

// Value-style reward model over semantic points. Per-turn rewards are
// recovered as differences of the model at consecutive states, so they
// telescope along a path and are invariant to a constant shift.

#include <cstdint>
#include <string>
#include <vector>

#include "semplan/dataio.hpp"
#include "semplan/numcore.hpp"

namespace semplan::reward {

using dataio::NormStats;
using numcore::Vec;

struct RewardModel {
  numcore::DenseNet net;  // n -> 1
  NormStats norm;         // inputs only; labels stay in reward units
  bool linear = false;

  double score(const Vec& h_s) const;

  // For a linear model, the equivalent raw-space row (for use as a reward
  // head in the auxiliary mixture loss).
  Vec linear_row() const;
};

struct RewardTrainHyper {
  int epochs = 100;
  double lr = 1e-3;
  double valid_fraction = 0.1;
  double clip_norm = 5.0;
  int hidden = 32;     // dense variant
  bool linear = false; // single identity layer
};

dataio::Checkpoint train_reward(const std::vector<dataio::RewardRecord>& records,
                                const RewardTrainHyper& hyper, std::uint64_t seed);

RewardModel from_checkpoint(const dataio::Checkpoint& ckpt);
RewardModel load_reward_model(const std::string& path);

double instantaneous_reward(const RewardModel& m, const Vec& h_s, const Vec& h_s_next);

}  // namespace semplan::reward
