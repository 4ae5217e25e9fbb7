#pragma once

// Dataset files, per-dimension normalization, train/validation splitting and
// model checkpoints. Datasets are newline-delimited JSON with a header line;
// checkpoints are single JSON documents that round-trip byte-exactly.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "semplan/numcore.hpp"

namespace semplan::dataio {

using numcore::Vec;

struct TransitionRecord {
  Vec s;       // state embedding before the turn
  Vec s_mid;   // embedding after the agent action
  Vec s_next;  // embedding after the environment response
};

struct RewardRecord {
  Vec s;
  double y = 0.0;
};

constexpr double kStdFloor = 1e-6;

struct NormStats {
  Vec mean;
  Vec std;
};

template <typename T>
struct LoadResult {
  std::vector<T> records;
  int dims = 0;
  bool empty_warning = false;
};

LoadResult<TransitionRecord> load_transitions(const std::string& path);
LoadResult<RewardRecord> load_rewards(const std::string& path);

void save_transitions(const std::string& path, const std::vector<TransitionRecord>& records,
                      int dims);
void save_rewards(const std::string& path, const std::vector<RewardRecord>& records, int dims);

// Per-dimension sample mean and population standard deviation over the
// selected field, with the std floored at kStdFloor. Needs >= 2 records.
NormStats fit_norm(const std::vector<TransitionRecord>& records,
                   const std::function<Vec(const TransitionRecord&)>& field);
NormStats fit_norm_vecs(const std::vector<Vec>& rows);

Vec normalize(const Vec& x, const NormStats& stats);
Vec denormalize(const Vec& z, const NormStats& stats);

// Deterministic seeded shuffle, then a (train, valid) partition with
// round(fraction * n) records in train, clamped so neither side is empty.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& records, double fraction,
                                                std::uint64_t seed);

struct Checkpoint {
  std::string kind;                          // dense-ensemble | mdn | reward-dense | reward-linear
  std::vector<std::pair<int, int>> shapes;   // per layer {out, in} of one member
  Vec params;                                // members concatenated, row-major layers
  Vec norm_mean, norm_std;                   // input normalization
  Vec target_mean, target_std;               // target normalization (empty when unused)
  std::uint64_t seed = 0;
  int epochs = 0;
  int members = 1;                           // dense-ensemble only
  double jitter_sigma = 0.0;                 // dense-ensemble only
  int mixture_k = 0;                         // mdn only
  int sample_dim = 0;                        // mdn only
  Vec val_loss;                              // per-epoch validation loss

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace semplan::dataio
