#pragma once

// Learned stochastic dynamics in semantic space, split into an action model
// (h_s -> h_a) and a next-state model ((h_s, h_a) -> h_s'). Both come in an
// ensemble flavor (uniformly sampled member plus Gaussian jitter) and a
// mixture-density flavor; an exact-kernel stub wraps a LatentWorld for
// oracle-agreement runs.

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "semplan/dataio.hpp"
#include "semplan/numcore.hpp"
#include "semplan/worldoracle.hpp"

namespace semplan::transition {

using dataio::NormStats;
using numcore::MdnHead;
using numcore::Rng;
using numcore::Vec;

// Reward matrix plus anchor state for the auxiliary mixture loss:
// mu_harm = rows * (mu_k + anchor), var_harm = diag(rows * Sigma_k * rows^T).
using RewardHeadContext = numcore::RewardHead;

struct EnsembleModel {
  std::vector<numcore::DenseNet> members;  // >= 1, shared shapes
  double jitter_sigma = 0.05;              // in normalized units
};

struct MdnModel {
  numcore::DenseNet net;
  int mixture_k = 0;
  int sample_dim = 0;
};

// Ground-truth stub: resolves the latent state (and action) nearest to the
// query point and samples the world kernel directly.
struct KernelStub {
  std::shared_ptr<const world::LatentWorld> w;
};

// One trained sub-model: a stochastic map from an input vector to an output
// vector, with its own input/target normalization.
struct StochasticMap {
  std::variant<EnsembleModel, MdnModel, KernelStub> backend;
  NormStats in_norm;
  NormStats out_norm;
  bool is_action = true;  // stub dispatch; irrelevant for learned backends

  Vec sample(const Vec& input, Rng& rng) const;
  Vec mean(const Vec& input) const;
};

struct TransitionModel {
  StochasticMap action_model;
  StochasticMap next_model;
};

Vec sample_action(const TransitionModel& m, const Vec& h_s, Rng& rng);
Vec sample_next_state(const TransitionModel& m, const Vec& h_s, const Vec& h_a, Rng& rng);

// Mixture losses over a decoded head. With paper_form=true the Gaussian
// normalization constant is dropped, so a unit-sigma component centered on
// the target has density 1.
double mdn_loss(const MdnHead& head, const Vec& target, bool paper_form = false);
double mdn_loss_aux(const MdnHead& head, const Vec& target, const Vec& reward_target,
                    const RewardHeadContext& ctx, bool paper_form = false);

enum class Backend { Ensemble, Mdn };
enum class Submodel { Action, NextState };

struct TrainHyper {
  int epochs = 100;
  double lr = 1e-3;
  double valid_fraction = 0.1;
  double clip_norm = 5.0;
  int hidden = 64;
  int members = 4;            // ensemble
  double jitter_sigma = 0.05; // ensemble
  int mixture_k = 16;         // mdn
  bool use_aux = false;       // mdn: auxiliary reward-likelihood factor
  numcore::Matrix aux_rows;   // raw-space reward rows for the auxiliary loss
};

// Trains one sub-model. Ensemble members use seeds {seed, seed+1, ...} for
// both init and their train/validation split. Throws on divergence, naming
// the epoch.
dataio::Checkpoint train_transition(const std::vector<dataio::TransitionRecord>& records,
                                    Backend backend, Submodel which, const TrainHyper& hyper,
                                    std::uint64_t seed);

StochasticMap from_checkpoint(const dataio::Checkpoint& ckpt);
StochasticMap stub_map(std::shared_ptr<const world::LatentWorld> w, Submodel which);
TransitionModel load_transition_model(const std::string& action_path,
                                      const std::string& next_path);

struct DiagnosticsSummary {
  static constexpr int kBins = 40;
  std::vector<long> cos_bins;    // over [-1, 1]
  std::vector<long> ratio_bins;  // over [0, 2], larger ratios land in the last bin
  double mean_cos = 0.0;
  double mean_ratio = 0.0;
  long used = 0;
  long skipped = 0;  // zero-norm truth vectors
};

// Cosine similarity and norm ratio of the model's mean prediction against the
// observed transition, both on difference vectors.
DiagnosticsSummary prediction_diagnostics(const StochasticMap& map, Submodel which,
                                          const std::vector<dataio::TransitionRecord>& records);

// Training inputs/targets for a sub-model; shared with the CLI and tests.
Vec submodel_input(const dataio::TransitionRecord& r, Submodel which);
Vec submodel_target(const dataio::TransitionRecord& r, Submodel which);

}  // namespace semplan::transition
