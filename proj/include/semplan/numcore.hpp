#pragma once

// Minimal dense-network kernel with hand-coded gradients. Everything here is
// double precision and small enough to verify against central finite
// differences, which the test suite does for every loss kind.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace semplan::numcore {

using Vec = std::vector<double>;
using Rng = std::mt19937_64;

bool all_finite(const Vec& v);

// Row-major dense matrix; just enough for mat-vec work.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

enum class Act { Identity, Tanh, Relu, Softmax };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

struct Layer {
  Matrix w;  // out x in
  Vec b;     // out
  Act act = Act::Identity;
};

// Feed-forward net. Softmax is only legal as the final activation.
struct DenseNet {
  std::vector<Layer> layers;

  int input_dim() const;
  int output_dim() const;
  std::size_t param_count() const;

  // Flat layout: per layer, W row-major then b. Used by checkpoints.
  Vec flat_params() const;
  void set_flat_params(const Vec& flat);
};

// Seeded uniform init in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
DenseNet make_net(const std::vector<int>& dims, const std::vector<Act>& acts,
                  std::uint64_t seed);

Vec softmax(const Vec& z);

Vec forward(const DenseNet& net, const Vec& x);

struct GradBundle {
  std::vector<Matrix> dw;
  std::vector<Vec> db;
  double loss = 0.0;
};

enum class LossKind { Mse, MdnNll, MdnNllAux };

// Gaussian mixture head decoded from a raw output vector laid out as
// [K logits | K*dim means | K*dim log-stddevs].
struct MdnHead {
  int mixture_k = 0;
  int dim = 0;
  Vec phi;                 // softmax of the logits
  std::vector<Vec> mu;
  std::vector<Vec> sigma;  // exp of the clamped log-stddevs
};

// Clamp on predicted log-stddevs; keeps mixture components from collapsing
// or exploding during training.
constexpr double kLogSigmaMin = -7.0;
constexpr double kLogSigmaMax = 4.0;

// Floor applied to transformed reward variances in the auxiliary loss.
constexpr double kRewardVarFloor = 1e-12;

int mdn_raw_dim(int mixture_k, int dim);
MdnHead parse_mdn_head(const Vec& raw, int mixture_k, int dim);

// Linear reward head used by the auxiliary mixture loss: the score of a
// component mean mu_k is rows * (mu_k + anchor), and the score variance is
// the diagonal of rows * diag(sigma_k^2) * rows^T.
struct RewardHead {
  Matrix rows;  // reward_dim x dim
  Vec anchor;   // length dim
};

struct MdnLossSpec {
  int mixture_k = 0;
  int dim = 0;
  bool normalized = true;  // include the (2*pi)^(-n/2) factor in densities
  // MdnNllAux only:
  Vec reward_target;  // length = head.rows.rows
  RewardHead head;
};

// Log-density of a diagonal Gaussian. With normalized=false the constant
// -(n/2)*log(2*pi) is dropped, so the density of x=mu with unit sigma is 1.
double gaussian_logpdf_diag(const Vec& x, const Vec& mu, const Vec& sigma,
                            bool normalized = true);

double mdn_nll(const MdnHead& head, const Vec& target, bool normalized = true);
double mdn_nll_aux(const MdnHead& head, const Vec& target, const Vec& reward_target,
                   const RewardHead& rh, bool normalized = true);

// Loss evaluated at (net, x, target); shares the loss definitions with
// backward so finite differences can probe exactly what backward claims.
double loss_value(const DenseNet& net, LossKind loss, const Vec& x, const Vec& target,
                  const MdnLossSpec& mdn = {});

GradBundle backward(const DenseNet& net, LossKind loss, const Vec& x, const Vec& target,
                    const MdnLossSpec& mdn = {});

// In-place SGD update; clip_norm > 0 rescales the whole gradient bundle to
// that L2 norm when exceeded. Throws on non-finite gradients.
void sgd_step(DenseNet& net, const GradBundle& grads, double lr, double clip_norm = 0.0);

}  // namespace semplan::numcore
