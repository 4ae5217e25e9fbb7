#include "semplan/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semplan::reward {

namespace nc = numcore;

double RewardModel::score(const Vec& h_s) const {
  return nc::forward(net, dataio::normalize(h_s, norm))[0];
}

Vec RewardModel::linear_row() const {
  if (!linear || net.layers.size() != 1)
    throw std::logic_error("linear_row requires a linear reward model");
  const nc::Layer& l = net.layers[0];
  // score = sum_i w_i * (x_i - mean_i)/std_i + b  =>  raw row w_i/std_i.
  Vec row(l.w.cols);
  for (int i = 0; i < l.w.cols; ++i) row[i] = l.w(0, i) / norm.std[i];
  return row;
}

dataio::Checkpoint train_reward(const std::vector<dataio::RewardRecord>& records,
                                const RewardTrainHyper& hyper, std::uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  const int n = static_cast<int>(records[0].s.size());

  auto [train, valid] = dataio::split(records, 1.0 - hyper.valid_fraction, seed);
  std::vector<Vec> train_in;
  for (const auto& r : train) train_in.push_back(r.s);
  const NormStats norm = dataio::fit_norm_vecs(train_in);

  nc::DenseNet net =
      hyper.linear
          ? nc::make_net({n, 1}, {nc::Act::Identity}, seed)
          : nc::make_net({n, hyper.hidden, hyper.hidden, 1},
                         {nc::Act::Tanh, nc::Act::Tanh, nc::Act::Identity}, seed);

  auto val_mse = [&](const nc::DenseNet& model) {
    double s = 0.0;
    for (const auto& r : valid) {
      const double e = nc::forward(model, dataio::normalize(r.s, norm))[0] - r.y;
      s += e * e;
    }
    return s / static_cast<double>(valid.size());
  };

  dataio::Checkpoint ckpt;
  ckpt.kind = hyper.linear ? "reward-linear" : "reward-dense";
  ckpt.seed = seed;
  ckpt.epochs = hyper.epochs;
  ckpt.norm_mean = norm.mean;
  ckpt.norm_std = norm.std;

  nc::Rng rng(seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  ckpt.val_loss.push_back(val_mse(net));
  for (int e = 0; e < hyper.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Vec x = dataio::normalize(train[idx].s, norm);
      const nc::GradBundle g = nc::backward(net, nc::LossKind::Mse, x, {train[idx].y});
      if (!std::isfinite(g.loss))
        throw std::runtime_error("training diverged at epoch " + std::to_string(e));
      nc::sgd_step(net, g, hyper.lr, hyper.clip_norm);
    }
    ckpt.val_loss.push_back(val_mse(net));
  }
  ckpt.params = net.flat_params();
  for (const auto& l : net.layers) ckpt.shapes.emplace_back(l.w.rows, l.w.cols);
  return ckpt;
}

RewardModel from_checkpoint(const dataio::Checkpoint& ckpt) {
  if (ckpt.kind != "reward-dense" && ckpt.kind != "reward-linear")
    throw std::invalid_argument("checkpoint kind '" + ckpt.kind + "' is not a reward model");
  RewardModel m;
  m.linear = ckpt.kind == "reward-linear";
  m.norm = {ckpt.norm_mean, ckpt.norm_std};

  std::vector<int> dims{ckpt.shapes.front().second};
  std::vector<nc::Act> acts;
  for (std::size_t i = 0; i < ckpt.shapes.size(); ++i) {
    dims.push_back(ckpt.shapes[i].first);
    acts.push_back(i + 1 == ckpt.shapes.size() ? nc::Act::Identity : nc::Act::Tanh);
  }
  m.net = nc::make_net(dims, acts, 0);
  m.net.set_flat_params(ckpt.params);
  return m;
}

RewardModel load_reward_model(const std::string& path) {
  return from_checkpoint(dataio::Checkpoint::load(path));
}

double instantaneous_reward(const RewardModel& m, const Vec& h_s, const Vec& h_s_next) {
  return m.score(h_s_next) - m.score(h_s);
}

}  // namespace semplan::reward
