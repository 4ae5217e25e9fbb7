#include "semplan/transition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semplan::transition {

namespace nc = numcore;

namespace {

Vec concat(const Vec& a, const Vec& b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Vec diff(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

int nearest_mid(const world::LatentWorld& w, const Vec& point) {
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < w.mid_embed.size(); ++m) {
    double d2 = 0.0;
    for (int i = 0; i < w.n; ++i) {
      const double d = point[i] - w.mid_embed[m][i];
      d2 += d * d;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(m);
    }
  }
  return best;
}

}  // namespace

Vec submodel_input(const dataio::TransitionRecord& r, Submodel which) {
  return which == Submodel::Action ? r.s : concat(r.s, diff(r.s_mid, r.s));
}

Vec submodel_target(const dataio::TransitionRecord& r, Submodel which) {
  return which == Submodel::Action ? diff(r.s_mid, r.s) : r.s_next;
}

Vec StochasticMap::sample(const Vec& input, Rng& rng) const {
  if (const auto* stub = std::get_if<KernelStub>(&backend)) {
    const world::LatentWorld& w = *stub->w;
    if (is_action) {
      const int l = world::nearest_state(w, input);
      std::uniform_int_distribution<int> pick(0, w.actions_per_state - 1);
      const int a = pick(rng);
      return diff(w.mid_embed[w.row(l, a)], w.state_embed[l]);
    }
    // input = (h_s, h_a); the mid point h_s + h_a identifies (l, a).
    Vec mid(w.n);
    for (int i = 0; i < w.n; ++i) mid[i] = input[i] + input[w.n + i];
    const int row = nearest_mid(w, mid);
    const int l = row / w.actions_per_state;
    const int a = row % w.actions_per_state;
    const auto [next, r] = world::step(w, l, a, rng);
    (void)r;
    return w.state_embed[next];
  }

  const Vec z = dataio::normalize(input, in_norm);
  Vec out_z;
  if (const auto* ens = std::get_if<EnsembleModel>(&backend)) {
    if (ens->members.empty()) throw std::runtime_error("untrained model: no ensemble members");
    std::uniform_int_distribution<int> pick(0, static_cast<int>(ens->members.size()) - 1);
    out_z = nc::forward(ens->members[pick(rng)], z);
    if (ens->jitter_sigma > 0.0) {
      std::normal_distribution<double> g(0.0, ens->jitter_sigma);
      for (double& v : out_z) v += g(rng);
    }
  } else {
    const auto& mdn = std::get<MdnModel>(backend);
    if (mdn.net.layers.empty()) throw std::runtime_error("untrained model: empty mdn net");
    const MdnHead head =
        nc::parse_mdn_head(nc::forward(mdn.net, z), mdn.mixture_k, mdn.sample_dim);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double r = u(rng);
    int k = head.mixture_k - 1;
    double acc = 0.0;
    for (int i = 0; i < head.mixture_k; ++i) {
      acc += head.phi[i];
      if (r < acc) {
        k = i;
        break;
      }
    }
    out_z.resize(head.dim);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < head.dim; ++i) out_z[i] = head.mu[k][i] + head.sigma[k][i] * g(rng);
  }
  return dataio::denormalize(out_z, out_norm);
}

Vec StochasticMap::mean(const Vec& input) const {
  if (const auto* stub = std::get_if<KernelStub>(&backend)) {
    const world::LatentWorld& w = *stub->w;
    if (is_action) {
      const int l = world::nearest_state(w, input);
      Vec m(w.n, 0.0);
      for (int a = 0; a < w.actions_per_state; ++a)
        for (int i = 0; i < w.n; ++i)
          m[i] += (w.mid_embed[w.row(l, a)][i] - w.state_embed[l][i]) /
                  static_cast<double>(w.actions_per_state);
      return m;
    }
    Vec mid(w.n);
    for (int i = 0; i < w.n; ++i) mid[i] = input[i] + input[w.n + i];
    const int row = nearest_mid(w, mid);
    Vec m(w.n, 0.0);
    for (int s = 0; s < w.num_states; ++s)
      for (int i = 0; i < w.n; ++i) m[i] += w.kernel[row][s] * w.state_embed[s][i];
    return m;
  }

  const Vec z = dataio::normalize(input, in_norm);
  Vec out_z;
  if (const auto* ens = std::get_if<EnsembleModel>(&backend)) {
    out_z.assign(static_cast<std::size_t>(ens->members[0].output_dim()), 0.0);
    for (const auto& m : ens->members) {
      const Vec y = nc::forward(m, z);
      for (std::size_t i = 0; i < y.size(); ++i) out_z[i] += y[i];
    }
    for (double& v : out_z) v /= static_cast<double>(ens->members.size());
  } else {
    const auto& mdn = std::get<MdnModel>(backend);
    const MdnHead head =
        nc::parse_mdn_head(nc::forward(mdn.net, z), mdn.mixture_k, mdn.sample_dim);
    out_z.assign(head.dim, 0.0);
    for (int k = 0; k < head.mixture_k; ++k)
      for (int i = 0; i < head.dim; ++i) out_z[i] += head.phi[k] * head.mu[k][i];
  }
  return dataio::denormalize(out_z, out_norm);
}

Vec sample_action(const TransitionModel& m, const Vec& h_s, Rng& rng) {
  if (!nc::all_finite(h_s)) throw std::invalid_argument("non-finite state point");
  return m.action_model.sample(h_s, rng);
}

Vec sample_next_state(const TransitionModel& m, const Vec& h_s, const Vec& h_a, Rng& rng) {
  if (!nc::all_finite(h_s) || !nc::all_finite(h_a))
    throw std::invalid_argument("non-finite state or action point");
  return m.next_model.sample(concat(h_s, h_a), rng);
}

double mdn_loss(const MdnHead& head, const Vec& target, bool paper_form) {
  return nc::mdn_nll(head, target, !paper_form);
}

double mdn_loss_aux(const MdnHead& head, const Vec& target, const Vec& reward_target,
                    const RewardHeadContext& ctx, bool paper_form) {
  return nc::mdn_nll_aux(head, target, reward_target, ctx, !paper_form);
}

namespace {

struct Pairs {
  std::vector<Vec> inputs;
  std::vector<Vec> targets;
};

Pairs make_pairs(const std::vector<dataio::TransitionRecord>& records, Submodel which) {
  Pairs p;
  p.inputs.reserve(records.size());
  p.targets.reserve(records.size());
  for (const auto& r : records) {
    p.inputs.push_back(submodel_input(r, which));
    p.targets.push_back(submodel_target(r, which));
  }
  return p;
}

double validation_mse(const nc::DenseNet& net, const Pairs& val, const NormStats& in_n,
                      const NormStats& out_n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < val.inputs.size(); ++i) {
    const Vec pred = dataio::denormalize(nc::forward(net, dataio::normalize(val.inputs[i], in_n)),
                                         out_n);
    for (std::size_t d = 0; d < pred.size(); ++d) {
      const double e = pred[d] - val.targets[i][d];
      sum += e * e;
    }
  }
  return sum / (static_cast<double>(val.inputs.size()) *
                static_cast<double>(val.targets[0].size()));
}

}  // namespace

dataio::Checkpoint train_transition(const std::vector<dataio::TransitionRecord>& records,
                                    Backend backend, Submodel which, const TrainHyper& hyper,
                                    std::uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("cannot train on an empty dataset");

  dataio::Checkpoint ckpt;
  ckpt.seed = seed;
  ckpt.epochs = hyper.epochs;
  ckpt.jitter_sigma = hyper.jitter_sigma;

  const Vec probe_in = submodel_input(records[0], which);
  const Vec probe_out = submodel_target(records[0], which);
  const int in_dim = static_cast<int>(probe_in.size());
  const int out_dim = static_cast<int>(probe_out.size());

  if (backend == Backend::Ensemble) {
    ckpt.kind = "dense-ensemble";
    ckpt.members = hyper.members;

    // Stats fitted on the full set; member splits below vary per seed.
    Pairs all = make_pairs(records, which);
    const NormStats in_n = dataio::fit_norm_vecs(all.inputs);
    const NormStats out_n = dataio::fit_norm_vecs(all.targets);
    ckpt.norm_mean = in_n.mean;
    ckpt.norm_std = in_n.std;
    ckpt.target_mean = out_n.mean;
    ckpt.target_std = out_n.std;

    Vec epoch_val(static_cast<std::size_t>(hyper.epochs) + 1, 0.0);
    for (int m = 0; m < hyper.members; ++m) {
      const std::uint64_t member_seed = seed + static_cast<std::uint64_t>(m);
      auto [train, valid] = dataio::split(records, 1.0 - hyper.valid_fraction, member_seed);
      Pairs tr = make_pairs(train, which);
      Pairs va = make_pairs(valid, which);

      nc::DenseNet net = nc::make_net({in_dim, hyper.hidden, hyper.hidden, out_dim},
                                      {nc::Act::Tanh, nc::Act::Tanh, nc::Act::Identity},
                                      member_seed);
      nc::Rng rng(member_seed ^ 0xabcdef12345ULL);
      std::vector<std::size_t> order(tr.inputs.size());
      std::iota(order.begin(), order.end(), 0);

      epoch_val[0] += validation_mse(net, va, in_n, out_n);
      for (int e = 0; e < hyper.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t idx : order) {
          const Vec x = dataio::normalize(tr.inputs[idx], in_n);
          const Vec t = dataio::normalize(tr.targets[idx], out_n);
          const nc::GradBundle g = nc::backward(net, nc::LossKind::Mse, x, t);
          if (!std::isfinite(g.loss))
            throw std::runtime_error("training diverged at epoch " + std::to_string(e));
          nc::sgd_step(net, g, hyper.lr, hyper.clip_norm);
        }
        epoch_val[static_cast<std::size_t>(e) + 1] += validation_mse(net, va, in_n, out_n);
      }
      const Vec flat = net.flat_params();
      ckpt.params.insert(ckpt.params.end(), flat.begin(), flat.end());
      if (m == 0)
        for (const auto& l : net.layers) ckpt.shapes.emplace_back(l.w.rows, l.w.cols);
    }
    for (double& v : epoch_val) v /= static_cast<double>(hyper.members);
    ckpt.val_loss = epoch_val;
    return ckpt;
  }

  // MDN backend.
  ckpt.kind = "mdn";
  ckpt.mixture_k = hyper.mixture_k;
  ckpt.sample_dim = out_dim;

  auto [train, valid] = dataio::split(records, 1.0 - hyper.valid_fraction, seed);
  Pairs tr = make_pairs(train, which);
  Pairs va = make_pairs(valid, which);
  const NormStats in_n = dataio::fit_norm_vecs(tr.inputs);
  const NormStats out_n = dataio::fit_norm_vecs(tr.targets);
  ckpt.norm_mean = in_n.mean;
  ckpt.norm_std = in_n.std;
  ckpt.target_mean = out_n.mean;
  ckpt.target_std = out_n.std;

  const int raw_dim = nc::mdn_raw_dim(hyper.mixture_k, out_dim);
  nc::DenseNet net = nc::make_net({in_dim, hyper.hidden, hyper.hidden, raw_dim},
                                  {nc::Act::Tanh, nc::Act::Tanh, nc::Act::Identity}, seed);

  const bool aux = hyper.use_aux && hyper.aux_rows.rows > 0;
  nc::MdnLossSpec spec;
  spec.mixture_k = hyper.mixture_k;
  spec.dim = out_dim;
  spec.normalized = true;

  // The raw-space reward rows R are rebased into normalized target space:
  // R * (denorm(mu) + anchor_raw) = (R .* std) * (mu + (mean + anchor_raw) ./ std).
  nc::Matrix rows_n;
  if (aux) {
    rows_n = nc::Matrix(hyper.aux_rows.rows, out_dim);
    for (int j = 0; j < rows_n.rows; ++j)
      for (int i = 0; i < out_dim; ++i) rows_n(j, i) = hyper.aux_rows(j, i) * out_n.std[i];
  }

  auto val_nll = [&](const nc::DenseNet& model) {
    double s = 0.0;
    for (std::size_t i = 0; i < va.inputs.size(); ++i) {
      const Vec x = dataio::normalize(va.inputs[i], in_n);
      const Vec t = dataio::normalize(va.targets[i], out_n);
      s += nc::mdn_nll(nc::parse_mdn_head(nc::forward(model, x), hyper.mixture_k, out_dim), t);
    }
    return s / static_cast<double>(va.inputs.size());
  };

  nc::Rng rng(seed ^ 0xabcdef12345ULL);
  std::vector<std::size_t> order(tr.inputs.size());
  std::iota(order.begin(), order.end(), 0);
  ckpt.val_loss.push_back(val_nll(net));
  for (int e = 0; e < hyper.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Vec x = dataio::normalize(tr.inputs[idx], in_n);
      const Vec t = dataio::normalize(tr.targets[idx], out_n);
      nc::LossKind kind = nc::LossKind::MdnNll;
      if (aux) {
        kind = nc::LossKind::MdnNllAux;
        spec.head.rows = rows_n;
        const Vec& raw_in = tr.inputs[idx];  // action model: input is h_s
        spec.head.anchor.resize(out_dim);
        for (int i = 0; i < out_dim; ++i)
          spec.head.anchor[i] = (out_n.mean[i] + raw_in[i]) / out_n.std[i];
        spec.reward_target.assign(hyper.aux_rows.rows, 0.0);
        for (int j = 0; j < hyper.aux_rows.rows; ++j) {
          double y = 0.0;
          for (int i = 0; i < out_dim; ++i)
            y += hyper.aux_rows(j, i) * (tr.targets[idx][i] + raw_in[i]);
          spec.reward_target[j] = y;
        }
      }
      const nc::GradBundle g = nc::backward(net, kind, x, t, spec);
      if (!std::isfinite(g.loss))
        throw std::runtime_error("training diverged at epoch " + std::to_string(e));
      nc::sgd_step(net, g, hyper.lr, hyper.clip_norm);
    }
    ckpt.val_loss.push_back(val_nll(net));
  }
  ckpt.params = net.flat_params();
  for (const auto& l : net.layers) ckpt.shapes.emplace_back(l.w.rows, l.w.cols);
  return ckpt;
}

namespace {

nc::DenseNet net_from_shapes(const std::vector<std::pair<int, int>>& shapes) {
  std::vector<int> dims;
  std::vector<nc::Act> acts;
  dims.push_back(shapes.front().second);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    dims.push_back(shapes[i].first);
    acts.push_back(i + 1 == shapes.size() ? nc::Act::Identity : nc::Act::Tanh);
  }
  return nc::make_net(dims, acts, 0);
}

}  // namespace

StochasticMap from_checkpoint(const dataio::Checkpoint& ckpt) {
  StochasticMap map;
  map.in_norm = {ckpt.norm_mean, ckpt.norm_std};
  map.out_norm = {ckpt.target_mean, ckpt.target_std};

  if (ckpt.kind == "dense-ensemble") {
    EnsembleModel ens;
    ens.jitter_sigma = ckpt.jitter_sigma;
    nc::DenseNet proto = net_from_shapes(ckpt.shapes);
    const std::size_t per = proto.param_count();
    for (int m = 0; m < ckpt.members; ++m) {
      nc::DenseNet net = proto;
      net.set_flat_params(Vec(ckpt.params.begin() + m * per, ckpt.params.begin() + (m + 1) * per));
      ens.members.push_back(std::move(net));
    }
    map.backend = std::move(ens);
  } else if (ckpt.kind == "mdn") {
    MdnModel mdn;
    mdn.net = net_from_shapes(ckpt.shapes);
    mdn.net.set_flat_params(ckpt.params);
    mdn.mixture_k = ckpt.mixture_k;
    mdn.sample_dim = ckpt.sample_dim;
    map.backend = std::move(mdn);
  } else {
    throw std::invalid_argument("checkpoint kind '" + ckpt.kind + "' is not a transition model");
  }
  return map;
}

StochasticMap stub_map(std::shared_ptr<const world::LatentWorld> w, Submodel which) {
  StochasticMap map;
  map.backend = KernelStub{std::move(w)};
  map.is_action = which == Submodel::Action;
  return map;
}

TransitionModel load_transition_model(const std::string& action_path,
                                      const std::string& next_path) {
  TransitionModel m;
  m.action_model = from_checkpoint(dataio::Checkpoint::load(action_path));
  m.action_model.is_action = true;
  m.next_model = from_checkpoint(dataio::Checkpoint::load(next_path));
  m.next_model.is_action = false;
  return m;
}

DiagnosticsSummary prediction_diagnostics(const StochasticMap& map, Submodel which,
                                          const std::vector<dataio::TransitionRecord>& records) {
  DiagnosticsSummary out;
  out.cos_bins.assign(DiagnosticsSummary::kBins, 0);
  out.ratio_bins.assign(DiagnosticsSummary::kBins, 0);

  for (const auto& r : records) {
    const Vec input = submodel_input(r, which);
    Vec pred = map.mean(input);
    Vec truth;
    if (which == Submodel::Action) {
      truth = diff(r.s_mid, r.s);  // prediction is already a difference
    } else {
      pred = diff(pred, r.s_mid);
      truth = diff(r.s_next, r.s_mid);
    }
    double tn = 0.0, pn = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      tn += truth[i] * truth[i];
      pn += pred[i] * pred[i];
      dot += pred[i] * truth[i];
    }
    tn = std::sqrt(tn);
    pn = std::sqrt(pn);
    if (tn <= 0.0) {
      ++out.skipped;
      continue;
    }
    const double cos = pn > 0.0 ? dot / (pn * tn) : 0.0;
    const double ratio = pn / tn;
    const int cb = std::clamp(static_cast<int>((cos + 1.0) / 2.0 * DiagnosticsSummary::kBins), 0,
                              DiagnosticsSummary::kBins - 1);
    const int rb = std::clamp(static_cast<int>(ratio / 2.0 * DiagnosticsSummary::kBins), 0,
                              DiagnosticsSummary::kBins - 1);
    ++out.cos_bins[cb];
    ++out.ratio_bins[rb];
    out.mean_cos += cos;
    out.mean_ratio += ratio;
    ++out.used;
  }
  if (out.used > 0) {
    out.mean_cos /= static_cast<double>(out.used);
    out.mean_ratio /= static_cast<double>(out.used);
  }
  return out;
}

}  // namespace semplan::transition
