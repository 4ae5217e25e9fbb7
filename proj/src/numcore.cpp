#include "semplan/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace semplan::numcore {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

void check_shapes(const DenseNet& net, const Vec& x) {
  if (net.layers.empty()) throw std::invalid_argument("net has no layers");
  if (static_cast<int>(x.size()) != net.input_dim())
    throw std::invalid_argument("input length " + std::to_string(x.size()) +
                                " does not match net input dim " +
                                std::to_string(net.input_dim()));
}

double logsumexp(const Vec& a) {
  double m = a[0];
  for (double v : a) m = std::max(m, v);
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Act act_from_string(const std::string& s) {
  if (s == "identity") return Act::Identity;
  if (s == "tanh") return Act::Tanh;
  if (s == "relu") return Act::Relu;
  if (s == "softmax") return Act::Softmax;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string act_to_string(Act a) {
  switch (a) {
    case Act::Identity: return "identity";
    case Act::Tanh: return "tanh";
    case Act::Relu: return "relu";
    case Act::Softmax: return "softmax";
  }
  throw std::invalid_argument("bad activation tag");
}

int DenseNet::input_dim() const {
  return layers.empty() ? 0 : layers.front().w.cols;
}

int DenseNet::output_dim() const {
  return layers.empty() ? 0 : layers.back().w.rows;
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.data.size() + l.b.size();
  return n;
}

Vec DenseNet::flat_params() const {
  Vec out;
  out.reserve(param_count());
  for (const auto& l : layers) {
    out.insert(out.end(), l.w.data.begin(), l.w.data.end());
    out.insert(out.end(), l.b.begin(), l.b.end());
  }
  return out;
}

void DenseNet::set_flat_params(const Vec& flat) {
  if (flat.size() != param_count())
    throw std::invalid_argument("flat parameter count " + std::to_string(flat.size()) +
                                " does not match net with " + std::to_string(param_count()));
  std::size_t pos = 0;
  for (auto& l : layers) {
    std::copy_n(flat.begin() + pos, l.w.data.size(), l.w.data.begin());
    pos += l.w.data.size();
    std::copy_n(flat.begin() + pos, l.b.size(), l.b.begin());
    pos += l.b.size();
  }
}

DenseNet make_net(const std::vector<int>& dims, const std::vector<Act>& acts,
                  std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("need at least input and output dims");
  if (acts.size() != dims.size() - 1)
    throw std::invalid_argument("need one activation per layer");
  for (std::size_t i = 0; i + 1 < acts.size(); ++i)
    if (acts[i] == Act::Softmax)
      throw std::invalid_argument("softmax is only allowed as the final activation");

  Rng rng(seed);
  DenseNet net;
  net.layers.resize(dims.size() - 1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer& l = net.layers[i];
    const int fan_in = dims[i];
    const int fan_out = dims[i + 1];
    l.w = Matrix(fan_out, fan_in);
    l.b.assign(fan_out, 0.0);
    l.act = acts[i];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : l.w.data) v = u(rng);
  }
  return net;
}

Vec softmax(const Vec& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  Vec out(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

namespace {

Vec apply_act(const Vec& z, Act act) {
  switch (act) {
    case Act::Identity: return z;
    case Act::Tanh: {
      Vec out(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
      return out;
    }
    case Act::Relu: {
      Vec out(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
      return out;
    }
    case Act::Softmax: return softmax(z);
  }
  throw std::invalid_argument("bad activation tag");
}

struct ForwardTrace {
  std::vector<Vec> pre;   // z per layer
  std::vector<Vec> post;  // a per layer
};

Vec forward_traced(const DenseNet& net, const Vec& x, ForwardTrace* trace) {
  check_shapes(net, x);
  Vec a = x;
  for (const auto& l : net.layers) {
    Vec z(l.w.rows);
    for (int r = 0; r < l.w.rows; ++r) {
      double s = l.b[r];
      const double* wr = l.w.data.data() + static_cast<std::size_t>(r) * l.w.cols;
      for (int c = 0; c < l.w.cols; ++c) s += wr[c] * a[c];
      z[r] = s;
    }
    Vec post = apply_act(z, l.act);
    if (trace) {
      trace->pre.push_back(std::move(z));
      trace->post.push_back(post);
    }
    a = std::move(post);
  }
  return a;
}

}  // namespace

Vec forward(const DenseNet& net, const Vec& x) {
  return forward_traced(net, x, nullptr);
}

int mdn_raw_dim(int mixture_k, int dim) { return mixture_k * (1 + 2 * dim); }

MdnHead parse_mdn_head(const Vec& raw, int mixture_k, int dim) {
  if (mixture_k < 1 || dim < 1) throw std::invalid_argument("mixture_k and dim must be >= 1");
  if (static_cast<int>(raw.size()) != mdn_raw_dim(mixture_k, dim))
    throw std::invalid_argument("raw head size " + std::to_string(raw.size()) +
                                " does not match K=" + std::to_string(mixture_k) +
                                " dim=" + std::to_string(dim));
  if (!all_finite(raw)) throw std::invalid_argument("non-finite mixture head values");

  MdnHead head;
  head.mixture_k = mixture_k;
  head.dim = dim;
  head.phi = softmax(Vec(raw.begin(), raw.begin() + mixture_k));
  head.mu.resize(mixture_k);
  head.sigma.resize(mixture_k);
  for (int k = 0; k < mixture_k; ++k) {
    head.mu[k].assign(raw.begin() + mixture_k + k * dim,
                      raw.begin() + mixture_k + (k + 1) * dim);
    head.sigma[k].resize(dim);
    for (int i = 0; i < dim; ++i) {
      const double t = raw[mixture_k + mixture_k * dim + k * dim + i];
      head.sigma[k][i] = std::exp(std::clamp(t, kLogSigmaMin, kLogSigmaMax));
    }
  }
  return head;
}

double gaussian_logpdf_diag(const Vec& x, const Vec& mu, const Vec& sigma, bool normalized) {
  if (x.size() != mu.size() || x.size() != sigma.size())
    throw std::invalid_argument("gaussian_logpdf_diag: shape mismatch");
  double quad = 0.0;
  double logdet = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw std::invalid_argument("sigma entries must be positive");
    const double d = (x[i] - mu[i]) / sigma[i];
    quad += d * d;
    logdet += 2.0 * std::log(sigma[i]);
  }
  double lp = -0.5 * quad - 0.5 * logdet;
  if (normalized) lp -= kHalfLog2Pi * static_cast<double>(x.size());
  return lp;
}

namespace {

// Per-component log score of the auxiliary reward factor plus the floored
// variances, reused by loss and gradient paths.
struct AuxTerms {
  Vec log_q;                      // per component
  std::vector<Vec> mu_harm;       // per component, reward dim
  std::vector<Vec> var_harm;      // per component, reward dim (floored)
  std::vector<std::vector<bool>> floored;
};

AuxTerms aux_terms(const MdnHead& head, const Vec& reward_target, const RewardHead& rh,
                   bool normalized) {
  const int p = rh.rows.rows;
  if (rh.rows.cols != head.dim)
    throw std::invalid_argument("reward head column count does not match head dim");
  if (static_cast<int>(rh.anchor.size()) != head.dim)
    throw std::invalid_argument("reward head anchor does not match head dim");
  if (static_cast<int>(reward_target.size()) != p)
    throw std::invalid_argument("reward target does not match reward head rows");

  AuxTerms out;
  out.log_q.resize(head.mixture_k);
  out.mu_harm.resize(head.mixture_k);
  out.var_harm.resize(head.mixture_k);
  out.floored.resize(head.mixture_k);
  for (int k = 0; k < head.mixture_k; ++k) {
    Vec mh(p, 0.0), vh(p, 0.0);
    std::vector<bool> fl(p, false);
    for (int j = 0; j < p; ++j) {
      double m = 0.0, v = 0.0;
      for (int i = 0; i < head.dim; ++i) {
        const double r = rh.rows(j, i);
        m += r * (head.mu[k][i] + rh.anchor[i]);
        v += r * r * head.sigma[k][i] * head.sigma[k][i];
      }
      mh[j] = m;
      if (v < kRewardVarFloor) {
        v = kRewardVarFloor;
        fl[j] = true;
      }
      vh[j] = v;
    }
    double lq = 0.0;
    for (int j = 0; j < p; ++j) {
      const double d = reward_target[j] - mh[j];
      lq += -0.5 * d * d / vh[j] - 0.5 * std::log(vh[j]);
    }
    if (normalized) lq -= kHalfLog2Pi * static_cast<double>(p);
    out.log_q[k] = lq;
    out.mu_harm[k] = std::move(mh);
    out.var_harm[k] = std::move(vh);
    out.floored[k] = std::move(fl);
  }
  return out;
}

double mixture_nll(const MdnHead& head, const Vec& target, bool normalized,
                   const AuxTerms* aux, Vec* resp_out) {
  if (static_cast<int>(target.size()) != head.dim)
    throw std::invalid_argument("mdn target does not match head dim");
  Vec a(head.mixture_k);
  for (int k = 0; k < head.mixture_k; ++k) {
    a[k] = std::log(head.phi[k]) +
           gaussian_logpdf_diag(target, head.mu[k], head.sigma[k], normalized);
    if (aux) a[k] += aux->log_q[k];
  }
  const double lse = logsumexp(a);
  if (resp_out) {
    resp_out->resize(head.mixture_k);
    for (int k = 0; k < head.mixture_k; ++k) (*resp_out)[k] = std::exp(a[k] - lse);
  }
  return -lse;
}

}  // namespace

double mdn_nll(const MdnHead& head, const Vec& target, bool normalized) {
  return mixture_nll(head, target, normalized, nullptr, nullptr);
}

double mdn_nll_aux(const MdnHead& head, const Vec& target, const Vec& reward_target,
                   const RewardHead& rh, bool normalized) {
  const AuxTerms aux = aux_terms(head, reward_target, rh, normalized);
  return mixture_nll(head, target, normalized, &aux, nullptr);
}

namespace {

double mse_sum(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size())
    throw std::invalid_argument("mse: target length " + std::to_string(target.size()) +
                                " does not match output " + std::to_string(pred.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  return s;
}

void require_mdn_spec(const DenseNet& net, const MdnLossSpec& spec) {
  if (spec.mixture_k < 1 || spec.dim < 1)
    throw std::invalid_argument("mdn loss requires mixture_k and dim in the loss spec");
  if (net.layers.back().act != Act::Identity)
    throw std::invalid_argument("mdn head requires an identity final activation");
  if (net.output_dim() != mdn_raw_dim(spec.mixture_k, spec.dim))
    throw std::invalid_argument("net output dim does not match mdn head layout");
}

// dL/d(raw head output) for the mixture losses. raw is the identity-activated
// final layer output; gradients through clamp/floor are zero where active.
Vec mdn_head_grad(const Vec& raw, const Vec& target, const MdnLossSpec& spec, double* loss_out) {
  const MdnHead head = parse_mdn_head(raw, spec.mixture_k, spec.dim);
  const bool use_aux = spec.head.rows.rows > 0;
  AuxTerms aux;
  if (use_aux) aux = aux_terms(head, spec.reward_target, spec.head, spec.normalized);

  Vec resp;
  *loss_out = mixture_nll(head, target, spec.normalized, use_aux ? &aux : nullptr, &resp);

  const int K = spec.mixture_k;
  const int n = spec.dim;
  Vec g(raw.size(), 0.0);
  for (int k = 0; k < K; ++k) {
    g[k] = head.phi[k] - resp[k];  // logits
    for (int i = 0; i < n; ++i) {
      const double sig2 = head.sigma[k][i] * head.sigma[k][i];
      const double diff = target[i] - head.mu[k][i];
      double dmu = diff / sig2;
      double dt = diff * diff / sig2 - 1.0;
      const double raw_t = raw[K + K * n + k * n + i];
      const bool clamped = raw_t < kLogSigmaMin || raw_t > kLogSigmaMax;
      if (use_aux) {
        for (int j = 0; j < spec.head.rows.rows; ++j) {
          const double r = spec.head.rows(j, i);
          const double d = spec.reward_target[j] - aux.mu_harm[k][j];
          const double v = aux.var_harm[k][j];
          dmu += d / v * r;
          if (!aux.floored[k][j]) dt += r * r * sig2 * (d * d / (v * v) - 1.0 / v);
        }
      }
      g[K + k * n + i] = -resp[k] * dmu;
      g[K + K * n + k * n + i] = clamped ? 0.0 : -resp[k] * dt;
    }
  }
  return g;
}

}  // namespace

double loss_value(const DenseNet& net, LossKind loss, const Vec& x, const Vec& target,
                  const MdnLossSpec& spec) {
  const Vec y = forward(net, x);
  switch (loss) {
    case LossKind::Mse:
      return mse_sum(y, target);
    case LossKind::MdnNll: {
      require_mdn_spec(net, spec);
      return mdn_nll(parse_mdn_head(y, spec.mixture_k, spec.dim), target, spec.normalized);
    }
    case LossKind::MdnNllAux: {
      require_mdn_spec(net, spec);
      return mdn_nll_aux(parse_mdn_head(y, spec.mixture_k, spec.dim), target,
                         spec.reward_target, spec.head, spec.normalized);
    }
  }
  throw std::invalid_argument("unknown loss tag");
}

GradBundle backward(const DenseNet& net, LossKind loss, const Vec& x, const Vec& target,
                    const MdnLossSpec& spec) {
  ForwardTrace trace;
  const Vec y = forward_traced(net, x, &trace);

  GradBundle out;
  out.dw.reserve(net.layers.size());
  out.db.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    out.dw.emplace_back(l.w.rows, l.w.cols);
    out.db.emplace_back(l.b.size(), 0.0);
  }

  // Gradient w.r.t. the final layer pre-activation.
  const int last = static_cast<int>(net.layers.size()) - 1;
  Vec dz;
  switch (loss) {
    case LossKind::Mse: {
      out.loss = mse_sum(y, target);
      Vec dy(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) dy[i] = 2.0 * (y[i] - target[i]);
      const Act act = net.layers[last].act;
      if (act == Act::Softmax) {
        double dot = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) dot += dy[i] * y[i];
        dz.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) dz[i] = y[i] * (dy[i] - dot);
      } else if (act == Act::Tanh) {
        dz.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) dz[i] = dy[i] * (1.0 - y[i] * y[i]);
      } else if (act == Act::Relu) {
        dz.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
          dz[i] = trace.pre[last][i] > 0.0 ? dy[i] : 0.0;
      } else {
        dz = std::move(dy);
      }
      break;
    }
    case LossKind::MdnNll:
    case LossKind::MdnNllAux: {
      require_mdn_spec(net, spec);
      MdnLossSpec s = spec;
      if (loss == LossKind::MdnNll) s.head = RewardHead{};  // no aux factor
      dz = mdn_head_grad(y, target, s, &out.loss);
      break;
    }
    default:
      throw std::invalid_argument("unknown loss tag");
  }

  // Standard backprop through the remaining layers.
  for (int li = last; li >= 0; --li) {
    const Layer& l = net.layers[li];
    const Vec& a_prev = li == 0 ? x : trace.post[li - 1];
    if (li != last) {
      // dz currently holds dL/da for this layer; push through the activation.
      const Vec& a = trace.post[li];
      if (l.act == Act::Tanh) {
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= 1.0 - a[i] * a[i];
      } else if (l.act == Act::Relu) {
        for (std::size_t i = 0; i < dz.size(); ++i)
          if (trace.pre[li][i] <= 0.0) dz[i] = 0.0;
      }
    }
    for (int r = 0; r < l.w.rows; ++r) {
      out.db[li][r] = dz[r];
      double* gw = out.dw[li].data.data() + static_cast<std::size_t>(r) * l.w.cols;
      for (int c = 0; c < l.w.cols; ++c) gw[c] = dz[r] * a_prev[c];
    }
    if (li > 0) {
      Vec da(l.w.cols, 0.0);
      for (int r = 0; r < l.w.rows; ++r) {
        const double* wr = l.w.data.data() + static_cast<std::size_t>(r) * l.w.cols;
        for (int c = 0; c < l.w.cols; ++c) da[c] += wr[c] * dz[r];
      }
      dz = std::move(da);
    }
  }
  return out;
}

void sgd_step(DenseNet& net, const GradBundle& grads, double lr, double clip_norm) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (grads.dw.size() != net.layers.size())
    throw std::invalid_argument("gradient bundle does not match net layout");

  double sq = 0.0;
  for (std::size_t li = 0; li < grads.dw.size(); ++li) {
    for (double g : grads.dw[li].data) {
      if (!std::isfinite(g)) throw std::runtime_error("training aborted: non-finite gradient");
      sq += g * g;
    }
    for (double g : grads.db[li]) {
      if (!std::isfinite(g)) throw std::runtime_error("training aborted: non-finite gradient");
      sq += g * g;
    }
  }
  double scale = 1.0;
  if (clip_norm > 0.0) {
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) scale = clip_norm / norm;
  }
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    Layer& l = net.layers[li];
    for (std::size_t i = 0; i < l.w.data.size(); ++i)
      l.w.data[i] -= lr * scale * grads.dw[li].data[i];
    for (std::size_t i = 0; i < l.b.size(); ++i) l.b[i] -= lr * scale * grads.db[li][i];
  }
}

}  // namespace semplan::numcore
