#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "semplan/numcore.hpp"

using namespace semplan::numcore;

namespace {

DenseNet single_layer(const std::vector<std::vector<double>>& w, const Vec& b, Act act) {
  DenseNet net;
  Layer l;
  l.w = Matrix(static_cast<int>(w.size()), static_cast<int>(w[0].size()));
  for (int r = 0; r < l.w.rows; ++r)
    for (int c = 0; c < l.w.cols; ++c) l.w(r, c) = w[r][c];
  l.b = b;
  l.act = act;
  net.layers.push_back(std::move(l));
  return net;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

Vec flatten_grads(const GradBundle& g) {
  Vec out;
  for (std::size_t i = 0; i < g.dw.size(); ++i) {
    out.insert(out.end(), g.dw[i].data.begin(), g.dw[i].data.end());
    out.insert(out.end(), g.db[i].begin(), g.db[i].end());
  }
  return out;
}

// Central finite differences against the analytic gradient; returns the
// worst relative error over all parameters.
double max_fd_error(DenseNet net, LossKind kind, const Vec& x, const Vec& t,
                    const MdnLossSpec& spec = {}) {
  const double eps = 1e-5;
  const Vec analytic = flatten_grads(backward(net, kind, x, t, spec));
  Vec flat = net.flat_params();
  double worst = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + eps;
    net.set_flat_params(flat);
    const double lp = loss_value(net, kind, x, t, spec);
    flat[i] = keep - eps;
    net.set_flat_params(flat);
    const double lm = loss_value(net, kind, x, t, spec);
    flat[i] = keep;
    worst = std::max(worst, rel_err(analytic[i], (lp - lm) / (2.0 * eps)));
  }
  net.set_flat_params(flat);
  return worst;
}

}  // namespace

TEST_CASE("forward: identity layer") {
  auto net = single_layer({{1, 0}, {0, 1}}, {0, 0}, Act::Identity);
  CHECK(forward(net, {1, 2}) == Vec{1, 2});
}

TEST_CASE("forward: row sum") {
  auto net = single_layer({{1, 1}}, {0}, Act::Identity);
  CHECK(forward(net, {1, 2})[0] == doctest::Approx(3.0));
}

TEST_CASE("forward: two-layer tanh matches a scalar recomputation") {
  DenseNet net = make_net({2, 3, 2}, {Act::Tanh, Act::Tanh}, 0);
  // Nonzero biases so the composition is not trivially zero at x = 0.
  net.layers[0].b = {0.1, -0.2, 0.3};
  net.layers[1].b = {0.05, -0.15};
  const Vec x{0.0, 0.0};
  const Vec got = forward(net, x);

  // Independent desk evaluation straight from the extracted parameters.
  Vec h(3);
  for (int r = 0; r < 3; ++r) {
    double z = net.layers[0].b[r];
    for (int c = 0; c < 2; ++c) z += net.layers[0].w(r, c) * x[c];
    h[r] = std::tanh(z);
  }
  for (int r = 0; r < 2; ++r) {
    double z = net.layers[1].b[r];
    for (int c = 0; c < 3; ++c) z += net.layers[1].w(r, c) * h[c];
    CHECK(got[r] == doctest::Approx(std::tanh(z)).epsilon(1e-12));
  }
}

TEST_CASE("forward is deterministic") {
  DenseNet net = make_net({3, 8, 2}, {Act::Tanh, Act::Identity}, 7);
  const Vec x{0.3, -1.2, 0.9};
  CHECK(forward(net, x) == forward(net, x));
}

TEST_CASE("forward: shape mismatch rejected") {
  auto net = single_layer({{1, 1}}, {0}, Act::Identity);
  CHECK_THROWS_AS(forward(net, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("softmax final layer sums to one") {
  DenseNet net = make_net({3, 5, 4}, {Act::Tanh, Act::Softmax}, 3);
  const Vec y = forward(net, {0.5, -2.0, 1.5});
  double sum = 0.0;
  for (double v : y) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("softmax only legal as final activation") {
  CHECK_THROWS_AS(make_net({2, 3, 2}, {Act::Softmax, Act::Identity}, 0),
                  std::invalid_argument);
}

TEST_CASE("backward: hand-derived single-parameter case") {
  // d/dw (w*x + b - t)^2 at w=1, b=0, x=1, t=0: loss 1, dW = dB = 2.
  auto net = single_layer({{1}}, {0}, Act::Identity);
  const GradBundle g = backward(net, LossKind::Mse, {1}, {0});
  CHECK(g.loss == doctest::Approx(1.0));
  CHECK(g.dw[0](0, 0) == doctest::Approx(2.0));
  CHECK(g.db[0][0] == doctest::Approx(2.0));
}

TEST_CASE("backward: zero loss and zero gradients at the minimum") {
  DenseNet net = make_net({2, 4, 3}, {Act::Tanh, Act::Identity}, 11);
  const Vec x{0.4, -0.7};
  const Vec t = forward(net, x);
  const GradBundle g = backward(net, LossKind::Mse, x, t);
  CHECK(g.loss == doctest::Approx(0.0));
  for (double v : flatten_grads(g)) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("backward: shape mismatch rejected") {
  auto net = single_layer({{1, 1}}, {0}, Act::Identity);
  CHECK_THROWS_AS(backward(net, LossKind::Mse, {1, 2}, {1, 2}), std::invalid_argument);
}

TEST_CASE("finite differences: mse on random tanh nets") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int probe = 0; probe < 20; ++probe) {
    DenseNet net = make_net({3, 6, 2}, {Act::Tanh, Act::Identity}, 100 + probe);
    Vec x{g(rng), g(rng), g(rng)};
    Vec t{g(rng), g(rng)};
    CHECK(max_fd_error(net, LossKind::Mse, x, t) < 1e-4);
  }
}

TEST_CASE("finite differences: mse through a softmax head") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int probe = 0; probe < 10; ++probe) {
    DenseNet net = make_net({2, 5, 3}, {Act::Tanh, Act::Softmax}, 200 + probe);
    Vec x{g(rng), g(rng)};
    Vec t{0.2, 0.5, 0.3};
    CHECK(max_fd_error(net, LossKind::Mse, x, t) < 1e-4);
  }
}

TEST_CASE("finite differences: relu away from the kink") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  int done = 0;
  for (int attempt = 0; attempt < 200 && done < 10; ++attempt) {
    DenseNet net = make_net({2, 6, 2}, {Act::Relu, Act::Identity}, 300 + attempt);
    Vec x{g(rng), g(rng)};
    // Skip probes with a pre-activation near zero; the kink breaks the
    // central-difference estimate there.
    bool safe = true;
    for (int r = 0; r < 6; ++r) {
      double z = net.layers[0].b[r];
      for (int c = 0; c < 2; ++c) z += net.layers[0].w(r, c) * x[c];
      if (std::abs(z) < 0.05) safe = false;
    }
    if (!safe) continue;
    Vec t{g(rng), g(rng)};
    CHECK(max_fd_error(net, LossKind::Mse, x, t) < 1e-4);
    ++done;
  }
  CHECK(done == 10);
}

TEST_CASE("finite differences: mixture losses") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  const int K = 2, dim = 2;
  for (int probe = 0; probe < 15; ++probe) {
    DenseNet net =
        make_net({2, 4, mdn_raw_dim(K, dim)}, {Act::Tanh, Act::Identity}, 400 + probe);
    Vec x{g(rng), g(rng)};
    Vec t{g(rng), g(rng)};

    MdnLossSpec spec;
    spec.mixture_k = K;
    spec.dim = dim;
    CHECK(max_fd_error(net, LossKind::MdnNll, x, t, spec) < 1e-4);

    spec.head.rows = Matrix(1, dim);
    spec.head.rows(0, 0) = 0.8 + 0.2 * g(rng);
    spec.head.rows(0, 1) = -0.5 + 0.2 * g(rng);
    spec.head.anchor = {g(rng), g(rng)};
    spec.reward_target = {g(rng)};
    CHECK(max_fd_error(net, LossKind::MdnNllAux, x, t, spec) < 1e-4);
  }
}

TEST_CASE("sgd_step: one arithmetic step") {
  auto net = single_layer({{1}}, {0}, Act::Identity);
  GradBundle g;
  g.dw = {Matrix(1, 1)};
  g.dw[0](0, 0) = 2.0;
  g.db = {Vec{0.0}};
  sgd_step(net, g, 0.1);
  CHECK(net.layers[0].w(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("sgd_step: zero gradients leave the net unchanged") {
  DenseNet net = make_net({2, 3, 1}, {Act::Tanh, Act::Identity}, 2);
  const Vec before = net.flat_params();
  GradBundle g;
  for (const auto& l : net.layers) {
    g.dw.emplace_back(l.w.rows, l.w.cols);
    g.db.emplace_back(l.b.size(), 0.0);
  }
  sgd_step(net, g, 0.5);
  CHECK(net.flat_params() == before);
}

TEST_CASE("sgd_step: non-finite gradients abort") {
  auto net = single_layer({{1}}, {0}, Act::Identity);
  GradBundle g;
  g.dw = {Matrix(1, 1)};
  g.dw[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  g.db = {Vec{0.0}};
  CHECK_THROWS_AS(sgd_step(net, g, 0.1), std::runtime_error);
}

TEST_CASE("sgd_step: converges to the minimizer of a convex quadratic") {
  auto net = single_layer({{0.0}}, {0.0}, Act::Identity);
  for (int i = 0; i < 300; ++i) {
    const GradBundle g = backward(net, LossKind::Mse, {1.0}, {3.0});
    sgd_step(net, g, 0.1);
  }
  CHECK(std::abs(forward(net, {1.0})[0] - 3.0) < 1e-6);
}

TEST_CASE("gaussian_logpdf_diag: closed-form values") {
  // Normalized, x = mu, sigma = 1, n = 1: -(1/2) log(2 pi).
  CHECK(gaussian_logpdf_diag({0.0}, {0.0}, {1.0}, true) ==
        doctest::Approx(-0.9189385332).epsilon(1e-9));
  // With the constant dropped, the log-density at the mean is 0.
  CHECK(gaussian_logpdf_diag({0.0}, {0.0}, {1.0}, false) == doctest::Approx(0.0));
  // Quadratic term only: x - mu = 1, sigma = 1.
  CHECK(gaussian_logpdf_diag({1.0}, {0.0}, {1.0}, false) == doctest::Approx(-0.5));
}

TEST_CASE("gaussian_logpdf_diag: rejects non-positive sigma") {
  CHECK_THROWS_AS(gaussian_logpdf_diag({0.0}, {0.0}, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_logpdf_diag({0.0}, {0.0}, {-1.0}), std::invalid_argument);
}

TEST_CASE("gaussian_logpdf_diag: maximized at the mean") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> sig(0.2, 2.0);
  for (int probe = 0; probe < 50; ++probe) {
    Vec mu{g(rng), g(rng), g(rng)};
    Vec sigma{sig(rng), sig(rng), sig(rng)};
    const double at_mu = gaussian_logpdf_diag(mu, mu, sigma);
    Vec x = mu;
    for (double& v : x) v += 0.3 * g(rng);
    CHECK(gaussian_logpdf_diag(x, mu, sigma) <= at_mu + 1e-12);
  }
}

TEST_CASE("flat parameter round trip") {
  DenseNet net = make_net({4, 7, 3}, {Act::Tanh, Act::Identity}, 13);
  DenseNet other = make_net({4, 7, 3}, {Act::Tanh, Act::Identity}, 14);
  other.set_flat_params(net.flat_params());
  CHECK(other.flat_params() == net.flat_params());
  CHECK_THROWS_AS(other.set_flat_params(Vec{1.0, 2.0}), std::invalid_argument);
}
