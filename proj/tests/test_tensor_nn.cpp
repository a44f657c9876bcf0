#include <doctest.h>

#include <cmath>

#include "mazerl/checkpoint.hpp"
#include "mazerl/nn.hpp"

using namespace mazerl;

namespace {

// Finite-difference oracle: loss = sum(c .* output) for fixed random
// coefficients, gradients checked against central differences.
template <typename T>
struct FdCheck {
  NetworkT<T>& net;
  TensorT<T> input;
  std::vector<T> coeffs;

  FdCheck(NetworkT<T>& n, TensorT<T> in, uint64_t coeff_seed) : net(n), input(std::move(in)) {
    TensorT<T> out = net.forward(input);
    Rng rng(coeff_seed);
    coeffs.resize(out.data.size());
    for (auto& c : coeffs) c = static_cast<T>(rng.uniform_double() * 2.0 - 1.0);
  }

  double loss() {
    TensorT<T> out = net.forward(input);
    double l = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i)
      l += static_cast<double>(coeffs[i]) * static_cast<double>(out.data[i]);
    return l;
  }

  // Max relative error between analytic and FD gradients over a stride
  // of parameter elements.
  double max_rel_err(double h, size_t max_checks = 200) {
    net.zero_grad();
    TensorT<T> out = net.forward(input);
    TensorT<T> dy(out.shape);
    for (size_t i = 0; i < dy.data.size(); ++i) dy.data[i] = coeffs[i];
    net.backward(dy);

    std::vector<TensorT<T>*> params = net.params();
    std::vector<std::vector<T>> analytic;
    for (auto* g : net.grads()) analytic.push_back(g->data);

    // Scale floor: float32 FD noise makes per-element relative error
    // meaningless for near-zero gradients, so errors are measured
    // against the net's typical gradient magnitude as well.
    double sq_sum = 0.0;
    size_t count = 0;
    for (const auto& g : analytic) {
      for (T v : g) sq_sum += static_cast<double>(v) * static_cast<double>(v);
      count += g.size();
    }
    const double grad_rms = std::sqrt(sq_sum / std::max<size_t>(1, count));

    size_t total = 0;
    for (auto* p : params) total += p->data.size();
    const size_t stride = std::max<size_t>(1, total / max_checks);

    double worst = 0.0;
    size_t flat = 0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
      for (size_t j = 0; j < params[pi]->data.size(); ++j, ++flat) {
        if (flat % stride != 0) continue;
        T& x = params[pi]->data[j];
        const T orig = x;
        x = static_cast<T>(static_cast<double>(orig) + h);
        const double fp = loss();
        x = static_cast<T>(static_cast<double>(orig) - h);
        const double fm = loss();
        x = orig;
        const double fd = (fp - fm) / (2.0 * h);
        const double an = static_cast<double>(analytic[pi][j]);
        const double denom = std::max({std::fabs(fd), std::fabs(an), grad_rms, 1e-6});
        worst = std::max(worst, std::fabs(fd - an) / denom);
      }
    }
    return worst;
  }
};

}  // namespace

TEST_CASE("dense with zero weights and bias outputs zero") {
  NetworkT<double> net({LayerSpec::dense(1)}, {5}, 1);
  for (auto* p : net.params()) p->fill(0.0);
  TensorT<double> x({2, 5});
  for (auto& v : x.data) v = 3.7;
  auto y = net.forward(x);
  CHECK(y.data[0] == 0.0);
  CHECK(y.data[1] == 0.0);
}

TEST_CASE("conv output extent: 16ch k5 pad0 stride2 on 25x25 gives 11x11") {
  NetworkT<float> net({LayerSpec::conv(16, 5, 5, 0, 2)}, {3, 25, 25}, 2);
  Tensor x({1, 3, 25, 25});
  auto y = net.forward(x);
  CHECK(y.shape == std::vector<int>{1, 16, 11, 11});
}

TEST_CASE("leaky relu slope 0.01") {
  NetworkT<double> net({LayerSpec::dense(1, Activation::LeakyReLU)}, {1}, 3);
  auto params = net.params();
  params[0]->data[0] = 1.0;  // identity weight
  params[1]->data[0] = 0.0;
  TensorT<double> x({1, 1});
  x.data[0] = -1.0;
  CHECK(net.forward(x).data[0] == doctest::Approx(-0.01));
  x.data[0] = 2.0;
  CHECK(net.forward(x).data[0] == doctest::Approx(2.0));
}

TEST_CASE("backward: unit upstream gradient with unit inputs gives all-ones param grads") {
  NetworkT<double> net({LayerSpec::dense(2)}, {3}, 4);
  TensorT<double> x({1, 3});
  x.fill(1.0);
  net.zero_grad();
  auto y = net.forward(x);
  TensorT<double> dy(y.shape);
  dy.fill(1.0);
  net.backward(dy);
  for (auto* g : net.grads())
    for (double v : g->data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("backward: zero upstream gradient gives zero param grads") {
  NetworkT<double> net({LayerSpec::conv(4, 3, 3, 1, 1), LayerSpec::dense(3)}, {2, 5, 5}, 5);
  TensorT<double> x({2, 2, 5, 5});
  Rng rng(6);
  for (auto& v : x.data) v = rng.normal();
  net.zero_grad();
  auto y = net.forward(x);
  net.backward(TensorT<double>(y.shape));
  for (auto* g : net.grads())
    for (double v : g->data) CHECK(v == 0.0);
}

TEST_CASE("backward twice on one recording violates the contract") {
  NetworkT<double> net({LayerSpec::dense(2)}, {3}, 7);
  TensorT<double> x({1, 3});
  auto y = net.forward(x);
  net.backward(TensorT<double>(y.shape));
  CHECK_THROWS_AS(net.backward(TensorT<double>(y.shape)), std::logic_error);
}

TEST_CASE("forward rejects shape mismatch") {
  NetworkT<float> net({LayerSpec::conv(4, 3, 3, 1, 1)}, {2, 5, 5}, 8);
  Tensor bad({1, 3, 5, 5});
  CHECK_THROWS_AS(net.forward(bad), std::invalid_argument);
}

TEST_CASE("gradient check: dense layer (64-bit)") {
  NetworkT<double> net({LayerSpec::dense(4, Activation::LeakyReLU), LayerSpec::dense(2)}, {6}, 11);
  TensorT<double> x({3, 6});
  Rng rng(12);
  for (auto& v : x.data) v = rng.normal();
  FdCheck<double> check(net, x, 13);
  CHECK(check.max_rel_err(1e-5) < 1e-6);
}

TEST_CASE("gradient check: conv layer with padding and stride (64-bit)") {
  NetworkT<double> net({LayerSpec::conv(3, 3, 3, 1, 2, Activation::LeakyReLU)}, {2, 7, 7}, 14);
  TensorT<double> x({2, 2, 7, 7});
  Rng rng(15);
  for (auto& v : x.data) v = rng.normal();
  FdCheck<double> check(net, x, 16);
  CHECK(check.max_rel_err(1e-5) < 1e-6);
}

TEST_CASE("gradient check: conv stack mirroring the reward-net layout, reduced channels") {
  std::vector<LayerSpec> specs = {
      LayerSpec::conv(2, 5, 5, 0, 2), LayerSpec::conv(2, 3, 3, 1, 1),
      LayerSpec::conv(2, 5, 5, 0, 2), LayerSpec::conv(2, 3, 3, 1, 1),
      LayerSpec::conv(2, 3, 3, 0, 1), LayerSpec::conv(2, 3, 3, 1, 1),
      LayerSpec::conv(2, 3, 3, 0, 1), LayerSpec::conv(2, 3, 3, 1, 1),
      LayerSpec::dense(8, Activation::LeakyReLU), LayerSpec::dense(1)};
  for (size_t i = 0; i + 2 < specs.size(); ++i) specs[i].activation = Activation::LeakyReLU;
  NetworkT<double> net(specs, {8, 29, 29}, 17);
  TensorT<double> x({1, 8, 29, 29});
  Rng rng(18);
  for (auto& v : x.data) v = rng.normal();
  FdCheck<double> check(net, x, 19);
  CHECK(check.max_rel_err(1e-5, 60) < 1e-6);
}

TEST_CASE("gradient check: 32-bit mode under the loose tolerance") {
  NetworkT<float> net({LayerSpec::conv(3, 3, 3, 1, 1, Activation::LeakyReLU), LayerSpec::dense(2)},
                      {2, 5, 5}, 20);
  Tensor x({2, 2, 5, 5});
  Rng rng(21);
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  FdCheck<float> check(net, x, 22);
  CHECK(check.max_rel_err(1e-3, 100) < 1e-3);
}

TEST_CASE("forward determinism: same weights and input give identical bits") {
  NetworkT<float> net({LayerSpec::conv(8, 3, 3, 1, 2, Activation::LeakyReLU), LayerSpec::dense(5)},
                      {4, 9, 9}, 23);
  Tensor x({3, 4, 9, 9});
  Rng rng(24);
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  auto y1 = net.forward(x);
  auto y2 = net.forward(x);
  CHECK(y1.data == y2.data);

  NetworkT<float> net2({LayerSpec::conv(8, 3, 3, 1, 2, Activation::LeakyReLU), LayerSpec::dense(5)},
                       {4, 9, 9}, 23);
  auto y3 = net2.forward(x);
  CHECK(y1.data == y3.data);
}

TEST_CASE("no NaN or Inf in activations and gradients on finite inputs") {
  NetworkT<float> net({LayerSpec::conv(8, 5, 5, 0, 2, Activation::LeakyReLU),
                       LayerSpec::dense(16, Activation::LeakyReLU), LayerSpec::dense(1)},
                      {4, 13, 13}, 25);
  Rng rng(26);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x({4, 4, 13, 13});
    for (auto& v : x.data) v = static_cast<float>(rng.normal() * 10.0);
    net.zero_grad();
    auto y = net.forward(x);
    for (float v : y.data) CHECK(std::isfinite(v));
    Tensor dy(y.shape);
    for (auto& v : dy.data) v = static_cast<float>(rng.normal());
    net.backward(dy);
    for (auto* g : net.grads())
      for (float v : g->data) CHECK(std::isfinite(v));
  }
}

TEST_CASE("orthogonal init produces orthonormal rows") {
  Rng rng(27);
  TensorT<double> w({4, 16});
  orthogonal_init(w, 4, 16, 1.0, rng);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 16; ++k) dot += w.data[i * 16 + k] * w.data[j * 16 + k];
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  NetworkT<double> net({LayerSpec::dense(3)}, {2}, 28);
  auto params = net.params();
  std::vector<double> before;
  for (auto* p : params) before.insert(before.end(), p->data.begin(), p->data.end());
  AdamT<double> adam(params, 1e-3);
  net.zero_grad();
  adam.step(params, net.grads());
  std::vector<double> after;
  for (auto* p : params) after.insert(after.end(), p->data.begin(), p->data.end());
  CHECK(before == after);
}

TEST_CASE("adam: first bias-corrected step moves by about the learning rate") {
  TensorT<double> p({1});
  TensorT<double> g({1});
  g.data[0] = 1.0;
  AdamT<double> adam({&p}, 1e-5);
  adam.step({&p}, {&g});
  CHECK(p.data[0] == doctest::Approx(-1e-5).epsilon(1e-3));
}

TEST_CASE("adam: constant gradient drives update magnitude toward the learning rate") {
  TensorT<double> p({1});
  TensorT<double> g({1});
  g.data[0] = 3.0;
  AdamT<double> adam({&p}, 1e-3);
  double prev = p.data[0];
  for (int i = 0; i < 5000; ++i) {
    adam.step({&p}, {&g});
    prev = p.data[0];
  }
  double before = p.data[0];
  adam.step({&p}, {&g});
  CHECK(std::fabs(p.data[0] - before) == doctest::Approx(1e-3).epsilon(0.01));
  (void)prev;
}

TEST_CASE("checkpoint round-trips network weights and adam state") {
  NetworkT<float> net({LayerSpec::conv(4, 3, 3, 1, 1, Activation::LeakyReLU), LayerSpec::dense(2)},
                      {2, 5, 5}, 29);
  Adam adam(net.params(), 1e-4);
  Tensor x({1, 2, 5, 5});
  Rng rng(30);
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  for (int i = 0; i < 3; ++i) {
    net.zero_grad();
    auto y = net.forward(x);
    Tensor dy(y.shape);
    dy.fill(1.0f);
    net.backward(dy);
    adam.step(net.params(), net.grads());
  }

  Checkpoint ckpt;
  add_network(ckpt, "net", net);
  add_adam(ckpt, "opt", adam);
  ckpt.meta["note"] = "roundtrip";
  const std::string path = "ckpt_roundtrip_test.bin";
  ckpt.save(path);

  Checkpoint loaded = Checkpoint::load(path);
  NetworkT<float> net2(layer_specs_from_json(loaded.meta["net"]["specs"]),
                       loaded.meta["net"]["input_shape"].get<std::vector<int>>(),
                       loaded.meta["net"]["seed"].get<uint64_t>());
  load_network(loaded, "net", net2);
  Adam adam2(net2.params(), 1e-4);
  load_adam(loaded, "opt", adam2);

  auto y1 = net.forward(x);
  auto y2 = net2.forward(x);
  CHECK(y1.data == y2.data);
  CHECK(adam2.step_count() == adam.step_count());
  CHECK(loaded.meta["note"] == "roundtrip");
  std::remove(path.c_str());
}
