#ifndef MAZERL_POLICY_HPP_
#define MAZERL_POLICY_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "mazerl/maze_env.hpp"
#include "mazerl/nn.hpp"
#include "mazerl/tensor.hpp"

namespace mazerl {

// Desk-scale actor-critic trunk: three strided conv layers and a dense
// layer, shared by an action-logit head and a state-value head.
struct PolicyArch {
  int conv1 = 16;
  int conv2 = 32;
  int conv3 = 32;
  int dense = 256;
};

template <typename T>
struct PolicyOutputT {
  TensorT<T> logits;  // [N, kNumActions]
  TensorT<T> values;  // [N]
};

template <typename T>
class PolicyNetT {
 public:
  PolicyNetT(int canvas, uint64_t seed, PolicyArch arch = {})
      : canvas_(canvas), seed_(seed), arch_(arch) {
    std::vector<LayerSpec> trunk_specs = {
        LayerSpec::conv(arch.conv1, 3, 3, 1, 2, Activation::LeakyReLU),
        LayerSpec::conv(arch.conv2, 3, 3, 1, 2, Activation::LeakyReLU),
        LayerSpec::conv(arch.conv3, 3, 3, 1, 2, Activation::LeakyReLU),
        LayerSpec::dense(arch.dense, Activation::LeakyReLU)};
    trunk_ = NetworkT<T>(trunk_specs, {kObsPlanes, canvas, canvas}, derive_seed(seed, "trunk"));
    Rng head_rng(derive_seed(seed, "heads"));
    // Small-gain logit head keeps the initial policy near uniform.
    logit_head_ = std::make_unique<DenseLayerT<T>>(arch.dense, kNumActions, Activation::None,
                                                   0.01, head_rng);
    value_head_ = std::make_unique<DenseLayerT<T>>(arch.dense, 1, Activation::None, 1.0,
                                                   head_rng);
  }

  PolicyOutputT<T> forward(const TensorT<T>& obs) {
    TensorT<T> feat = trunk_.forward(obs);
    PolicyOutputT<T> out;
    out.logits = logit_head_->forward(feat);
    TensorT<T> v = value_head_->forward(feat);
    out.values = TensorT<T>({v.dim(0)}, std::move(v.data));
    return out;
  }

  void backward(const TensorT<T>& dlogits, const TensorT<T>& dvalues) {
    TensorT<T> dv({dvalues.dim(0), 1}, dvalues.data);
    TensorT<T> dfeat = logit_head_->backward(dlogits);
    TensorT<T> dfeat_v = value_head_->backward(dv);
    for (size_t i = 0; i < dfeat.data.size(); ++i) dfeat.data[i] += dfeat_v.data[i];
    trunk_.backward(dfeat);
  }

  std::vector<TensorT<T>*> params() {
    auto out = trunk_.params();
    for (auto* p : logit_head_->params()) out.push_back(p);
    for (auto* p : value_head_->params()) out.push_back(p);
    return out;
  }
  std::vector<TensorT<T>*> grads() {
    auto out = trunk_.grads();
    for (auto* g : logit_head_->grads()) out.push_back(g);
    for (auto* g : value_head_->grads()) out.push_back(g);
    return out;
  }
  void zero_grad() {
    trunk_.zero_grad();
    logit_head_->zero_grad();
    value_head_->zero_grad();
  }

  int canvas() const { return canvas_; }
  uint64_t seed() const { return seed_; }
  const PolicyArch& arch() const { return arch_; }

  std::vector<std::vector<T>> weight_snapshot() {
    std::vector<std::vector<T>> out;
    for (auto* p : params()) out.push_back(p->data);
    return out;
  }
  void load_weight_snapshot(const std::vector<std::vector<T>>& snap) {
    auto ps = params();
    if (snap.size() != ps.size()) throw std::invalid_argument("policy snapshot mismatch");
    for (size_t i = 0; i < ps.size(); ++i) ps[i]->data = snap[i];
  }

 private:
  int canvas_;
  uint64_t seed_;
  PolicyArch arch_;
  NetworkT<T> trunk_;
  std::unique_ptr<DenseLayerT<T>> logit_head_;
  std::unique_ptr<DenseLayerT<T>> value_head_;
};

using PolicyNet = PolicyNetT<float>;
using PolicyOutput = PolicyOutputT<float>;

// Row-wise stable log-softmax over kNumActions entries.
template <typename T>
inline void log_softmax4(const T* logits, double* out) {
  double mx = static_cast<double>(logits[0]);
  for (int k = 1; k < kNumActions; ++k) mx = std::max(mx, static_cast<double>(logits[k]));
  double sum = 0.0;
  for (int k = 0; k < kNumActions; ++k) sum += std::exp(static_cast<double>(logits[k]) - mx);
  const double lse = mx + std::log(sum);
  for (int k = 0; k < kNumActions; ++k) out[k] = static_cast<double>(logits[k]) - lse;
}

// Inverse-CDF categorical sample in the fixed action order
// Up, Down, Left, Right from a dedicated sampling stream.
template <typename T>
inline Action sample_action4(const T* logits, Rng& rng) {
  double logp[kNumActions];
  log_softmax4(logits, logp);
  const double u = rng.uniform_double();
  double acc = 0.0;
  for (int k = 0; k < kNumActions; ++k) {
    acc += std::exp(logp[k]);
    if (u < acc) return static_cast<Action>(k);
  }
  return Action::Right;
}

inline double entropy4(const double* logp) {
  double h = 0.0;
  for (int k = 0; k < kNumActions; ++k) h -= std::exp(logp[k]) * logp[k];
  return h;
}

// Copies an observation into row n of a [N, planes, canvas, canvas] batch.
template <typename T>
inline void write_obs_row(TensorT<T>& batch, int n, const Observation& obs) {
  const size_t stride = obs.planes.size();
  for (size_t i = 0; i < stride; ++i)
    batch.data[static_cast<size_t>(n) * stride + i] = static_cast<T>(obs.planes[i]);
}

}  // namespace mazerl

#endif  // MAZERL_POLICY_HPP_
