#ifndef MAZERL_NN_HPP_
#define MAZERL_NN_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mazerl/rng.hpp"
#include "mazerl/tensor.hpp"

namespace mazerl {

inline constexpr double kLeakySlope = 0.01;

enum class LayerKind { Conv2D, Dense };
enum class Activation { None, LeakyReLU };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int out = 0;  // output channels (conv) or features (dense)
  int kh = 0, kw = 0;
  int padding = 0;
  int stride = 1;
  Activation activation = Activation::None;

  static LayerSpec conv(int out_channels, int kh, int kw, int padding, int stride,
                        Activation act = Activation::LeakyReLU) {
    return LayerSpec{LayerKind::Conv2D, out_channels, kh, kw, padding, stride, act};
  }
  static LayerSpec dense(int out_features, Activation act = Activation::None) {
    return LayerSpec{LayerKind::Dense, out_features, 0, 0, 0, 1, act};
  }
};

namespace detail {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

template <typename T>
inline void apply_activation(TensorT<T>& pre, TensorT<T>& out, Activation act) {
  out.shape = pre.shape;
  out.data.resize(pre.data.size());
  if (act == Activation::None) {
    out.data = pre.data;
    return;
  }
  const T slope = static_cast<T>(kLeakySlope);
  for (size_t i = 0; i < pre.data.size(); ++i) {
    T v = pre.data[i];
    out.data[i] = v >= T(0) ? v : slope * v;
  }
}

template <typename T>
inline void activation_grad_inplace(const TensorT<T>& pre, TensorT<T>& dy, Activation act) {
  if (act == Activation::None) return;
  const T slope = static_cast<T>(kLeakySlope);
  for (size_t i = 0; i < dy.data.size(); ++i)
    if (pre.data[i] < T(0)) dy.data[i] *= slope;
}

}  // namespace detail

// Orthogonal init (QR of a Gaussian matrix, sign-corrected).
template <typename T>
void orthogonal_init(TensorT<T>& w, int rows, int cols, double gain, Rng& rng) {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  const bool transpose = rows < cols;
  const int r = transpose ? cols : rows;
  const int c = transpose ? rows : cols;
  Mat a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(r, c);
  Mat rmat = qr.matrixQR().topRows(c).template triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j)
    if (rmat(j, j) < 0) q.col(j) = -q.col(j);
  if (transpose) q = q.transpose().eval();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      w.data[static_cast<size_t>(i) * cols + j] = static_cast<T>(gain * q(i, j));
}

template <typename T>
class LayerT {
 public:
  virtual ~LayerT() = default;
  virtual TensorT<T> forward(const TensorT<T>& x) = 0;
  virtual TensorT<T> backward(const TensorT<T>& dy) = 0;
  virtual std::vector<TensorT<T>*> params() = 0;
  virtual std::vector<TensorT<T>*> grads() = 0;
  virtual std::vector<int> output_shape(const std::vector<int>& in) const = 0;
  virtual std::string name() const = 0;

  void zero_grad() {
    for (auto* g : grads()) g->fill(T(0));
  }
};

// Fully connected layer. Inputs of rank > 2 are flattened per sample.
template <typename T>
class DenseLayerT : public LayerT<T> {
 public:
  DenseLayerT(int in_features, int out_features, Activation act, double gain, Rng& rng)
      : in_(in_features), out_(out_features), act_(act) {
    w_ = TensorT<T>({out_, in_});
    b_ = TensorT<T>({out_});
    gw_ = TensorT<T>({out_, in_});
    gb_ = TensorT<T>({out_});
    orthogonal_init(w_, out_, in_, gain, rng);
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    const int n = x.dim(0);
    const int64_t features = x.size() / n;
    if (features != in_) throw std::invalid_argument("dense: input feature mismatch");
    x_ = x;

    pre_ = TensorT<T>({n, out_});
    detail::CMapM<T> xm(x.ptr(), n, in_);
    detail::CMapM<T> wm(w_.ptr(), out_, in_);
    detail::MapM<T> ym(pre_.ptr(), n, out_);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out_; ++j) pre_.data[static_cast<size_t>(i) * out_ + j] += b_.data[j];

    TensorT<T> y;
    detail::apply_activation(pre_, y, act_);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& dy_in) override {
    TensorT<T> dy = dy_in;
    detail::activation_grad_inplace(pre_, dy, act_);
    const int n = x_.dim(0);

    detail::CMapM<T> dym(dy.ptr(), n, out_);
    detail::CMapM<T> xm(x_.ptr(), n, in_);
    detail::MapM<T> gwm(gw_.ptr(), out_, in_);
    gwm.noalias() += dym.transpose() * xm;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out_; ++j) gb_.data[j] += dy.data[static_cast<size_t>(i) * out_ + j];

    TensorT<T> dx(x_.shape);
    detail::CMapM<T> wm(w_.ptr(), out_, in_);
    detail::MapM<T> dxm(dx.ptr(), n, in_);
    dxm.noalias() = dym * wm;
    return dx;
  }

  std::vector<TensorT<T>*> params() override { return {&w_, &b_}; }
  std::vector<TensorT<T>*> grads() override { return {&gw_, &gb_}; }
  std::vector<int> output_shape(const std::vector<int>& in) const override {
    return {in[0], out_};
  }
  std::string name() const override { return "dense" + std::to_string(out_); }

  TensorT<T>& weights() { return w_; }
  TensorT<T>& bias() { return b_; }

 private:
  int in_, out_;
  Activation act_;
  TensorT<T> w_, b_, gw_, gb_;
  TensorT<T> x_, pre_;
};

// 2-D convolution via im2col + GEMM. Input layout [N, C, H, W].
template <typename T>
class Conv2DLayerT : public LayerT<T> {
 public:
  Conv2DLayerT(int in_channels, int out_channels, int kh, int kw, int padding, int stride,
               Activation act, Rng& rng)
      : ic_(in_channels), oc_(out_channels), kh_(kh), kw_(kw), pad_(padding), stride_(stride),
        act_(act) {
    w_ = TensorT<T>({oc_, ic_, kh_, kw_});
    b_ = TensorT<T>({oc_});
    gw_ = TensorT<T>({oc_, ic_, kh_, kw_});
    gb_ = TensorT<T>({oc_});
    // Scaled-uniform fan-in init.
    const int fan_in = ic_ * kh_ * kw_;
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& v : w_.data) v = static_cast<T>((rng.uniform_double() * 2.0 - 1.0) * bound);
  }

  static int out_extent(int in, int k, int pad, int stride) {
    return (in + 2 * pad - k) / stride + 1;
  }

  TensorT<T> forward(const TensorT<T>& x) override {
    if (x.ndim() != 4 || x.dim(1) != ic_) throw std::invalid_argument("conv: input shape mismatch");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_extent(h, kh_, pad_, stride_), ow = out_extent(w, kw_, pad_, stride_);
    if (oh < 1 || ow < 1) throw std::invalid_argument("conv: output extent collapses to zero");
    in_shape_ = x.shape;
    oh_ = oh;
    ow_ = ow;

    const int kk = ic_ * kh_ * kw_;
    cols_ = TensorT<T>({n * oh * ow, kk});
    im2col(x, cols_);

    pre_ = TensorT<T>({n, oc_, oh, ow});
    detail::CMapM<T> cm(cols_.ptr(), n * oh * ow, kk);
    detail::CMapM<T> wm(w_.ptr(), oc_, kk);
    detail::MatRM<T> y = cm * wm.transpose();  // (n*oh*ow) x oc
    for (int i = 0; i < n; ++i)
      for (int e = 0; e < oh * ow; ++e)
        for (int o = 0; o < oc_; ++o)
          pre_.data[(static_cast<size_t>(i) * oc_ + o) * oh * ow + e] =
              y(i * oh * ow + e, o) + b_.data[o];

    TensorT<T> out;
    detail::apply_activation(pre_, out, act_);
    return out;
  }

  TensorT<T> backward(const TensorT<T>& dy_in) override {
    TensorT<T> dy = dy_in;
    detail::activation_grad_inplace(pre_, dy, act_);
    const int n = in_shape_[0];
    const int kk = ic_ * kh_ * kw_;

    // Regroup [N, OC, OH, OW] -> [(N*OH*OW), OC].
    detail::MatRM<T> dym(n * oh_ * ow_, oc_);
    for (int i = 0; i < n; ++i)
      for (int e = 0; e < oh_ * ow_; ++e)
        for (int o = 0; o < oc_; ++o)
          dym(i * oh_ * ow_ + e, o) =
              dy.data[(static_cast<size_t>(i) * oc_ + o) * oh_ * ow_ + e];

    detail::CMapM<T> cm(cols_.ptr(), n * oh_ * ow_, kk);
    detail::MapM<T> gwm(gw_.ptr(), oc_, kk);
    gwm.noalias() += dym.transpose() * cm;
    for (int o = 0; o < oc_; ++o) gb_.data[o] += dym.col(o).sum();

    detail::CMapM<T> wm(w_.ptr(), oc_, kk);
    detail::MatRM<T> dcols = dym * wm;  // (n*oh*ow) x kk
    TensorT<T> dx(in_shape_);
    col2im(dcols, dx);
    return dx;
  }

  std::vector<TensorT<T>*> params() override { return {&w_, &b_}; }
  std::vector<TensorT<T>*> grads() override { return {&gw_, &gb_}; }
  std::vector<int> output_shape(const std::vector<int>& in) const override {
    return {in[0], oc_, out_extent(in[2], kh_, pad_, stride_),
            out_extent(in[3], kw_, pad_, stride_)};
  }
  std::string name() const override { return "conv" + std::to_string(oc_); }

 private:
  void im2col(const TensorT<T>& x, TensorT<T>& cols) const {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    T* out = cols.ptr();
    for (int i = 0; i < n; ++i) {
      const T* xi = x.ptr() + static_cast<size_t>(i) * ic_ * h * w;
      for (int or_ = 0; or_ < oh_; ++or_) {
        for (int oc = 0; oc < ow_; ++oc) {
          const int r0 = or_ * stride_ - pad_, c0 = oc * stride_ - pad_;
          for (int ch = 0; ch < ic_; ++ch) {
            const T* plane = xi + static_cast<size_t>(ch) * h * w;
            for (int kr = 0; kr < kh_; ++kr) {
              const int r = r0 + kr;
              for (int kc = 0; kc < kw_; ++kc) {
                const int c = c0 + kc;
                *out++ = (r >= 0 && r < h && c >= 0 && c < w)
                             ? plane[static_cast<size_t>(r) * w + c]
                             : T(0);
              }
            }
          }
        }
      }
    }
  }

  void col2im(const detail::MatRM<T>& dcols, TensorT<T>& dx) const {
    const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
    int row = 0;
    for (int i = 0; i < n; ++i) {
      T* xi = dx.ptr() + static_cast<size_t>(i) * ic_ * h * w;
      for (int or_ = 0; or_ < oh_; ++or_) {
        for (int oc = 0; oc < ow_; ++oc, ++row) {
          const int r0 = or_ * stride_ - pad_, c0 = oc * stride_ - pad_;
          const T* src = dcols.data() + static_cast<size_t>(row) * ic_ * kh_ * kw_;
          for (int ch = 0; ch < ic_; ++ch) {
            T* plane = xi + static_cast<size_t>(ch) * h * w;
            for (int kr = 0; kr < kh_; ++kr) {
              const int r = r0 + kr;
              for (int kc = 0; kc < kw_; ++kc) {
                const int c = c0 + kc;
                if (r >= 0 && r < h && c >= 0 && c < w)
                  plane[static_cast<size_t>(r) * w + c] += *src;
                ++src;
              }
            }
          }
        }
      }
    }
  }

  int ic_, oc_, kh_, kw_, pad_, stride_;
  Activation act_;
  int oh_ = 0, ow_ = 0;
  std::vector<int> in_shape_;
  TensorT<T> w_, b_, gw_, gb_;
  TensorT<T> cols_, pre_;
};

// Sequential stack built from LayerSpecs. Records whatever backward
// needs during forward; backward without a recorded forward (or twice on
// one recording) throws.
template <typename T>
class NetworkT {
 public:
  NetworkT() = default;

  // input_shape excludes the batch dimension: {C, H, W} or {F}.
  NetworkT(const std::vector<LayerSpec>& specs, std::vector<int> input_shape, uint64_t seed)
      : specs_(specs), input_shape_(std::move(input_shape)), seed_(seed) {
    Rng rng(derive_seed(seed, "net_init"));
    std::vector<int> cur = input_shape_;
    for (const LayerSpec& s : specs) {
      if (s.kind == LayerKind::Conv2D) {
        if (cur.size() != 3) throw std::invalid_argument("conv layer needs a C,H,W input");
        auto layer = std::make_unique<Conv2DLayerT<T>>(cur[0], s.out, s.kh, s.kw, s.padding,
                                                       s.stride, s.activation, rng);
        cur = {s.out, Conv2DLayerT<T>::out_extent(cur[1], s.kh, s.padding, s.stride),
               Conv2DLayerT<T>::out_extent(cur[2], s.kw, s.padding, s.stride)};
        if (cur[1] < 1 || cur[2] < 1)
          throw std::invalid_argument("conv stack collapses below 1x1 for this input size");
        layers_.push_back(std::move(layer));
      } else {
        int in_features = 1;
        for (int d : cur) in_features *= d;
        const double gain = s.activation == Activation::LeakyReLU ? std::sqrt(2.0) : 1.0;
        layers_.push_back(std::make_unique<DenseLayerT<T>>(in_features, s.out, s.activation,
                                                           gain, rng));
        cur = {s.out};
      }
    }
    output_shape_ = cur;
  }

  TensorT<T> forward(const TensorT<T>& input) {
    TensorT<T> x = input;
    for (auto& layer : layers_) x = layer->forward(x);
    recorded_ = true;
    return x;
  }

  TensorT<T> backward(const TensorT<T>& doutput) {
    if (!recorded_) throw std::logic_error("backward without a recorded forward");
    recorded_ = false;
    TensorT<T> g = doutput;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<TensorT<T>*> params() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }
  std::vector<TensorT<T>*> grads() {
    std::vector<TensorT<T>*> out;
    for (auto& l : layers_)
      for (auto* g : l->grads()) out.push_back(g);
    return out;
  }
  void zero_grad() {
    for (auto& l : layers_) l->zero_grad();
  }

  const std::vector<LayerSpec>& specs() const { return specs_; }
  const std::vector<int>& input_shape() const { return input_shape_; }
  const std::vector<int>& output_shape() const { return output_shape_; }
  uint64_t seed() const { return seed_; }
  size_t num_layers() const { return layers_.size(); }
  LayerT<T>& layer(size_t i) { return *layers_[i]; }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<int> input_shape_;
  std::vector<int> output_shape_;
  uint64_t seed_ = 0;
  std::vector<std::unique_ptr<LayerT<T>>> layers_;
  bool recorded_ = false;
};

using Network = NetworkT<float>;

// Adam with bias correction. Moment buffers mirror parameter shapes.
template <typename T>
class AdamT {
 public:
  AdamT() = default;
  AdamT(const std::vector<TensorT<T>*>& params, double lr, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params) {
      m_.emplace_back(p->shape);
      v_.emplace_back(p->shape);
    }
  }

  void step(const std::vector<TensorT<T>*>& params, const std::vector<TensorT<T>*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("adam: parameter list mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i]->data;
      auto& g = grads[i]->data;
      auto& m = m_[i].data;
      auto& v = v_[i].data;
      if (p.size() != g.size() || p.size() != m.size())
        throw std::invalid_argument("adam: shape mismatch");
      for (size_t j = 0; j < p.size(); ++j) {
        const double gj = static_cast<double>(g[j]);
        const double mj = beta1_ * static_cast<double>(m[j]) + (1.0 - beta1_) * gj;
        const double vj = beta2_ * static_cast<double>(v[j]) + (1.0 - beta2_) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double mhat = mj / bc1;
        const double vhat = vj / bc2;
        p[j] = static_cast<T>(static_cast<double>(p[j]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  int64_t step_count() const { return t_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  std::vector<TensorT<T>>& first_moments() { return m_; }
  std::vector<TensorT<T>>& second_moments() { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
  std::vector<TensorT<T>> m_, v_;
};

using Adam = AdamT<float>;

}  // namespace mazerl

#endif  // MAZERL_NN_HPP_
