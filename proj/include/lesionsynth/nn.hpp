#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lesionsynth/tensor.hpp"

namespace lesionsynth::nn {

using Rng = std::mt19937_64;

struct Parameter {
  std::string name;
  Tensorf value;
  Tensorf grad;
  Tensorf adam_m;
  Tensorf adam_v;

  explicit Parameter(std::string n, std::vector<int> shape)
      : name(std::move(n)),
        value(shape),
        grad(shape),
        adam_m(shape),
        adam_v(shape) {}

  void zero_grad() { grad.array().setZero(); }
};

enum class PadMode { kZero, kReflect };

// ---------------------------------------------------------------------------
// Functional building blocks (NCHW, float). Each backward routine
// accumulates into the gradient outputs it is given.

Tensorf pad2d(const Tensorf& x, int pad, PadMode mode);
Tensorf unpad2d_grad(const Tensorf& gxp, int pad, PadMode mode);

Tensorf conv2d(const Tensorf& xpad, const Tensorf& w, const Tensorf& b, int stride);
void conv2d_backward(const Tensorf& xpad, const Tensorf& w, const Tensorf& gy, int stride,
                     Tensorf* gxpad, Tensorf* gw, Tensorf* gb);

// ---------------------------------------------------------------------------

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensorf forward(const Tensorf& x) = 0;
  virtual Tensorf backward(const Tensorf& gy) = 0;
  virtual void collect(std::vector<Parameter*>& out) {}
};

using LayerPtr = std::unique_ptr<Layer>;

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
         PadMode pad_mode, Rng& rng, float init_std = 0.02f);
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;
  void collect(std::vector<Parameter*>& out) override;

  Parameter weight;
  Parameter bias;

 private:
  int stride_, pad_;
  PadMode pad_mode_;
  Tensorf xpad_;
};

// Stride-s transposed convolution; output = (H-1)*s - 2*pad + k + out_pad.
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
                  int out_pad, Rng& rng, float init_std = 0.02f);
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;
  void collect(std::vector<Parameter*>& out) override;

  Parameter weight;  // (in_ch, out_ch, k, k)
  Parameter bias;

 private:
  int kernel_, stride_, pad_, out_pad_;
  Tensorf x_;
};

class InstanceNorm : public Layer {
 public:
  InstanceNorm(std::string name, int channels, float eps = 1e-5f);
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;
  void collect(std::vector<Parameter*>& out) override;

  Parameter gamma;
  Parameter beta;

 private:
  float eps_;
  Tensorf xhat_;
  Tensorf inv_std_;  // (N, C)
};

class ReLU : public Layer {
 public:
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;

 private:
  Tensorf y_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(float slope = 0.2f) : slope_(slope) {}
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;

 private:
  float slope_;
  Tensorf x_;
};

class Tanh : public Layer {
 public:
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;

 private:
  Tensorf y_;
};

// 3x3 stride-2 average pool with reflect padding; halves even dims.
class AvgPool3x3 : public Layer {
 public:
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;

 private:
  std::vector<int> in_shape_;
};

class AvgPool2x2 : public Layer {
 public:
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;

 private:
  std::vector<int> in_shape_;
};

class Upsample2xNearest : public Layer {
 public:
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;

 private:
  std::vector<int> in_shape_;
};

class Linear : public Layer {
 public:
  Linear(std::string name, int in_dim, int out_dim, Rng& rng, float init_std = 0.02f);
  Tensorf forward(const Tensorf& x) override;  // x: (N, in_dim)
  Tensorf backward(const Tensorf& gy) override;
  void collect(std::vector<Parameter*>& out) override;

  Parameter weight;  // (out_dim, in_dim)
  Parameter bias;

 private:
  Tensorf x_;
};

// Appends one plane holding the batch-wide mean feature stddev.
class MinibatchStddev : public Layer {
 public:
  explicit MinibatchStddev(float eps = 1e-8f) : eps_(eps) {}
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;

 private:
  float eps_;
  Tensorf x_;
  Tensorf mean_;  // per (c,h,w)
  Tensorf std_;   // per (c,h,w)
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  void add(LayerPtr layer) { layers_.push_back(std::move(layer)); }
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;
  void collect(std::vector<Parameter*>& out) override;
  size_t size() const { return layers_.size(); }
  Layer& at(size_t i) { return *layers_[i]; }

 private:
  std::vector<LayerPtr> layers_;
};

// y = x + block(x); the block must preserve shape.
class ResidualWrap : public Layer {
 public:
  explicit ResidualWrap(LayerPtr block) : block_(std::move(block)) {}
  Tensorf forward(const Tensorf& x) override;
  Tensorf backward(const Tensorf& gy) override;
  void collect(std::vector<Parameter*>& out) override { block_->collect(out); }

 private:
  LayerPtr block_;
};

class Adam {
 public:
  Adam(float lr, float beta1, float beta2, float eps = 1e-8f)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void attach(const std::vector<Parameter*>& params) { params_ = params; }
  void zero_grad();
  void step();

  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }
  int64_t steps() const { return t_; }
  void set_steps(int64_t t) { t_ = t; }

 private:
  float lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Parameter*> params_;
};

// Fills a tensor with N(0, std) draws.
void gaussian_init(Tensorf& t, Rng& rng, float std);

}  // namespace lesionsynth::nn
