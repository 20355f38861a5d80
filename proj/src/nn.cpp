#include "lesionsynth/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace lesionsynth::nn {

namespace {

using MatXf = Eigen::MatrixXf;
using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void check4d(const Tensorf& x, const char* who) {
  if (x.ndim() != 4) throw std::invalid_argument(std::string(who) + ": expected NCHW tensor");
}

int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

int conv_out(int in, int k, int stride) { return (in - k) / stride + 1; }

// (Cin*k*k, Ho*Wo) column matrix for one batch item.
void im2col(const float* x, int c_in, int h, int w, int k, int stride, MatXf& m) {
  const int ho = conv_out(h, k, stride);
  const int wo = conv_out(w, k, stride);
  m.resize(c_in * k * k, ho * wo);
  for (int c = 0; c < c_in; ++c) {
    const float* xc = x + static_cast<int64_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int row = (c * k + ky) * k + kx;
        for (int oy = 0; oy < ho; ++oy) {
          const float* src = xc + (oy * stride + ky) * w + kx;
          float* dst = m.data() + static_cast<int64_t>(oy) * wo * m.rows() + row;
          for (int ox = 0; ox < wo; ++ox) dst[static_cast<int64_t>(ox) * m.rows()] = src[ox * stride];
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
void col2im(const MatXf& m, int c_in, int h, int w, int k, int stride, float* x) {
  const int ho = conv_out(h, k, stride);
  const int wo = conv_out(w, k, stride);
  for (int c = 0; c < c_in; ++c) {
    float* xc = x + static_cast<int64_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int row = (c * k + ky) * k + kx;
        for (int oy = 0; oy < ho; ++oy) {
          float* dst = xc + (oy * stride + ky) * w + kx;
          const float* src = m.data() + static_cast<int64_t>(oy) * wo * m.rows() + row;
          for (int ox = 0; ox < wo; ++ox) dst[ox * stride] += src[static_cast<int64_t>(ox) * m.rows()];
        }
      }
    }
  }
}

}  // namespace

void gaussian_init(Tensorf& t, Rng& rng, float std) {
  std::normal_distribution<float> d(0.0f, std);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = d(rng);
}

Tensorf pad2d(const Tensorf& x, int pad, PadMode mode) {
  check4d(x, "pad2d");
  if (pad == 0) return x;
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (mode == PadMode::kReflect && (pad >= h || pad >= w))
    throw std::invalid_argument("pad2d: reflect pad must be smaller than the input");
  Tensorf out({n, c, h + 2 * pad, w + 2 * pad});
  for (int i = 0; i < n; ++i) {
    for (int cc = 0; cc < c; ++cc) {
      for (int y = 0; y < h + 2 * pad; ++y) {
        for (int xx = 0; xx < w + 2 * pad; ++xx) {
          int sy = y - pad, sx = xx - pad;
          if (mode == PadMode::kReflect) {
            out.at4(i, cc, y, xx) = x.at4(i, cc, reflect_index(sy, h), reflect_index(sx, w));
          } else if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
            out.at4(i, cc, y, xx) = x.at4(i, cc, sy, sx);
          }
        }
      }
    }
  }
  return out;
}

Tensorf unpad2d_grad(const Tensorf& gxp, int pad, PadMode mode) {
  check4d(gxp, "unpad2d_grad");
  if (pad == 0) return gxp;
  const int n = gxp.dim(0), c = gxp.dim(1);
  const int h = gxp.dim(2) - 2 * pad, w = gxp.dim(3) - 2 * pad;
  Tensorf out({n, c, h, w});
  for (int i = 0; i < n; ++i) {
    for (int cc = 0; cc < c; ++cc) {
      for (int y = 0; y < h + 2 * pad; ++y) {
        for (int xx = 0; xx < w + 2 * pad; ++xx) {
          int sy = y - pad, sx = xx - pad;
          if (mode == PadMode::kReflect) {
            out.at4(i, cc, reflect_index(sy, h), reflect_index(sx, w)) += gxp.at4(i, cc, y, xx);
          } else if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
            out.at4(i, cc, sy, sx) += gxp.at4(i, cc, y, xx);
          }
        }
      }
    }
  }
  return out;
}

Tensorf conv2d(const Tensorf& xpad, const Tensorf& w, const Tensorf& b, int stride) {
  check4d(xpad, "conv2d");
  const int n = xpad.dim(0), cin = xpad.dim(1), h = xpad.dim(2), ww = xpad.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin) throw std::invalid_argument("conv2d: channel mismatch");
  const int ho = conv_out(h, k, stride), wo = conv_out(ww, k, stride);
  if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d: input smaller than kernel");

  Tensorf y({n, cout, ho, wo});
  ConstRowMap wmat(w.data(), cout, cin * k * k);
  MatXf cols;
  for (int i = 0; i < n; ++i) {
    im2col(xpad.data() + static_cast<int64_t>(i) * cin * h * ww, cin, h, ww, k, stride, cols);
    RowMap ymat(y.data() + static_cast<int64_t>(i) * cout * ho * wo, cout, ho * wo);
    ymat.noalias() = wmat * cols;
    for (int co = 0; co < cout; ++co) ymat.row(co).array() += b[co];
  }
  return y;
}

void conv2d_backward(const Tensorf& xpad, const Tensorf& w, const Tensorf& gy, int stride,
                     Tensorf* gxpad, Tensorf* gw, Tensorf* gb) {
  const int n = xpad.dim(0), cin = xpad.dim(1), h = xpad.dim(2), ww = xpad.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  const int ho = gy.dim(2), wo = gy.dim(3);

  ConstRowMap wmat(w.data(), cout, cin * k * k);
  MatXf cols, gcols;
  for (int i = 0; i < n; ++i) {
    ConstRowMap gymat(gy.data() + static_cast<int64_t>(i) * cout * ho * wo, cout, ho * wo);
    if (gw) {
      im2col(xpad.data() + static_cast<int64_t>(i) * cin * h * ww, cin, h, ww, k, stride, cols);
      RowMap gwmat(gw->data(), cout, cin * k * k);
      gwmat.noalias() += gymat * cols.transpose();
    }
    if (gb)
      for (int co = 0; co < cout; ++co) (*gb)[co] += gymat.row(co).sum();
    if (gxpad) {
      gcols.noalias() = wmat.transpose() * gymat;
      col2im(gcols, cin, h, ww, k, stride,
             gxpad->data() + static_cast<int64_t>(i) * cin * h * ww);
    }
  }
}

// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
               PadMode pad_mode, Rng& rng, float init_std)
    : weight(name + ".weight", {out_ch, in_ch, kernel, kernel}),
      bias(name + ".bias", {out_ch}),
      stride_(stride),
      pad_(pad),
      pad_mode_(pad_mode) {
  gaussian_init(weight.value, rng, init_std);
}

Tensorf Conv2d::forward(const Tensorf& x) {
  xpad_ = pad2d(x, pad_, pad_mode_);
  return conv2d(xpad_, weight.value, bias.value, stride_);
}

Tensorf Conv2d::backward(const Tensorf& gy) {
  Tensorf gxpad(xpad_.shape());
  conv2d_backward(xpad_, weight.value, gy, stride_, &gxpad, &weight.grad, &bias.grad);
  return unpad2d_grad(gxpad, pad_, pad_mode_);
}

void Conv2d::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---------------------------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(std::string name, int in_ch, int out_ch, int kernel,
                                 int stride, int pad, int out_pad, Rng& rng, float init_std)
    : weight(name + ".weight", {in_ch, out_ch, kernel, kernel}),
      bias(name + ".bias", {out_ch}),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      out_pad_(out_pad) {
  gaussian_init(weight.value, rng, init_std);
}

Tensorf ConvTranspose2d::forward(const Tensorf& x) {
  check4d(x, "conv_transpose2d");
  x_ = x;
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int cout = weight.value.dim(1), k = kernel_;
  if (weight.value.dim(0) != cin) throw std::invalid_argument("conv_transpose2d: channel mismatch");
  const int hb = (h - 1) * stride_ + k, wb = (w - 1) * stride_ + k;
  const int ho = hb - 2 * pad_ + out_pad_, wo = wb - 2 * pad_ + out_pad_;

  Tensorf y({n, cout, ho, wo});
  ConstRowMap wmat(weight.value.data(), cin, cout * k * k);
  Tensorf buf({1, cout, hb, wb});
  MatXf gcols;
  for (int i = 0; i < n; ++i) {
    ConstRowMap xmat(x.data() + static_cast<int64_t>(i) * cin * h * w, cin, h * w);
    gcols.noalias() = wmat.transpose() * xmat;
    buf.array().setZero();
    col2im(gcols, cout, hb, wb, k, stride_, buf.data());
    for (int c = 0; c < cout; ++c)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          float v = (oy + pad_ < hb && ox + pad_ < wb) ? buf.at4(0, c, oy + pad_, ox + pad_) : 0.0f;
          y.at4(i, c, oy, ox) = v + bias.value[c];
        }
  }
  return y;
}

Tensorf ConvTranspose2d::backward(const Tensorf& gy) {
  const int n = x_.dim(0), cin = x_.dim(1), h = x_.dim(2), w = x_.dim(3);
  const int cout = weight.value.dim(1), k = kernel_;
  const int hb = (h - 1) * stride_ + k, wb = (w - 1) * stride_ + k;
  const int ho = gy.dim(2), wo = gy.dim(3);

  ConstRowMap wmat(weight.value.data(), cin, cout * k * k);
  RowMap gwmat(weight.grad.data(), cin, cout * k * k);
  Tensorf gx({n, cin, h, w});
  Tensorf gbuf({1, cout, hb, wb});
  MatXf cols;
  for (int i = 0; i < n; ++i) {
    gbuf.array().setZero();
    for (int c = 0; c < cout; ++c) {
      float acc = 0.0f;
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          float g = gy.at4(i, c, oy, ox);
          acc += g;
          if (oy + pad_ < hb && ox + pad_ < wb) gbuf.at4(0, c, oy + pad_, ox + pad_) = g;
        }
      bias.grad[c] += acc;
    }
    im2col(gbuf.data(), cout, hb, wb, k, stride_, cols);
    RowMap gxmat(gx.data() + static_cast<int64_t>(i) * cin * h * w, cin, h * w);
    gxmat.noalias() = wmat * cols;
    ConstRowMap xmat(x_.data() + static_cast<int64_t>(i) * cin * h * w, cin, h * w);
    gwmat.noalias() += xmat * cols.transpose();
  }
  return gx;
}

void ConvTranspose2d::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---------------------------------------------------------------------------

InstanceNorm::InstanceNorm(std::string name, int channels, float eps)
    : gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}), eps_(eps) {
  gamma.value.array().setOnes();
}

Tensorf InstanceNorm::forward(const Tensorf& x) {
  check4d(x, "instance_norm");
  const int n = x.dim(0), c = x.dim(1);
  const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  xhat_ = Tensorf(x.shape());
  inv_std_ = Tensorf({n, c});
  Tensorf y(x.shape());
  for (int i = 0; i < n; ++i) {
    for (int cc = 0; cc < c; ++cc) {
      const int64_t off = (static_cast<int64_t>(i) * c + cc) * hw;
      Eigen::Map<const Eigen::ArrayXf> xs(x.data() + off, hw);
      float mu = xs.mean();
      float var = (xs - mu).square().mean();
      float is = 1.0f / std::sqrt(var + eps_);
      inv_std_[static_cast<int64_t>(i) * c + cc] = is;
      Eigen::Map<Eigen::ArrayXf> xh(xhat_.data() + off, hw);
      xh = (xs - mu) * is;
      Eigen::Map<Eigen::ArrayXf> ys(y.data() + off, hw);
      ys = xh * gamma.value[cc] + beta.value[cc];
    }
  }
  return y;
}

Tensorf InstanceNorm::backward(const Tensorf& gy) {
  const int n = gy.dim(0), c = gy.dim(1);
  const int64_t hw = static_cast<int64_t>(gy.dim(2)) * gy.dim(3);
  Tensorf gx(gy.shape());
  for (int i = 0; i < n; ++i) {
    for (int cc = 0; cc < c; ++cc) {
      const int64_t off = (static_cast<int64_t>(i) * c + cc) * hw;
      Eigen::Map<const Eigen::ArrayXf> g(gy.data() + off, hw);
      Eigen::Map<const Eigen::ArrayXf> xh(xhat_.data() + off, hw);
      gamma.grad[cc] += (g * xh).sum();
      beta.grad[cc] += g.sum();
      float is = inv_std_[static_cast<int64_t>(i) * c + cc];
      float gmean = g.mean();
      float gxmean = (g * xh).mean();
      Eigen::Map<Eigen::ArrayXf> gxs(gx.data() + off, hw);
      gxs = gamma.value[cc] * is * (g - gmean - xh * gxmean);
    }
  }
  return gx;
}

void InstanceNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

// ---------------------------------------------------------------------------

Tensorf ReLU::forward(const Tensorf& x) {
  y_ = Tensorf(x.shape(), x.array().max(0.0f));
  return y_;
}

Tensorf ReLU::backward(const Tensorf& gy) {
  return Tensorf(gy.shape(), gy.array() * (y_.array() > 0.0f).cast<float>());
}

Tensorf LeakyReLU::forward(const Tensorf& x) {
  x_ = x;
  return Tensorf(x.shape(), (x.array() > 0.0f).select(x.array(), x.array() * slope_));
}

Tensorf LeakyReLU::backward(const Tensorf& gy) {
  return Tensorf(gy.shape(),
                 (x_.array() > 0.0f).select(gy.array(), gy.array() * slope_));
}

Tensorf Tanh::forward(const Tensorf& x) {
  y_ = Tensorf(x.shape(), x.array().tanh());
  return y_;
}

Tensorf Tanh::backward(const Tensorf& gy) {
  return Tensorf(gy.shape(), gy.array() * (1.0f - y_.array().square()));
}

// ---------------------------------------------------------------------------

Tensorf AvgPool3x3::forward(const Tensorf& x) {
  check4d(x, "avg_pool3x3");
  in_shape_ = x.shape();
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = (h + 1) / 2, wo = (w + 1) / 2;
  Tensorf y({n, c, ho, wo});
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          float s = 0;
          for (int ky = -1; ky <= 1; ++ky)
            for (int kx = -1; kx <= 1; ++kx)
              s += x.at4(i, cc, reflect_index(oy * 2 + ky, h), reflect_index(ox * 2 + kx, w));
          y.at4(i, cc, oy, ox) = s / 9.0f;
        }
  return y;
}

Tensorf AvgPool3x3::backward(const Tensorf& gy) {
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  const int ho = gy.dim(2), wo = gy.dim(3);
  Tensorf gx(in_shape_);
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          float g = gy.at4(i, cc, oy, ox) / 9.0f;
          for (int ky = -1; ky <= 1; ++ky)
            for (int kx = -1; kx <= 1; ++kx)
              gx.at4(i, cc, reflect_index(oy * 2 + ky, h), reflect_index(ox * 2 + kx, w)) += g;
        }
  return gx;
}

Tensorf AvgPool2x2::forward(const Tensorf& x) {
  check4d(x, "avg_pool2x2");
  if (x.dim(2) % 2 || x.dim(3) % 2)
    throw std::invalid_argument("avg_pool2x2: dims must be even");
  in_shape_ = x.shape();
  const int n = x.dim(0), c = x.dim(1), ho = x.dim(2) / 2, wo = x.dim(3) / 2;
  Tensorf y({n, c, ho, wo});
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
          y.at4(i, cc, oy, ox) =
              0.25f * (x.at4(i, cc, 2 * oy, 2 * ox) + x.at4(i, cc, 2 * oy, 2 * ox + 1) +
                       x.at4(i, cc, 2 * oy + 1, 2 * ox) + x.at4(i, cc, 2 * oy + 1, 2 * ox + 1));
  return y;
}

Tensorf AvgPool2x2::backward(const Tensorf& gy) {
  const int n = in_shape_[0], c = in_shape_[1];
  const int ho = gy.dim(2), wo = gy.dim(3);
  Tensorf gx(in_shape_);
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          float g = 0.25f * gy.at4(i, cc, oy, ox);
          gx.at4(i, cc, 2 * oy, 2 * ox) += g;
          gx.at4(i, cc, 2 * oy, 2 * ox + 1) += g;
          gx.at4(i, cc, 2 * oy + 1, 2 * ox) += g;
          gx.at4(i, cc, 2 * oy + 1, 2 * ox + 1) += g;
        }
  return gx;
}

Tensorf Upsample2xNearest::forward(const Tensorf& x) {
  check4d(x, "upsample2x");
  in_shape_ = x.shape();
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensorf y({n, c, 2 * h, 2 * w});
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx)
          y.at4(i, cc, yy, xx) = x.at4(i, cc, yy / 2, xx / 2);
  return y;
}

Tensorf Upsample2xNearest::backward(const Tensorf& gy) {
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  Tensorf gx(in_shape_);
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx)
          gx.at4(i, cc, yy / 2, xx / 2) += gy.at4(i, cc, yy, xx);
  return gx;
}

// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int in_dim, int out_dim, Rng& rng, float init_std)
    : weight(name + ".weight", {out_dim, in_dim}), bias(name + ".bias", {out_dim}) {
  gaussian_init(weight.value, rng, init_std);
}

Tensorf Linear::forward(const Tensorf& x) {
  if (x.ndim() != 2) throw std::invalid_argument("linear: expected (N, D)");
  x_ = x;
  const int n = x.dim(0), in = x.dim(1), out = weight.value.dim(0);
  Tensorf y({n, out});
  ConstRowMap wm(weight.value.data(), out, in);
  ConstRowMap xm(x.data(), n, in);
  RowMap ym(y.data(), n, out);
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() += ConstRowMap(bias.value.data(), 1, out).row(0);
  return y;
}

Tensorf Linear::backward(const Tensorf& gy) {
  const int n = x_.dim(0), in = x_.dim(1), out = weight.value.dim(0);
  ConstRowMap gym(gy.data(), n, out);
  ConstRowMap xm(x_.data(), n, in);
  RowMap gwm(weight.grad.data(), out, in);
  gwm.noalias() += gym.transpose() * xm;
  RowMap gbm(bias.grad.data(), 1, out);
  gbm.row(0) += gym.colwise().sum();
  Tensorf gx({n, in});
  RowMap gxm(gx.data(), n, in);
  ConstRowMap wm(weight.value.data(), out, in);
  gxm.noalias() = gym * wm;
  return gx;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---------------------------------------------------------------------------

Tensorf MinibatchStddev::forward(const Tensorf& x) {
  check4d(x, "minibatch_stddev");
  x_ = x;
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t chw = static_cast<int64_t>(c) * h * w;
  mean_ = Tensorf({c, h, w});
  std_ = Tensorf({c, h, w});
  for (int64_t j = 0; j < chw; ++j) {
    float mu = 0;
    for (int i = 0; i < n; ++i) mu += x[static_cast<int64_t>(i) * chw + j];
    mu /= n;
    float var = 0;
    for (int i = 0; i < n; ++i) {
      float d = x[static_cast<int64_t>(i) * chw + j] - mu;
      var += d * d;
    }
    var /= n;
    mean_[j] = mu;
    std_[j] = std::sqrt(var + eps_);
  }
  float v = std_.array().mean();
  Tensorf y({n, c + 1, h, w});
  const int64_t hw = static_cast<int64_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    std::copy(x.data() + i * chw, x.data() + (i + 1) * chw,
              y.data() + static_cast<int64_t>(i) * (c + 1) * hw);
    float* plane = y.data() + static_cast<int64_t>(i) * (c + 1) * hw + chw;
    std::fill(plane, plane + hw, v);
  }
  return y;
}

Tensorf MinibatchStddev::backward(const Tensorf& gy) {
  const int n = x_.dim(0), c = x_.dim(1), h = x_.dim(2), w = x_.dim(3);
  const int64_t chw = static_cast<int64_t>(c) * h * w;
  const int64_t hw = static_cast<int64_t>(h) * w;
  Tensorf gx(x_.shape());
  float gv = 0;
  for (int i = 0; i < n; ++i) {
    const float* gplane = gy.data() + static_cast<int64_t>(i) * (c + 1) * hw + chw;
    for (int64_t j = 0; j < hw; ++j) gv += gplane[j];
    std::copy(gy.data() + static_cast<int64_t>(i) * (c + 1) * hw,
              gy.data() + static_cast<int64_t>(i) * (c + 1) * hw + chw,
              gx.data() + i * chw);
  }
  const float scale = gv / static_cast<float>(chw);
  for (int i = 0; i < n; ++i)
    for (int64_t j = 0; j < chw; ++j)
      gx[i * chw + j] += scale * (x_[i * chw + j] - mean_[j]) / (n * std_[j]);
  return gx;
}

// ---------------------------------------------------------------------------

Tensorf Sequential::forward(const Tensorf& x) {
  Tensorf h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Tensorf Sequential::backward(const Tensorf& gy) {
  Tensorf g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers_) l->collect(out);
}

Tensorf ResidualWrap::forward(const Tensorf& x) {
  Tensorf y = block_->forward(x);
  if (!y.same_shape(x)) throw std::invalid_argument("residual: block changed shape");
  return Tensorf(x.shape(), x.array() + y.array());
}

Tensorf ResidualWrap::backward(const Tensorf& gy) {
  Tensorf g = block_->backward(gy);
  return Tensorf(gy.shape(), gy.array() + g.array());
}

// ---------------------------------------------------------------------------

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (Parameter* p : params_) {
    p->adam_m.array() = beta1_ * p->adam_m.array() + (1.0f - beta1_) * p->grad.array();
    p->adam_v.array() = beta2_ * p->adam_v.array() + (1.0f - beta2_) * p->grad.array().square();
    p->value.array() -=
        lr_ * (p->adam_m.array() / bc1) / ((p->adam_v.array() / bc2).sqrt() + eps_);
  }
}

}  // namespace lesionsynth::nn
