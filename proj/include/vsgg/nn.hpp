#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsgg/rng.hpp"
#include "vsgg/tensor.hpp"

// Small trainable-layer toolkit with explicit forward/backward passes.
// Templated on the scalar type: the pipeline trains in float32 (checkpoints
// round-trip bit-exactly), gradient-check tests instantiate double.
// Accumulations run in double either way. Single sample per call; batching
// is gradient accumulation across calls.

namespace vsgg::nn {

using vsgg::Tensor;

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> w;
  std::vector<T> g;

  void resize(std::vector<int> s) {
    shape = std::move(s);
    const auto n = static_cast<size_t>(Tensor<T>::count(shape));
    w.assign(n, T{0});
    g.assign(n, T{0});
  }

  void init_normal(Rng& rng, double stddev) {
    for (T& v : w) v = static_cast<T>(rng.normal(0.0, stddev));
  }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

template <typename T>
void zero_grads(const ParamRefs<T>& params) {
  for (Param<T>* p : params) std::fill(p->g.begin(), p->g.end(), T{0});
}

template <typename T>
int64_t param_count(const ParamRefs<T>& params) {
  int64_t n = 0;
  for (const Param<T>* p : params) n += static_cast<int64_t>(p->w.size());
  return n;
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
inline T silu(T x) {
  const double xd = static_cast<double>(x);
  return static_cast<T>(xd / (1.0 + std::exp(-xd)));
}

template <typename T>
inline T silu_grad(T x) {
  const double xd = static_cast<double>(x);
  const double s = 1.0 / (1.0 + std::exp(-xd));
  return static_cast<T>(s * (1.0 + xd * (1.0 - s)));
}

template <typename T>
struct SiLU {
  Tensor<T> cached;

  Tensor<T> forward(const Tensor<T>& x) {
    cached = x;
    Tensor<T> y = x;
    for (T& v : y.data) v = silu(v);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) const {
    Tensor<T> gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i)
      gx.data[i] = static_cast<T>(static_cast<double>(gy.data[i]) *
                                  static_cast<double>(silu_grad(cached.data[i])));
    return gx;
  }
};

// ---------------------------------------------------------------------------
// Conv2d, stride 1, zero padding k/2. Input (C, H, W).

template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, ksize = 3, pad = 1;
  Param<T> weight;  // (O, I, K, K)
  Param<T> bias;    // (O)
  Tensor<T> cached_x;

  void build(const std::string& name, int in, int out, int k, Rng& rng,
             bool zero_init = false) {
    in_ch = in;
    out_ch = out;
    ksize = k;
    pad = k / 2;
    weight.name = name + ".w";
    weight.resize({out, in, k, k});
    bias.name = name + ".b";
    bias.resize({out});
    if (!zero_init) weight.init_normal(rng, std::sqrt(2.0 / (in * k * k)));
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  // Streams one shifted input row per kernel tap; the inner loops are
  // branch-free so the compiler vectorizes them.
  Tensor<T> forward(const Tensor<T>& x) {
    if (x.shape.size() != 3 || x.shape[0] != in_ch)
      throw std::invalid_argument("conv2d: bad input shape " + x.shape_str());
    cached_x = x;
    const int h = x.shape[1], w = x.shape[2];
    Tensor<T> y({out_ch, h, w});
    for (int o = 0; o < out_ch; ++o) {
      T* yplane = y.data.data() + static_cast<size_t>(o) * h * w;
      const T b = bias.w[o];
      for (int i = 0; i < h * w; ++i) yplane[i] = b;
      for (int c = 0; c < in_ch; ++c) {
        const T* xplane = x.data.data() + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < ksize; ++ky)
          for (int kx = 0; kx < ksize; ++kx) {
            const T wv = weight.w[((static_cast<size_t>(o) * in_ch + c) * ksize + ky) *
                                      ksize +
                                  kx];
            if (wv == T{0}) continue;
            const int dy = ky - pad, dx = kx - pad;
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
            for (int iy = y0; iy < y1; ++iy) {
              T* yrow = yplane + static_cast<size_t>(iy) * w;
              const T* xrow = xplane + static_cast<size_t>(iy + dy) * w + dx;
              for (int ix = x0; ix < x1; ++ix) yrow[ix] += wv * xrow[ix];
            }
          }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const int h = cached_x.shape[1], w = cached_x.shape[2];
    Tensor<T> gx({in_ch, h, w});
    for (int o = 0; o < out_ch; ++o) {
      const T* gplane = gy.data.data() + static_cast<size_t>(o) * h * w;
      double gb = 0.0;
      for (int i = 0; i < h * w; ++i) gb += static_cast<double>(gplane[i]);
      bias.g[o] += static_cast<T>(gb);
      for (int c = 0; c < in_ch; ++c) {
        const T* xplane = cached_x.data.data() + static_cast<size_t>(c) * h * w;
        T* gxplane = gx.data.data() + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < ksize; ++ky)
          for (int kx = 0; kx < ksize; ++kx) {
            const size_t widx =
                ((static_cast<size_t>(o) * in_ch + c) * ksize + ky) * ksize + kx;
            const T wv = weight.w[widx];
            const int dy = ky - pad, dx = kx - pad;
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
            double gw = 0.0;
            for (int iy = y0; iy < y1; ++iy) {
              const T* grow = gplane + static_cast<size_t>(iy) * w;
              const T* xrow = xplane + static_cast<size_t>(iy + dy) * w + dx;
              T* gxrow = gxplane + static_cast<size_t>(iy + dy) * w + dx;
              for (int ix = x0; ix < x1; ++ix) {
                gw += static_cast<double>(grow[ix]) * static_cast<double>(xrow[ix]);
                gxrow[ix] += wv * grow[ix];
              }
            }
            weight.g[widx] += static_cast<T>(gw);
          }
      }
    }
    return gx;
  }
};

// ---------------------------------------------------------------------------
// GroupNorm over (C, H, W); groups must divide C.

template <typename T>
struct GroupNorm {
  int channels = 0, groups = 1;
  double eps = 1e-5;
  Param<T> gamma, beta;
  Tensor<T> cached_xhat;
  std::vector<double> cached_inv_std;

  static int pick_groups(int channels, int preferred) {
    for (int g = std::min(preferred, channels); g >= 1; --g)
      if (channels % g == 0) return g;
    return 1;
  }

  void build(const std::string& name, int ch, int preferred_groups) {
    channels = ch;
    groups = pick_groups(ch, preferred_groups);
    gamma.name = name + ".gamma";
    gamma.resize({ch});
    std::fill(gamma.w.begin(), gamma.w.end(), T{1});
    beta.name = name + ".beta";
    beta.resize({ch});
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.shape[0] != channels)
      throw std::invalid_argument("groupnorm: channel mismatch");
    const int h = x.shape[1], w = x.shape[2];
    const int per_group = channels / groups;
    const size_t group_elems = static_cast<size_t>(per_group) * h * w;

    cached_xhat = Tensor<T>(x.shape);
    cached_inv_std.assign(groups, 0.0);
    Tensor<T> y(x.shape);

    for (int g = 0; g < groups; ++g) {
      const size_t base = static_cast<size_t>(g) * group_elems;
      double mean = 0.0;
      for (size_t i = 0; i < group_elems; ++i)
        mean += static_cast<double>(x.data[base + i]);
      mean /= static_cast<double>(group_elems);
      double var = 0.0;
      for (size_t i = 0; i < group_elems; ++i) {
        const double d = static_cast<double>(x.data[base + i]) - mean;
        var += d * d;
      }
      var /= static_cast<double>(group_elems);
      const double inv_std = 1.0 / std::sqrt(var + eps);
      cached_inv_std[g] = inv_std;

      for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
        const size_t crow = static_cast<size_t>(c) * h * w;
        const double ga = static_cast<double>(gamma.w[c]);
        const double be = static_cast<double>(beta.w[c]);
        for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) {
          const double xhat = (static_cast<double>(x.data[crow + i]) - mean) * inv_std;
          cached_xhat.data[crow + i] = static_cast<T>(xhat);
          y.data[crow + i] = static_cast<T>(ga * xhat + be);
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const int h = gy.shape[1], w = gy.shape[2];
    const int per_group = channels / groups;
    const size_t group_elems = static_cast<size_t>(per_group) * h * w;
    const double m = static_cast<double>(group_elems);
    Tensor<T> gx(gy.shape);

    for (int g = 0; g < groups; ++g) {
      double sum1 = 0.0, sum2 = 0.0;
      for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
        const size_t crow = static_cast<size_t>(c) * h * w;
        const double ga = static_cast<double>(gamma.w[c]);
        double gga = 0.0, gbe = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) {
          const double gyv = static_cast<double>(gy.data[crow + i]);
          const double xhat = static_cast<double>(cached_xhat.data[crow + i]);
          const double gxhat = gyv * ga;
          sum1 += gxhat;
          sum2 += gxhat * xhat;
          gga += gyv * xhat;
          gbe += gyv;
        }
        gamma.g[c] += static_cast<T>(gga);
        beta.g[c] += static_cast<T>(gbe);
      }
      const double inv_std = cached_inv_std[g];
      for (int c = g * per_group; c < (g + 1) * per_group; ++c) {
        const size_t crow = static_cast<size_t>(c) * h * w;
        const double ga = static_cast<double>(gamma.w[c]);
        for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) {
          const double gxhat = static_cast<double>(gy.data[crow + i]) * ga;
          const double xhat = static_cast<double>(cached_xhat.data[crow + i]);
          gx.data[crow + i] =
              static_cast<T>(inv_std / m * (m * gxhat - sum1 - xhat * sum2));
        }
      }
    }
    return gx;
  }
};

// ---------------------------------------------------------------------------
// 2x average pooling with edge clipping; output dims are ceil(H/2).

template <typename T>
struct AvgPool2 {
  int in_h = 0, in_w = 0;

  static int out_dim(int d) { return (d + 1) / 2; }

  Tensor<T> forward(const Tensor<T>& x) {
    in_h = x.shape[1];
    in_w = x.shape[2];
    const int c = x.shape[0], oh = out_dim(in_h), ow = out_dim(in_w);
    Tensor<T> y({c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const int y0 = 2 * oy, x0 = 2 * ox;
          const int y1 = std::min(y0 + 2, in_h), x1 = std::min(x0 + 2, in_w);
          double acc = 0.0;
          for (int sy = y0; sy < y1; ++sy)
            for (int sx = x0; sx < x1; ++sx)
              acc += static_cast<double>(x.at3(ch, sy, sx));
          y.at3(ch, oy, ox) = static_cast<T>(acc / ((y1 - y0) * (x1 - x0)));
        }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) const {
    const int c = gy.shape[0], oh = gy.shape[1], ow = gy.shape[2];
    Tensor<T> gx({c, in_h, in_w});
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const int y0 = 2 * oy, x0 = 2 * ox;
          const int y1 = std::min(y0 + 2, in_h), x1 = std::min(x0 + 2, in_w);
          const double share =
              static_cast<double>(gy.at3(ch, oy, ox)) / ((y1 - y0) * (x1 - x0));
          for (int sy = y0; sy < y1; ++sy)
            for (int sx = x0; sx < x1; ++sx) gx.at3(ch, sy, sx) += static_cast<T>(share);
        }
    return gx;
  }
};

// Nearest-neighbour resize to an explicit target, so odd encoder sizes map
// back onto their skip connections exactly.

template <typename T>
struct UpsampleNearest {
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;

  Tensor<T> forward(const Tensor<T>& x, int target_h, int target_w) {
    in_h = x.shape[1];
    in_w = x.shape[2];
    out_h = target_h;
    out_w = target_w;
    const int c = x.shape[0];
    Tensor<T> y({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < out_h; ++oy) {
        const int sy = std::min(in_h - 1, oy * in_h / out_h);
        for (int ox = 0; ox < out_w; ++ox) {
          const int sx = std::min(in_w - 1, ox * in_w / out_w);
          y.at3(ch, oy, ox) = x.at3(ch, sy, sx);
        }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) const {
    const int c = gy.shape[0];
    Tensor<T> gx({c, in_h, in_w});
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < out_h; ++oy) {
        const int sy = std::min(in_h - 1, oy * in_h / out_h);
        for (int ox = 0; ox < out_w; ++ox) {
          const int sx = std::min(in_w - 1, ox * in_w / out_w);
          gx.at3(ch, sy, sx) += gy.at3(ch, oy, ox);
        }
      }
    return gx;
  }
};

// ---------------------------------------------------------------------------
// Linear layer on flat vectors.

template <typename T>
struct Linear {
  int in_dim = 0, out_dim = 0;
  Param<T> weight;  // (O, I)
  Param<T> bias;    // (O)
  std::vector<T> cached_x;

  void build(const std::string& name, int in, int out, Rng& rng, bool zero_init = false) {
    in_dim = in;
    out_dim = out;
    weight.name = name + ".w";
    weight.resize({out, in});
    bias.name = name + ".b";
    bias.resize({out});
    if (!zero_init) weight.init_normal(rng, std::sqrt(2.0 / in));
  }

  void collect(ParamRefs<T>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  std::vector<T> forward(const std::vector<T>& x) {
    if (static_cast<int>(x.size()) != in_dim)
      throw std::invalid_argument("linear: input dim mismatch");
    cached_x = x;
    std::vector<T> y(out_dim);
    for (int o = 0; o < out_dim; ++o) {
      double acc = static_cast<double>(bias.w[o]);
      const size_t row = static_cast<size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i)
        acc += static_cast<double>(weight.w[row + i]) * static_cast<double>(x[i]);
      y[o] = static_cast<T>(acc);
    }
    return y;
  }

  std::vector<T> backward(const std::vector<T>& gy) {
    std::vector<T> gx(in_dim, T{0});
    for (int o = 0; o < out_dim; ++o) {
      const double g = static_cast<double>(gy[o]);
      bias.g[o] += static_cast<T>(g);
      const size_t row = static_cast<size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) {
        weight.g[row + i] += static_cast<T>(g * static_cast<double>(cached_x[i]));
        gx[i] += static_cast<T>(g * static_cast<double>(weight.w[row + i]));
      }
    }
    return gx;
  }

  // Stateless variant used by the readout heads, where one layer serves many
  // entries per frame: the caller keeps x and recomputes as needed.
  std::vector<T> apply(const std::vector<T>& x) const {
    std::vector<T> y(out_dim);
    for (int o = 0; o < out_dim; ++o) {
      double acc = static_cast<double>(bias.w[o]);
      const size_t row = static_cast<size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i)
        acc += static_cast<double>(weight.w[row + i]) * static_cast<double>(x[i]);
      y[o] = static_cast<T>(acc);
    }
    return y;
  }

  std::vector<T> accumulate(const std::vector<T>& x, const std::vector<T>& gy) {
    std::vector<T> gx(in_dim, T{0});
    for (int o = 0; o < out_dim; ++o) {
      const double g = static_cast<double>(gy[o]);
      bias.g[o] += static_cast<T>(g);
      const size_t row = static_cast<size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) {
        weight.g[row + i] += static_cast<T>(g * static_cast<double>(x[i]));
        gx[i] += static_cast<T>(g * static_cast<double>(weight.w[row + i]));
      }
    }
    return gx;
  }
};

// ---------------------------------------------------------------------------
// Adam / AdamW (decoupled decay when weight_decay > 0). Moments live in the
// working scalar type so checkpointed state restores training exactly.

template <typename T>
class AdamOptimizer {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void attach(const ParamRefs<T>& params) {
    state_.clear();
    for (const Param<T>* p : params)
      state_.push_back(Moments{std::vector<T>(p->w.size(), T{0}),
                               std::vector<T>(p->w.size(), T{0})});
  }

  void step(const ParamRefs<T>& params, double lr) {
    if (state_.size() != params.size())
      throw std::logic_error("adam: attach() before step()");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
      Param<T>& p = *params[pi];
      Moments& mom = state_[pi];
      for (size_t i = 0; i < p.w.size(); ++i) {
        const double g = static_cast<double>(p.g[i]);
        const double m = beta1 * static_cast<double>(mom.m[i]) + (1.0 - beta1) * g;
        const double v = beta2 * static_cast<double>(mom.v[i]) + (1.0 - beta2) * g * g;
        mom.m[i] = static_cast<T>(m);
        mom.v[i] = static_cast<T>(v);
        const double mhat = static_cast<double>(mom.m[i]) / bc1;
        const double vhat = static_cast<double>(mom.v[i]) / bc2;
        double w = static_cast<double>(p.w[i]);
        w -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * w);
        p.w[i] = static_cast<T>(w);
      }
    }
  }

  int64_t step_count() const { return step_count_; }
  void set_step_count(int64_t n) { step_count_ = n; }

  // Moment blobs in parameter order, for checkpointing.
  std::vector<T>& moment_m(size_t i) { return state_[i].m; }
  std::vector<T>& moment_v(size_t i) { return state_[i].v; }
  size_t size() const { return state_.size(); }

 private:
  struct Moments {
    std::vector<T> m, v;
  };
  std::vector<Moments> state_;
  int64_t step_count_ = 0;
};

// ---------------------------------------------------------------------------
// Sinusoidal step embedding (fixed).

template <typename T>
std::vector<T> sinusoidal_embedding(int step, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("sinusoidal_embedding: dim must be even and >= 2");
  const int half = dim / 2;
  std::vector<T> out(dim);
  for (int i = 0; i < half; ++i) {
    const double freq =
        half > 1 ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
    out[i] = static_cast<T>(std::sin(step * freq));
    out[half + i] = static_cast<T>(std::cos(step * freq));
  }
  return out;
}

}  // namespace vsgg::nn
