#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsgg/nn.hpp"
#include "vsgg/schedule.hpp"
#include "vsgg/tensor.hpp"

namespace vsgg {

enum class ConditionMode { kConcat, kAdd };

inline const char* condition_mode_name(ConditionMode m) {
  return m == ConditionMode::kConcat ? "concat" : "add";
}

inline ConditionMode condition_mode_from_name(const std::string& s) {
  if (s == "concat") return ConditionMode::kConcat;
  if (s == "add") return ConditionMode::kAdd;
  throw std::invalid_argument("unknown condition mode: " + s);
}

struct UNetConfig {
  int channels = 128;                        // D of the adjacency tensor
  int depth = 3;                             // encoder/decoder stages
  std::vector<int> widths = {64, 128, 256};  // one per stage
  int emb_dim = 32;                          // sinusoidal embedding width
  int emb_hidden = 64;                       // step-embedding MLP width
  int norm_groups = 8;
  ConditionMode condition = ConditionMode::kConcat;
  uint64_t init_seed = 1;

  void validate() const {
    if (channels < 1) throw std::invalid_argument("unet: channels must be >= 1");
    if (depth < 1) throw std::invalid_argument("unet: depth must be >= 1");
    if (static_cast<int>(widths.size()) != depth)
      throw std::invalid_argument("unet: widths must list one width per stage");
    for (int w : widths)
      if (w < 1) throw std::invalid_argument("unet: stage width must be >= 1");
    if (emb_dim < 2 || emb_dim % 2 != 0)
      throw std::invalid_argument("unet: emb_dim must be even and >= 2");
    if (emb_hidden < 1) throw std::invalid_argument("unet: emb_hidden must be >= 1");
  }
};

namespace nn {

// GroupNorm -> SiLU -> conv3x3, then the step embedding enters as a
// per-channel scale-and-shift on the second normalization, then SiLU ->
// conv3x3 (zero-init) plus a skip path (1x1 conv when widths differ). The
// multiplicative path matters: noise prediction is dominated by a
// step-dependent gain on the input, which a pure bias injection learns
// orders of magnitude more slowly.
template <typename T>
struct ResBlock {
  int in_ch = 0, out_ch = 0;
  GroupNorm<T> gn1, gn2;
  SiLU<T> act1, act2;
  Conv2d<T> conv1, conv2, skip;
  Linear<T> emb_proj;  // emb -> (scale, shift), zero-init
  bool has_skip_conv = false;
  Tensor<T> cached_norm;     // gn2 output
  std::vector<T> cached_ss;  // (scale, shift)

  void build(const std::string& name, int in, int out, int emb_dim, int groups,
             Rng& rng) {
    in_ch = in;
    out_ch = out;
    gn1.build(name + ".gn1", in, groups);
    conv1.build(name + ".conv1", in, out, 3, rng);
    emb_proj.build(name + ".emb", emb_dim, 2 * out, rng, /*zero_init=*/true);
    gn2.build(name + ".gn2", out, groups);
    conv2.build(name + ".conv2", out, out, 3, rng, /*zero_init=*/true);
    has_skip_conv = in != out;
    if (has_skip_conv) skip.build(name + ".skip", in, out, 1, rng);
  }

  void collect(ParamRefs<T>& out) {
    gn1.collect(out);
    conv1.collect(out);
    emb_proj.collect(out);
    gn2.collect(out);
    conv2.collect(out);
    if (has_skip_conv) skip.collect(out);
  }

  Tensor<T> forward(const Tensor<T>& x, const std::vector<T>& emb) {
    Tensor<T> h = conv1.forward(act1.forward(gn1.forward(x)));
    cached_ss = emb_proj.forward(emb);
    cached_norm = gn2.forward(h);
    Tensor<T> mod = cached_norm;
    const int hw = mod.shape[1] * mod.shape[2];
    for (int c = 0; c < out_ch; ++c) {
      const T scale = cached_ss[c];
      const T shift = cached_ss[out_ch + c];
      T* row = mod.data.data() + static_cast<size_t>(c) * hw;
      for (int i = 0; i < hw; ++i)
        row[i] = static_cast<T>(static_cast<double>(row[i]) * (1.0 + scale) + shift);
    }
    h = conv2.forward(act2.forward(mod));
    if (has_skip_conv) {
      const Tensor<T> s = skip.forward(x);
      for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += s.data[i];
    } else {
      for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += x.data[i];
    }
    return h;
  }

  // Returns grad w.r.t. x; accumulates the step-embedding grad into gemb.
  Tensor<T> backward(const Tensor<T>& gy, std::vector<T>& gemb) {
    Tensor<T> gmod = act2.backward(conv2.backward(gy));
    std::vector<T> gss(2 * out_ch, T{0});
    const int hw = gmod.shape[1] * gmod.shape[2];
    for (int c = 0; c < out_ch; ++c) {
      const double scale = static_cast<double>(cached_ss[c]);
      double gscale = 0.0, gshift = 0.0;
      T* grow = gmod.data.data() + static_cast<size_t>(c) * hw;
      const T* nrow = cached_norm.data.data() + static_cast<size_t>(c) * hw;
      for (int i = 0; i < hw; ++i) {
        const double g = static_cast<double>(grow[i]);
        gscale += g * static_cast<double>(nrow[i]);
        gshift += g;
        grow[i] = static_cast<T>(g * (1.0 + scale));  // grad into gn2 output
      }
      gss[c] = static_cast<T>(gscale);
      gss[out_ch + c] = static_cast<T>(gshift);
    }
    const std::vector<T> ge = emb_proj.backward(gss);
    for (size_t i = 0; i < ge.size(); ++i) gemb[i] += ge[i];

    Tensor<T> gh = gn2.backward(gmod);
    Tensor<T> gx = gn1.backward(act1.backward(conv1.backward(gh)));
    if (has_skip_conv) {
      const Tensor<T> gs = skip.backward(gy);
      for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gs.data[i];
    } else {
      for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += gy.data[i];
    }
    return gx;
  }
};

}  // namespace nn

// Encoder/decoder U-Net over the (N, N) slot grid with D channels, 2x
// down/up-sampling between stages and the step embedding added per stage.
// The previous frame's clean tensor conditions the net either by channel
// concatenation at the input (default) or additively.
template <typename T>
class DenoiserUNet : public Denoiser<T> {
 public:
  explicit DenoiserUNet(const UNetConfig& config) : cfg_(config) {
    cfg_.validate();
    Rng rng = Rng::from_key(cfg_.init_seed, {kTagInit});
    const int in_ch =
        cfg_.condition == ConditionMode::kConcat ? 2 * cfg_.channels : cfg_.channels;
    const int L = cfg_.depth;

    stem_.build("unet.stem", in_ch, cfg_.widths[0], 3, rng);
    emb_fc1_.build("unet.emb.fc1", cfg_.emb_dim, cfg_.emb_hidden, rng);
    emb_fc2_.build("unet.emb.fc2", cfg_.emb_hidden, cfg_.emb_hidden, rng);

    enc_.resize(L);
    pools_.resize(L > 1 ? L - 1 : 0);
    for (int s = 0; s < L; ++s) {
      const int in = s == 0 ? cfg_.widths[0] : cfg_.widths[s - 1];
      enc_[s].build("unet.enc" + std::to_string(s), in, cfg_.widths[s], cfg_.emb_hidden,
                    cfg_.norm_groups, rng);
    }
    mid_.build("unet.mid", cfg_.widths[L - 1], cfg_.widths[L - 1], cfg_.emb_hidden,
               cfg_.norm_groups, rng);
    dec_.resize(L);
    ups_.resize(L);
    for (int s = L - 1; s >= 0; --s) {
      const int out = s == 0 ? cfg_.widths[0] : cfg_.widths[s - 1];
      dec_[s].build("unet.dec" + std::to_string(s), 2 * cfg_.widths[s], out,
                    cfg_.emb_hidden, cfg_.norm_groups, rng);
    }
    out_gn_.build("unet.out.gn", cfg_.widths[0], cfg_.norm_groups);
    out_conv_.build("unet.out.conv", cfg_.widths[0], cfg_.channels, 3, rng,
                    /*zero_init=*/true);
    // Input skip into the output, per-channel modulated by the step
    // embedding. The normalizations inside the trunk discard the input's
    // amplitude, but noise prediction needs a step-dependent gain on the
    // input itself; this path carries it. Zero-init keeps the initial
    // prediction at exactly zero.
    gain_conv_.build("unet.gain.conv", in_ch, cfg_.channels, 1, rng,
                     /*zero_init=*/true);
    gain_proj_.build("unet.gain.proj", cfg_.emb_hidden, cfg_.channels, rng,
                     /*zero_init=*/true);

    collect_params();
  }

  const UNetConfig& config() const { return cfg_; }
  nn::ParamRefs<T>& params() { return params_; }
  void zero_grad() { nn::zero_grads(params_); }

  // Denoiser interface: adjacency layout (N, N, D), null condition == zeros.
  Tensor<T> predict(const Tensor<T>& noisy, int step,
                    const Tensor<T>* condition) override {
    const Tensor<T> x = to_channel_first(noisy);
    Tensor<T> cond_chw;
    if (condition != nullptr) {
      check_same_shape(noisy, *condition, "unet condition");
      cond_chw = to_channel_first(*condition);
    }
    const Tensor<T> y =
        forward_chw(x, step, condition != nullptr ? &cond_chw : nullptr);
    return to_channel_last(y);
  }

  // Backward for the most recent predict(); grad arrives in adjacency layout.
  void backward(const Tensor<T>& grad_prediction) {
    backward_chw(to_channel_first(grad_prediction));
  }

  Tensor<T> forward_chw(const Tensor<T>& a, int step, const Tensor<T>* cond) {
    if (a.shape.size() != 3 || a.shape[0] != cfg_.channels)
      throw std::invalid_argument("unet: expected (D, N, N) input with D = " +
                                  std::to_string(cfg_.channels) + ", got " +
                                  a.shape_str());
    const int h = a.shape[1], w = a.shape[2];

    Tensor<T> x;
    if (cfg_.condition == ConditionMode::kConcat) {
      x = Tensor<T>({2 * cfg_.channels, h, w});
      std::copy(a.data.begin(), a.data.end(), x.data.begin());
      if (cond != nullptr)
        std::copy(cond->data.begin(), cond->data.end(),
                  x.data.begin() + a.data.size());
    } else {
      x = a;
      if (cond != nullptr)
        for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += cond->data[i];
    }

    const std::vector<T> sin_emb = nn::sinusoidal_embedding<T>(step, cfg_.emb_dim);
    emb_hidden_pre_ = emb_fc1_.forward(sin_emb);
    std::vector<T> eh(emb_hidden_pre_.size());
    for (size_t i = 0; i < eh.size(); ++i) eh[i] = nn::silu(emb_hidden_pre_[i]);
    emb_ = emb_fc2_.forward(eh);

    Tensor<T> cur = stem_.forward(x);
    const int L = cfg_.depth;
    skips_.assign(L, Tensor<T>{});
    for (int s = 0; s < L; ++s) {
      skips_[s] = enc_[s].forward(cur, emb_);
      cur = s < L - 1 ? pools_[s].forward(skips_[s]) : skips_[s];
    }
    cur = mid_.forward(cur, emb_);
    for (int s = L - 1; s >= 0; --s) {
      if (s < L - 1)
        cur = ups_[s].forward(cur, skips_[s].shape[1], skips_[s].shape[2]);
      Tensor<T> cat({2 * cfg_.widths[s], skips_[s].shape[1], skips_[s].shape[2]});
      std::copy(cur.data.begin(), cur.data.end(), cat.data.begin());
      std::copy(skips_[s].data.begin(), skips_[s].data.end(),
                cat.data.begin() + cur.data.size());
      cur = dec_[s].forward(cat, emb_);
    }
    Tensor<T> y = out_conv_.forward(out_act_.forward(out_gn_.forward(cur)));

    gain_vec_ = gain_proj_.forward(emb_);
    gain_out_ = gain_conv_.forward(x);
    const int hw = h * w;
    for (int c = 0; c < cfg_.channels; ++c) {
      const double g = 1.0 + static_cast<double>(gain_vec_[c]);
      const T* src = gain_out_.data.data() + static_cast<size_t>(c) * hw;
      T* dst = y.data.data() + static_cast<size_t>(c) * hw;
      for (int i = 0; i < hw; ++i)
        dst[i] += static_cast<T>(g * static_cast<double>(src[i]));
    }
    return y;
  }

  void backward_chw(const Tensor<T>& gy) {
    std::vector<T> gemb(emb_.size(), T{0});

    // gain path: y += gain_out * (1 + gain_vec), channelwise
    {
      const int hw = gy.shape[1] * gy.shape[2];
      Tensor<T> ggain(gain_out_.shape);
      std::vector<T> gvec(cfg_.channels, T{0});
      for (int c = 0; c < cfg_.channels; ++c) {
        const double g = 1.0 + static_cast<double>(gain_vec_[c]);
        double acc = 0.0;
        const T* gyp = gy.data.data() + static_cast<size_t>(c) * hw;
        const T* gop = gain_out_.data.data() + static_cast<size_t>(c) * hw;
        T* ggp = ggain.data.data() + static_cast<size_t>(c) * hw;
        for (int i = 0; i < hw; ++i) {
          acc += static_cast<double>(gyp[i]) * static_cast<double>(gop[i]);
          ggp[i] = static_cast<T>(static_cast<double>(gyp[i]) * g);
        }
        gvec[c] = static_cast<T>(acc);
      }
      gain_conv_.backward(ggain);
      const std::vector<T> ge = gain_proj_.backward(gvec);
      for (size_t i = 0; i < ge.size(); ++i) gemb[i] += ge[i];
    }

    Tensor<T> g = out_gn_.backward(out_act_.backward(out_conv_.backward(gy)));

    const int L = cfg_.depth;
    std::vector<Tensor<T>> gskips(L);
    for (int s = 0; s <= L - 1; ++s) {
      const Tensor<T> gcat = dec_[s].backward(g, gemb);
      const int half = cfg_.widths[s];
      const int sh = skips_[s].shape[1], sw = skips_[s].shape[2];
      Tensor<T> gcur({half, sh, sw});
      gskips[s] = Tensor<T>({half, sh, sw});
      std::copy(gcat.data.begin(), gcat.data.begin() + gcur.data.size(),
                gcur.data.begin());
      std::copy(gcat.data.begin() + gcur.data.size(), gcat.data.end(),
                gskips[s].data.begin());
      g = s < L - 1 ? ups_[s].backward(gcur) : gcur;
    }
    g = mid_.backward(g, gemb);
    for (int s = L - 1; s >= 0; --s) {
      if (s < L - 1) g = pools_[s].backward(g);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += gskips[s].data[i];
      g = enc_[s].backward(g, gemb);
    }
    g = stem_.backward(g);

    std::vector<T> geh = emb_fc2_.backward(gemb);
    for (size_t i = 0; i < geh.size(); ++i)
      geh[i] = static_cast<T>(static_cast<double>(geh[i]) *
                              static_cast<double>(nn::silu_grad(emb_hidden_pre_[i])));
    emb_fc1_.backward(geh);
  }

 private:
  void collect_params() {
    params_.clear();
    stem_.collect(params_);
    emb_fc1_.collect(params_);
    emb_fc2_.collect(params_);
    for (auto& b : enc_) b.collect(params_);
    mid_.collect(params_);
    for (auto& b : dec_) b.collect(params_);
    out_gn_.collect(params_);
    out_conv_.collect(params_);
    gain_conv_.collect(params_);
    gain_proj_.collect(params_);
  }

  UNetConfig cfg_;
  nn::Conv2d<T> stem_;
  nn::Linear<T> emb_fc1_, emb_fc2_;
  std::vector<nn::ResBlock<T>> enc_, dec_;
  std::vector<nn::AvgPool2<T>> pools_;
  std::vector<nn::UpsampleNearest<T>> ups_;
  nn::ResBlock<T> mid_;
  nn::GroupNorm<T> out_gn_;
  nn::SiLU<T> out_act_;
  nn::Conv2d<T> out_conv_;
  nn::Conv2d<T> gain_conv_;
  nn::Linear<T> gain_proj_;
  nn::ParamRefs<T> params_;

  // forward caches
  std::vector<T> emb_hidden_pre_, emb_, gain_vec_;
  Tensor<T> gain_out_;
  std::vector<Tensor<T>> skips_;
};

}  // namespace vsgg
