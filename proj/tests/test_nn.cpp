#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "vsgg/losses.hpp"
#include "vsgg/nn.hpp"
#include "vsgg/unet.hpp"

using namespace vsgg;
using vsgg::nn::Param;
using vsgg::nn::ParamRefs;

namespace {

Tensor<double> random_tensor(const std::vector<int>& shape, Rng& rng) {
  Tensor<double> t(shape);
  for (double& v : t.data) v = rng.normal();
  return t;
}

// Central finite differences over every parameter; returns the worst
// relative error against the analytic gradient. `loss` must be a pure
// function of the parameters.
double max_grad_rel_error(const ParamRefs<double>& params,
                          const std::function<double()>& loss,
                          const std::function<void()>& compute_grads,
                          double h = 1e-6) {
  nn::zero_grads(params);
  compute_grads();

  double worst = 0.0;
  double grad_scale = 0.0;
  for (Param<double>* p : params)
    for (double g : p->g) grad_scale = std::max(grad_scale, std::abs(g));

  for (Param<double>* p : params) {
    for (size_t i = 0; i < p->w.size(); ++i) {
      const double saved = p->w[i];
      const double step = h * std::max(1.0, std::abs(saved));
      p->w[i] = saved + step;
      const double up = loss();
      p->w[i] = saved - step;
      const double down = loss();
      p->w[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double analytic = p->g[i];
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-4 * grad_scale,
                                     1e-12});
      worst = std::max(worst, std::abs(fd - analytic) / denom);
    }
  }
  return worst;
}

// Scalar loss over a tensor: fixed random projection (keeps gradients dense).
struct TensorLoss {
  Tensor<double> weights;
  explicit TensorLoss(const std::vector<int>& shape, uint64_t seed) {
    Rng rng(seed);
    weights = random_tensor(shape, rng);
  }
  double value(const Tensor<double>& y) const {
    double acc = 0.0;
    for (size_t i = 0; i < y.data.size(); ++i) acc += weights.data[i] * y.data[i];
    return acc;
  }
  Tensor<double> grad() const { return weights; }
};

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(1);
  nn::Conv2d<double> conv;
  conv.build("conv", 3, 4, 3, rng);
  const Tensor<double> x = random_tensor({3, 5, 5}, rng);
  TensorLoss loss({4, 5, 5}, 7);

  ParamRefs<double> params;
  conv.collect(params);
  const double err = max_grad_rel_error(
      params, [&] { return loss.value(conv.forward(x)); },
      [&] {
        conv.forward(x);
        conv.backward(loss.grad());
      });
  CHECK(err < 1e-6);
}

TEST_CASE("conv2d input gradient matches finite differences") {
  Rng rng(2);
  nn::Conv2d<double> conv;
  conv.build("conv", 2, 3, 3, rng);
  Tensor<double> x = random_tensor({2, 4, 4}, rng);
  TensorLoss loss({3, 4, 4}, 8);

  conv.forward(x);
  const Tensor<double> gx = conv.backward(loss.grad());
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double saved = x.data[i];
    const double h = 1e-6;
    x.data[i] = saved + h;
    const double up = loss.value(conv.forward(x));
    x.data[i] = saved - h;
    const double down = loss.value(conv.forward(x));
    x.data[i] = saved;
    const double fd = (up - down) / (2 * h);
    CHECK(gx.data[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("groupnorm gradients match finite differences") {
  Rng rng(3);
  nn::GroupNorm<double> gn;
  gn.build("gn", 6, 3);
  // nudge gamma/beta off their init so the test is not at a special point
  for (auto& v : gn.gamma.w) v = 1.0 + 0.3 * rng.normal();
  for (auto& v : gn.beta.w) v = 0.2 * rng.normal();
  Tensor<double> x = random_tensor({6, 3, 3}, rng);
  TensorLoss loss({6, 3, 3}, 9);

  ParamRefs<double> params;
  gn.collect(params);
  const double err = max_grad_rel_error(
      params, [&] { return loss.value(gn.forward(x)); },
      [&] {
        gn.forward(x);
        gn.backward(loss.grad());
      });
  CHECK(err < 1e-6);

  // input gradient
  gn.forward(x);
  const Tensor<double> gx = gn.backward(loss.grad());
  for (size_t i = 0; i < x.data.size(); i += 7) {
    const double saved = x.data[i];
    const double h = 1e-6;
    x.data[i] = saved + h;
    const double up = loss.value(gn.forward(x));
    x.data[i] = saved - h;
    const double down = loss.value(gn.forward(x));
    x.data[i] = saved;
    CHECK(gx.data[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
  }
}

TEST_CASE("pool, upsample and silu backward are adjoint-consistent") {
  Rng rng(4);
  Tensor<double> x = random_tensor({2, 5, 5}, rng);  // odd size exercises clipping

  nn::AvgPool2<double> pool;
  const Tensor<double> y = pool.forward(x);
  CHECK(y.shape == std::vector<int>{2, 3, 3});
  TensorLoss ploss({2, 3, 3}, 11);
  const Tensor<double> gx = pool.backward(ploss.grad());
  for (size_t i = 0; i < x.data.size(); i += 3) {
    const double saved = x.data[i];
    const double h = 1e-6;
    x.data[i] = saved + h;
    const double up = ploss.value(pool.forward(x));
    x.data[i] = saved - h;
    const double down = ploss.value(pool.forward(x));
    x.data[i] = saved;
    CHECK(gx.data[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
  }

  nn::UpsampleNearest<double> up;
  const Tensor<double> yu = up.forward(y, 5, 5);
  CHECK(yu.shape == std::vector<int>{2, 5, 5});
  TensorLoss uloss({2, 5, 5}, 12);
  Tensor<double> y_mut = y;
  const Tensor<double> gy = up.backward(uloss.grad());
  for (size_t i = 0; i < y_mut.data.size(); i += 2) {
    const double saved = y_mut.data[i];
    const double h = 1e-6;
    y_mut.data[i] = saved + h;
    const double a = uloss.value(up.forward(y_mut, 5, 5));
    y_mut.data[i] = saved - h;
    const double b = uloss.value(up.forward(y_mut, 5, 5));
    y_mut.data[i] = saved;
    CHECK(gy.data[i] == doctest::Approx((a - b) / (2 * h)).epsilon(1e-5));
  }

  nn::SiLU<double> act;
  Tensor<double> xs = random_tensor({2, 3, 3}, rng);
  act.forward(xs);
  TensorLoss sloss({2, 3, 3}, 13);
  const Tensor<double> gs = act.backward(sloss.grad());
  for (size_t i = 0; i < xs.data.size(); ++i) {
    const double saved = xs.data[i];
    const double h = 1e-6;
    xs.data[i] = saved + h;
    const double a = sloss.value(act.forward(xs));
    xs.data[i] = saved - h;
    const double b = sloss.value(act.forward(xs));
    xs.data[i] = saved;
    CHECK(gs.data[i] == doctest::Approx((a - b) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("resblock gradients match finite differences") {
  Rng rng(5);
  nn::ResBlock<double> block;
  block.build("blk", 3, 5, 4, 2, rng);
  // conv2 and the embedding projection are zero-initialized; nudge them so
  // every gradient path is generic
  for (auto& v : block.conv2.weight.w) v = 0.1 * rng.normal();
  for (auto& v : block.emb_proj.weight.w) v = 0.1 * rng.normal();
  const Tensor<double> x = random_tensor({3, 4, 4}, rng);
  std::vector<double> emb = {0.3, -0.2, 0.5, 0.1};
  TensorLoss loss({5, 4, 4}, 14);

  ParamRefs<double> params;
  block.collect(params);
  std::vector<double> gemb(emb.size(), 0.0);
  const double err = max_grad_rel_error(
      params, [&] { return loss.value(block.forward(x, emb)); },
      [&] {
        block.forward(x, emb);
        block.backward(loss.grad(), gemb);
      });
  CHECK(err < 5e-6);

  // embedding gradient flows too
  double gsum = 0.0;
  for (double g : gemb) gsum += std::abs(g);
  CHECK(gsum > 0.0);
}

TEST_CASE("unet output shape equals input shape across a config grid") {
  for (int n : {4, 6, 7}) {
    for (int depth : {1, 2, 3}) {
      for (int d : {3, 8}) {
        UNetConfig cfg;
        cfg.channels = d;
        cfg.depth = depth;
        cfg.widths = std::vector<int>(depth, 6);
        cfg.emb_dim = 4;
        cfg.emb_hidden = 6;
        cfg.norm_groups = 2;
        cfg.init_seed = 3;
        DenoiserUNet<double> net(cfg);
        Rng rng(6);
        const Tensor<double> a = random_tensor({n, n, d}, rng);
        const Tensor<double> cond = random_tensor({n, n, d}, rng);
        const Tensor<double> y = net.predict(a, 2, &cond);
        CHECK(y.shape == a.shape);
        const Tensor<double> y2 = net.predict(a, 2, &cond);
        for (size_t i = 0; i < y.data.size(); ++i)
          CHECK(y.data[i] == y2.data[i]);  // evaluation-mode determinism
      }
    }
  }
}

TEST_CASE("zero-initialized output conv makes the initial prediction zero") {
  UNetConfig cfg;
  cfg.channels = 4;
  cfg.depth = 2;
  cfg.widths = {4, 6};
  cfg.emb_dim = 4;
  cfg.emb_hidden = 4;
  cfg.norm_groups = 2;
  DenoiserUNet<double> net(cfg);
  Rng rng(7);
  const Tensor<double> a = random_tensor({5, 5, 4}, rng);
  const Tensor<double> y = net.predict(a, 1, nullptr);
  for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("full unet parameter gradients match finite differences") {
  UNetConfig cfg;
  cfg.channels = 3;
  cfg.depth = 2;
  cfg.widths = {4, 6};
  cfg.emb_dim = 4;
  cfg.emb_hidden = 6;
  cfg.norm_groups = 2;
  cfg.init_seed = 11;
  DenoiserUNet<double> net(cfg);
  Rng rng(8);
  // move zero-initialized convs off zero for a generic check
  for (Param<double>* p : net.params())
    for (double& v : p->w)
      if (v == 0.0 && p->name.find(".b") == std::string::npos) v = 0.05 * rng.normal();

  const Tensor<double> a = random_tensor({4, 4, 3}, rng);
  const Tensor<double> cond = random_tensor({4, 4, 3}, rng);
  TensorLoss loss({4, 4, 3}, 15);

  const double err = max_grad_rel_error(
      net.params(), [&] { return loss.value(net.predict(a, 2, &cond)); },
      [&] {
        net.predict(a, 2, &cond);
        net.backward(loss.grad());
      });
  CHECK(err < 1e-5);
}

TEST_CASE("loss_t_vsgg gradient on a small net matches finite differences") {
  UNetConfig cfg;
  cfg.channels = 2;
  cfg.depth = 2;
  cfg.widths = {3, 3};
  cfg.emb_dim = 4;
  cfg.emb_hidden = 3;
  cfg.norm_groups = 3;
  cfg.init_seed = 13;
  DenoiserUNet<double> net(cfg);
  CHECK(nn::param_count(net.params()) <= 2048);  // stays a toy net

  Rng init(9);
  for (Param<double>* p : net.params())
    for (double& v : p->w)
      if (v == 0.0 && p->name.find(".b") == std::string::npos) v = 0.05 * init.normal();

  DiffusionConfig dcfg;
  dcfg.steps = 4;
  const NoiseSchedule sched = make_schedule(dcfg);
  Rng data_rng(10);
  const Tensor<double> a0 = random_tensor({4, 4, 2}, data_rng);
  const Tensor<double> prev = random_tensor({4, 4, 2}, data_rng);

  // The loss draws (k, eps) from the stream; reseeding per call fixes the
  // sample so finite differences see a deterministic function.
  const auto loss = [&] {
    Rng r(33);
    return loss_t_vsgg<double>(a0, &prev, net, sched, r, false);
  };
  const double err = max_grad_rel_error(
      net.params(), loss,
      [&] {
        Rng r(33);
        loss_t_vsgg<double>(a0, &prev, net, sched, r, true);
      },
      1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("adam takes finite steps and supports decoupled weight decay") {
  Rng rng(12);
  nn::Linear<double> layer;
  layer.build("fc", 3, 2, rng);
  ParamRefs<double> params;
  layer.collect(params);

  nn::AdamOptimizer<double> opt;
  opt.attach(params);
  const std::vector<double> x = {0.5, -1.0, 2.0};
  const std::vector<double> target = {1.0, -1.0};

  double first_loss = 0.0, last_loss = 0.0;
  for (int it = 0; it < 200; ++it) {
    nn::zero_grads(params);
    const auto y = layer.forward(x);
    std::vector<double> gy(2);
    double loss = 0.0;
    for (int i = 0; i < 2; ++i) {
      loss += 0.5 * (y[i] - target[i]) * (y[i] - target[i]);
      gy[i] = y[i] - target[i];
    }
    layer.backward(gy);
    opt.step(params, 0.05);
    if (it == 0) first_loss = loss;
    last_loss = loss;
  }
  CHECK(last_loss < 0.01 * first_loss);

  // weight decay pulls unused weights toward zero
  nn::AdamOptimizer<double> wd;
  wd.weight_decay = 0.5;
  nn::Linear<double> l2;
  l2.build("fc2", 2, 2, rng);
  ParamRefs<double> p2;
  l2.collect(p2);
  wd.attach(p2);
  const double before = std::abs(l2.weight.w[0]);
  for (int it = 0; it < 50; ++it) {
    nn::zero_grads(p2);  // zero gradient: only decay moves weights
    wd.step(p2, 0.1);
  }
  CHECK(std::abs(l2.weight.w[0]) < before);
}

TEST_CASE("sinusoidal embedding distinguishes steps deterministically") {
  const auto e1 = nn::sinusoidal_embedding<double>(1, 8);
  const auto e1b = nn::sinusoidal_embedding<double>(1, 8);
  const auto e2 = nn::sinusoidal_embedding<double>(2, 8);
  CHECK(e1 == e1b);
  CHECK(e1 != e2);
  CHECK(e1.size() == 8);
  CHECK_THROWS_AS(nn::sinusoidal_embedding<double>(1, 7), std::invalid_argument);
}
