#pragma once

#include "vsgg/rng.hpp"
#include "vsgg/schedule.hpp"
#include "vsgg/tensor.hpp"

namespace vsgg {

// Noise-prediction objective: k ~ U[1, K], eps ~ N(0, I),
// loss = mean((eps - net(forward_diffuse(A0, k, eps), k, cond))^2).
// Stream order is fixed (k first, then eps elementwise) so tests can replay
// the exact sample. `Net` needs predict(noisy, k, cond) and, when backprop
// is requested, backward(grad_of_prediction).
template <typename T, typename Net>
double loss_vsgg_impl(const Tensor<T>& a0, const Tensor<T>* condition, Net& net,
                      const NoiseSchedule& sched, Rng& rng, bool backprop) {
  const int k = rng.uniform_int(1, sched.steps());
  Tensor<T> eps(a0.shape);
  for (T& v : eps.data) v = static_cast<T>(rng.normal());

  const Tensor<T> noisy = forward_diffuse(a0, k, eps, sched);
  const Tensor<T> pred = net.predict(noisy, k, condition);
  check_same_shape(pred, eps, "loss_vsgg");

  const double m = static_cast<double>(pred.numel());
  double loss = 0.0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    const double r = static_cast<double>(eps.data[i]) - static_cast<double>(pred.data[i]);
    loss += r * r;
  }
  loss /= m;

  if (backprop) {
    Tensor<T> grad(a0.shape);
    for (size_t i = 0; i < grad.data.size(); ++i)
      grad.data[i] = static_cast<T>(2.0 / m *
                                    (static_cast<double>(pred.data[i]) -
                                     static_cast<double>(eps.data[i])));
    if constexpr (requires { net.backward(grad); }) {
      net.backward(grad);
    } else {
      throw std::logic_error("loss backprop requested on a non-trainable denoiser");
    }
  }
  return loss;
}

// Unconditioned spatial-structure loss.
template <typename T, typename Net>
double loss_vsgg(const Tensor<T>& a0, Net& net, const NoiseSchedule& sched, Rng& rng,
                 bool backprop = false) {
  return loss_vsgg_impl<T, Net>(a0, nullptr, net, sched, rng, backprop);
}

// Temporally conditioned variant; a0_prev may be null for the first frame of
// a clip (null condition == zero tensor).
template <typename T, typename Net>
double loss_t_vsgg(const Tensor<T>& a0, const Tensor<T>* a0_prev, Net& net,
                   const NoiseSchedule& sched, Rng& rng, bool backprop = false) {
  return loss_vsgg_impl<T, Net>(a0, a0_prev, net, sched, rng, backprop);
}

}  // namespace vsgg
