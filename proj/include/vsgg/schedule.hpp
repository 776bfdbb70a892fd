#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsgg/rng.hpp"
#include "vsgg/tensor.hpp"

namespace vsgg {

struct DiffusionConfig {
  int steps = 20;  // K
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int reverse_steps = -1;  // inference step count, <= steps; -1 follows steps

  int resolved_reverse_steps() const { return reverse_steps < 0 ? steps : reverse_steps; }
};

// beta/alpha/alpha_bar tables, 0-indexed internally; step k in the API is
// 1-based (k in [1, K]).
struct NoiseSchedule {
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  int steps() const { return static_cast<int>(beta.size()); }

  void check_step(int k) const {
    if (k < 1 || k > steps())
      throw std::invalid_argument("schedule: step " + std::to_string(k) +
                                  " outside [1, " + std::to_string(steps()) + "]");
  }

  double beta_at(int k) const { check_step(k); return beta[k - 1]; }
  double alpha_at(int k) const { check_step(k); return alpha[k - 1]; }
  double alpha_bar_at(int k) const { check_step(k); return alpha_bar[k - 1]; }
};

// Linear beta schedule; alpha_bar is built by sequential product so
// alpha_bar[k] == alpha_bar[k-1] * alpha[k] holds exactly.
inline NoiseSchedule make_schedule(const DiffusionConfig& config) {
  if (config.steps < 1) throw std::invalid_argument("make_schedule: steps must be >= 1");
  if (!(config.beta_start > 0.0 && config.beta_start < 1.0) ||
      !(config.beta_end > 0.0 && config.beta_end < 1.0))
    throw std::invalid_argument("make_schedule: beta endpoints must lie in (0, 1)");
  if (config.resolved_reverse_steps() < 0 ||
      config.resolved_reverse_steps() > config.steps)
    throw std::invalid_argument("make_schedule: reverse_steps must be in [0, steps]");

  NoiseSchedule s;
  s.beta.resize(config.steps);
  s.alpha.resize(config.steps);
  s.alpha_bar.resize(config.steps);
  double prod = 1.0;
  for (int i = 0; i < config.steps; ++i) {
    s.beta[i] = config.steps == 1
                    ? config.beta_start
                    : config.beta_start + (config.beta_end - config.beta_start) * i /
                                              (config.steps - 1);
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  return s;
}

// sqrt(abar_k) * A0 + sqrt(1 - abar_k) * eps, elementwise.
template <typename T>
Tensor<T> forward_diffuse(const Tensor<T>& a0, int k, const Tensor<T>& eps,
                          const NoiseSchedule& sched) {
  check_same_shape(a0, eps, "forward_diffuse");
  const double abar = sched.alpha_bar_at(k);
  const double ca = std::sqrt(abar);
  const double ce = std::sqrt(1.0 - abar);
  Tensor<T> out = a0;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<T>(ca * static_cast<double>(a0.data[i]) +
                                 ce * static_cast<double>(eps.data[i]));
  return out;
}

// (1 / sqrt(alpha_k)) * (A_k - (beta_k / sqrt(1 - abar_k)) * eps_pred).
// Deterministic: the reverse rule carries no stochastic term.
template <typename T>
Tensor<T> reverse_step(const Tensor<T>& a_k, int k, const Tensor<T>& eps_pred,
                       const NoiseSchedule& sched) {
  check_same_shape(a_k, eps_pred, "reverse_step");
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(k));
  const double noise_coeff = sched.beta_at(k) / std::sqrt(1.0 - sched.alpha_bar_at(k));
  Tensor<T> out = a_k;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = static_cast<T>(
        inv_sqrt_alpha * (static_cast<double>(a_k.data[i]) -
                          noise_coeff * static_cast<double>(eps_pred.data[i])));
  return out;
}

// Noise-prediction interface; tensors use the (N, N, D) adjacency layout.
// `condition` may be null (treated as the zero tensor by implementations).
template <typename T>
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Tensor<T> predict(const Tensor<T>& noisy, int step,
                            const Tensor<T>* condition) = 0;
};

// Hook applied to the working tensor before each denoiser call (motion
// injection plugs in here).
template <typename T>
using StepHook = std::function<void(Tensor<T>&, int)>;

// Runs reverse_step from k = steps down to 1 with eps = net(A_k, k, cond).
// Aborts with the step index when an intermediate goes non-finite.
template <typename T>
Tensor<T> denoise_loop(const Tensor<T>& a_noisy, const Tensor<T>* condition,
                       const NoiseSchedule& sched, Denoiser<T>& net, int steps,
                       const StepHook<T>& hook = nullptr) {
  if (steps < 0 || steps > sched.steps())
    throw std::invalid_argument("denoise_loop: steps must be in [0, K]");
  if (condition != nullptr) check_same_shape(a_noisy, *condition, "denoise_loop");
  Tensor<T> a = a_noisy;
  for (int k = steps; k >= 1; --k) {
    if (hook) hook(a, k);
    const Tensor<T> eps = net.predict(a, k, condition);
    a = reverse_step(a, k, eps, sched);
    if (!a.all_finite())
      throw std::runtime_error("denoise_loop: non-finite tensor at step " +
                               std::to_string(k));
  }
  return a;
}

}  // namespace vsgg
