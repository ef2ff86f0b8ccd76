#pragma once

#include <cstdint>
#include <vector>

#include "pmn/nn/layer.hpp"

namespace pmn::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double decay_per_epoch = 0.99;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction and exponential per-epoch learning-rate decay:
/// lr(e) = learning_rate * decay_per_epoch^e.
template <typename T>
class Adam {
 public:
  Adam(AdamConfig config, std::vector<ParamRef<T>> params);

  double learning_rate_at(std::size_t epoch) const;

  // Throws NumericError naming the first parameter whose gradient is not
  // finite; no parameter is modified in that case.
  void step(std::size_t epoch);

  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t steps) { steps_ = steps; }
  const AdamConfig& config() const { return config_; }
  const std::vector<ParamRef<T>>& params() const { return params_; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<ParamRef<T>> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::uint64_t steps_ = 0;
};

}  // namespace pmn::nn
