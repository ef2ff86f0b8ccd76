#include "pmn/nn/adam.hpp"

#include <cmath>

namespace pmn::nn {

template <typename T>
Adam<T>::Adam(AdamConfig config, std::vector<ParamRef<T>> params) : config_(config), params_(std::move(params)) {
  if (!(config_.learning_rate > 0.0) || !(config_.decay_per_epoch > 0.0)) {
    throw ConfigError("Adam: learning rate and decay must be positive");
  }
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) || !(config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw ConfigError("Adam: betas must lie in [0, 1)");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.value->shape());
    v_.emplace_back(p.value->shape());
  }
}

template <typename T>
double Adam<T>::learning_rate_at(std::size_t epoch) const {
  return config_.learning_rate * std::pow(config_.decay_per_epoch, static_cast<double>(epoch));
}

template <typename T>
void Adam<T>::step(std::size_t epoch) {
  for (const auto& p : params_) {
    for (const T g : p.grad->values()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("Adam: non-finite gradient in parameter '" + p.name + "' at step " +
                           std::to_string(steps_ + 1));
      }
    }
  }
  ++steps_;
  const double lr = learning_rate_at(epoch);
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(steps_));

  for (std::size_t i = 0; i < params_.size(); ++i) {
    T* w = params_[i].value->data();
    const T* g = params_[i].grad->data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::size_t n = params_[i].value->size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = static_cast<T>(b1 * m[j] + (1.0 - b1) * g[j]);
      v[j] = static_cast<T>(b2 * v[j] + (1.0 - b2) * g[j] * g[j]);
      const double m_hat = m[j] / corr1;
      const double v_hat = v[j] / corr2;
      w[j] = static_cast<T>(w[j] - lr * m_hat / (std::sqrt(v_hat) + config_.eps));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace pmn::nn
