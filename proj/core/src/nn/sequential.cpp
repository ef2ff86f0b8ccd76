#include "pmn/nn/sequential.hpp"

namespace pmn::nn {

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& [name, layer] : other.layers_) layers_.emplace_back(name, layer->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

template <typename T>
Sequential<T>& Sequential<T>::add(std::string name, std::unique_ptr<Layer<T>> layer) {
  layers_.emplace_back(std::move(name), std::move(layer));
  return *this;
}

template <typename T>
std::string Sequential<T>::describe() const {
  std::string out;
  for (const auto& [name, layer] : layers_) {
    if (!out.empty()) out += "-";
    out += layer->describe();
  }
  return out;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& input) const {
  Shape s = input;
  for (const auto& entry : layers_) s = entry.second->output_shape(s);
  return s;
}

template <typename T>
Tensor<T> Sequential<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& entry : layers_) h = entry.second->infer(h);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = x;
  for (auto& entry : layers_) h = entry.second->forward(h, mode);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_output) {
  Tensor<T> g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
  return g;
}

template <typename T>
void Sequential<T>::initialize(Rng& rng) {
  for (auto& entry : layers_) entry.second->initialize(rng);
}

template <typename T>
void Sequential<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  for (auto& [name, layer] : layers_) layer->collect_params(join_name(prefix, name), out);
}

template <typename T>
void Sequential<T>::collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) {
  for (auto& [name, layer] : layers_) layer->collect_buffers(join_name(prefix, name), out);
}

template <typename T>
void Sequential<T>::clear_cache() {
  for (auto& entry : layers_) entry.second->clear_cache();
}

template class Sequential<float>;
template class Sequential<double>;

}  // namespace pmn::nn
