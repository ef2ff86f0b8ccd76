#pragma once

#include <span>
#include <string>
#include <string_view>

#include "pmn/tensor.hpp"

namespace pmn {

enum class Metric { sq_l2, l1, cosine };

const char* to_string(Metric metric);
Metric metric_from_string(std::string_view name);

// Norms below this make the cosine distance undefined.
inline constexpr double kCosineNormFloor = 1e-12;

/// sq_l2: sum (z - p)^2;  l1: sum |z - p|;  cosine: 1 - <z, p> / (|z| |p|).
template <typename T>
T distance(std::span<const T> z, std::span<const T> p, Metric metric);

/// Accumulates upstream * d(distance)/dz into dz and upstream * d/dp into dp.
/// Either output span may be empty to skip it. The L1 subgradient at z == p
/// is zero.
template <typename T>
void distance_backward(std::span<const T> z, std::span<const T> p, Metric metric, T upstream, std::span<T> dz,
                       std::span<T> dp);

/// Prototype-matching layer: out[i][j] = distance(features[i], prototypes[j]).
/// `features` is [n, q] (or a single [q] vector), `prototypes` is [m, q].
template <typename T>
Tensor<T> pm_layer(const Tensor<T>& features, const Tensor<T>& prototypes, Metric metric);

}  // namespace pmn
