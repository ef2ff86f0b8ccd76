#include "pmn/distance.hpp"

#include <cmath>

namespace pmn {

const char* to_string(Metric metric) {
  switch (metric) {
    case Metric::sq_l2: return "sqL2";
    case Metric::l1: return "L1";
    case Metric::cosine: return "cosine";
  }
  return "?";
}

Metric metric_from_string(std::string_view name) {
  if (name == "sqL2" || name == "sq_l2" || name == "l2") return Metric::sq_l2;
  if (name == "L1" || name == "l1") return Metric::l1;
  if (name == "cosine" || name == "cos") return Metric::cosine;
  throw ConfigError("unknown distance metric '" + std::string(name) + "' (expected sqL2, L1 or cosine)");
}

namespace {

template <typename T>
void require_same_length(std::span<const T> z, std::span<const T> p) {
  if (z.size() != p.size()) {
    throw DimensionError("distance: vectors of length " + std::to_string(z.size()) + " and " +
                         std::to_string(p.size()));
  }
}

struct CosineParts {
  double dot = 0.0, zz = 0.0, pp = 0.0;
};

template <typename T>
CosineParts cosine_parts(std::span<const T> z, std::span<const T> p) {
  CosineParts c;
  for (std::size_t i = 0; i < z.size(); ++i) {
    c.dot += static_cast<double>(z[i]) * p[i];
    c.zz += static_cast<double>(z[i]) * z[i];
    c.pp += static_cast<double>(p[i]) * p[i];
  }
  if (std::sqrt(c.zz) < kCosineNormFloor || std::sqrt(c.pp) < kCosineNormFloor) {
    throw DomainError("cosine distance undefined for a zero-norm vector");
  }
  return c;
}

}  // namespace

template <typename T>
T distance(std::span<const T> z, std::span<const T> p, Metric metric) {
  require_same_length(z, p);
  switch (metric) {
    case Metric::sq_l2: {
      T acc = 0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const T d = z[i] - p[i];
        acc += d * d;
      }
      return acc;
    }
    case Metric::l1: {
      T acc = 0;
      for (std::size_t i = 0; i < z.size(); ++i) acc += std::abs(z[i] - p[i]);
      return acc;
    }
    case Metric::cosine: {
      const auto c = cosine_parts(z, p);
      return static_cast<T>(1.0 - c.dot / std::sqrt(c.zz * c.pp));
    }
  }
  return T(0);
}

template <typename T>
void distance_backward(std::span<const T> z, std::span<const T> p, Metric metric, T upstream, std::span<T> dz,
                       std::span<T> dp) {
  require_same_length(z, p);
  const std::size_t q = z.size();
  switch (metric) {
    case Metric::sq_l2:
      for (std::size_t i = 0; i < q; ++i) {
        const T g = T(2) * upstream * (z[i] - p[i]);
        if (!dz.empty()) dz[i] += g;
        if (!dp.empty()) dp[i] -= g;
      }
      return;
    case Metric::l1:
      for (std::size_t i = 0; i < q; ++i) {
        const T diff = z[i] - p[i];
        const T g = diff > T(0) ? upstream : (diff < T(0) ? -upstream : T(0));
        if (!dz.empty()) dz[i] += g;
        if (!dp.empty()) dp[i] -= g;
      }
      return;
    case Metric::cosine: {
      const auto c = cosine_parts(z, p);
      const double nz = std::sqrt(c.zz), np = std::sqrt(c.pp);
      const double cos = c.dot / (nz * np);
      // d(1 - cos)/dz = -(p / (|z||p|) - cos * z / |z|^2), symmetric in p.
      for (std::size_t i = 0; i < q; ++i) {
        if (!dz.empty()) dz[i] += static_cast<T>(-upstream * (p[i] / (nz * np) - cos * z[i] / c.zz));
        if (!dp.empty()) dp[i] += static_cast<T>(-upstream * (z[i] / (nz * np) - cos * p[i] / c.pp));
      }
      return;
    }
  }
}

template <typename T>
Tensor<T> pm_layer(const Tensor<T>& features, const Tensor<T>& prototypes, Metric metric) {
  const Tensor<T> z = features.rank() == 1 ? features.reshaped(Shape{1, features.size()}) : features;
  if (z.rank() != 2 || prototypes.rank() != 2 || z.dim(1) != prototypes.dim(1)) {
    throw DimensionError("pm_layer: features " + shape_to_string(features.shape()) + " vs prototypes " +
                         shape_to_string(prototypes.shape()));
  }
  const std::size_t n = z.dim(0), m = prototypes.dim(0);
  Tensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.data()[i * m + j] = distance<T>(z.row(i), prototypes.row(j), metric);
  return out;
}

template float distance<float>(std::span<const float>, std::span<const float>, Metric);
template double distance<double>(std::span<const double>, std::span<const double>, Metric);
template void distance_backward<float>(std::span<const float>, std::span<const float>, Metric, float,
                                       std::span<float>, std::span<float>);
template void distance_backward<double>(std::span<const double>, std::span<const double>, Metric, double,
                                        std::span<double>, std::span<double>);
template Tensor<float> pm_layer<float>(const Tensor<float>&, const Tensor<float>&, Metric);
template Tensor<double> pm_layer<double>(const Tensor<double>&, const Tensor<double>&, Metric);

}  // namespace pmn
