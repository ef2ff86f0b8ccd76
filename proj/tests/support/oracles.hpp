#pragma once

// Independent reference implementations used as test oracles. Written for
// clarity, not speed, and sharing no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "pmn/model.hpp"
#include "pmn/rng.hpp"
#include "pmn/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat naive_matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// y[o][t] = b[o] + sum_c sum_k w[o][c][k] x[c][t*s + k - pad], zero outside.
inline Mat direct_conv1d(const Mat& x, const std::vector<Mat>& w, const std::vector<double>& bias, std::size_t stride,
                         std::size_t pad) {
  const long len = static_cast<long>(x[0].size());
  const long k = static_cast<long>(w[0][0].size());
  const long out = (len + 2 * static_cast<long>(pad) - k) / static_cast<long>(stride) + 1;
  Mat y(w.size(), std::vector<double>(static_cast<std::size_t>(out), 0.0));
  for (std::size_t o = 0; o < w.size(); ++o)
    for (long t = 0; t < out; ++t) {
      double acc = bias[o];
      for (std::size_t c = 0; c < x.size(); ++c)
        for (long j = 0; j < k; ++j) {
          const long pos = t * static_cast<long>(stride) + j - static_cast<long>(pad);
          if (pos >= 0 && pos < len) acc += w[o][c][static_cast<std::size_t>(j)] * x[c][static_cast<std::size_t>(pos)];
        }
      y[o][static_cast<std::size_t>(t)] = acc;
    }
  return y;
}

// Scatter form of the transposed convolution; w is [in][out][k].
inline Mat direct_deconv1d(const Mat& x, const std::vector<Mat>& w, const std::vector<double>& bias, std::size_t stride,
                           std::size_t pad) {
  const long len = static_cast<long>(x[0].size());
  const long k = static_cast<long>(w[0][0].size());
  const long out = (len - 1) * static_cast<long>(stride) - 2 * static_cast<long>(pad) + k;
  Mat y(bias.size(), std::vector<double>(static_cast<std::size_t>(out)));
  for (std::size_t o = 0; o < bias.size(); ++o) std::fill(y[o].begin(), y[o].end(), bias[o]);
  for (std::size_t c = 0; c < x.size(); ++c)
    for (long t = 0; t < len; ++t)
      for (std::size_t o = 0; o < bias.size(); ++o)
        for (long j = 0; j < k; ++j) {
          const long pos = t * static_cast<long>(stride) + j - static_cast<long>(pad);
          if (pos >= 0 && pos < out) y[o][static_cast<std::size_t>(pos)] += w[c][o][static_cast<std::size_t>(j)] * x[c][static_cast<std::size_t>(t)];
        }
  return y;
}

inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(a), std::sin(a));
    }
    out[k] = acc;
  }
  return out;
}

inline double dist(const std::vector<double>& a, const std::vector<double>& b, pmn::Metric m) {
  double s = 0.0, dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (m == pmn::Metric::sq_l2) s += (a[i] - b[i]) * (a[i] - b[i]);
    if (m == pmn::Metric::l1) s += std::abs(a[i] - b[i]);
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (m == pmn::Metric::cosine) return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
  return s;
}

// Exhaustive evaluation of the three min-distance regularizers.
inline double brute_r1(const Mat& z, const Mat& p, pmn::Metric m) {
  double total = 0.0;
  for (const auto& zi : z) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& pj : p) best = std::min(best, dist(zi, pj, m));
    total += best;
  }
  return total / static_cast<double>(z.size());
}

inline double brute_r2(const Mat& z, const Mat& p, pmn::Metric m) {
  double total = 0.0;
  for (const auto& pj : p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& zi : z) best = std::min(best, dist(zi, pj, m));
    total += best;
  }
  return total / static_cast<double>(p.size());
}

inline double brute_r3(const Mat& p, pmn::Metric m) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.size(); ++j)
      if (j != i) best = std::min(best, dist(p[i], p[j], m));
    total += best;
  }
  return -total / static_cast<double>(p.size());
}

inline double brute_cross_entropy(const Mat& probs, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) total -= std::log(std::max(probs[i][static_cast<std::size_t>(labels[i])], 1e-12));
  return total / static_cast<double>(probs.size());
}

inline double brute_mse(const Mat& x, const Mat& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j) total += (x[i][j] - y[i][j]) * (x[i][j] - y[i][j]);
  return total / static_cast<double>(x.size());
}

inline Mat to_mat(const pmn::Tensor<double>& t) {
  Mat m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at({i, j});
  return m;
}

inline pmn::Tensor<double> random_tensor(pmn::Shape shape, pmn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  pmn::Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero gradients from
// turning rounding noise into large relative errors.
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central difference of f with respect to every entry of `target`.
inline std::vector<double> numeric_gradient(pmn::Tensor<double>& target, const std::function<double()>& f,
                                            double step = 1e-6) {
  std::vector<double> g(target.size());
  auto v = target.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double saved = v[i];
    v[i] = saved + step;
    const double up = f();
    v[i] = saved - step;
    const double down = f();
    v[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace oracle
