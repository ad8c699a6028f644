// pmtl/nn/layers.hpp

// Copyright 2026  The pmtl Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "pmtl/numeric/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace pmtl {

enum class Activation { identity, relu };

/// One time-delay layer: splice over `offsets`, affine in_dim*|offsets| -> out_dim,
/// then the activation. SE recalibration is applied by the caller when
/// `use_se` is set.
struct TdnnLayerSpec {
  std::vector<int> offsets{0};
  Eigen::Index in_dim = 1;
  Eigen::Index out_dim = 1;
  bool use_se = false;
  Activation activation = Activation::relu;

  Eigen::Index spliced_dim() const { return in_dim * static_cast<Eigen::Index>(offsets.size()); }

  void validate() const {
    if (in_dim < 1 || out_dim < 1) throw ValidationError("tdnn: dimensions must be >= 1");
    check_offsets(offsets);
  }
};

template <class T>
struct TdnnCache {
  Matrix<T> spliced;
  Matrix<T> output;
};

template <class T>
Matrix<T> tdnn_forward(const Matrix<T>& x, const TdnnLayerSpec& spec, const Matrix<T>& w, const RowVector<T>& b,
                       TdnnCache<T>* cache = nullptr) {
  spec.validate();
  if (x.cols() != spec.in_dim)
    throw DimensionError("tdnn: input has " + std::to_string(x.cols()) + " columns, layer expects " +
                         std::to_string(spec.in_dim));
  if (w.rows() != spec.spliced_dim() || w.cols() != spec.out_dim)
    throw DimensionError("tdnn: weight is " + shape_str(w.rows(), w.cols()) + ", layer expects " +
                         shape_str(spec.spliced_dim(), spec.out_dim));
  Matrix<T> spliced = splice(x, spec.offsets);
  Matrix<T> y = affine(spliced, w, b);
  if (spec.activation == Activation::relu) y = relu(y);
  if (cache) {
    cache->spliced = std::move(spliced);
    cache->output = y;
  }
  return y;
}

/// Returns gradients w.r.t. the unspliced input, the weight and the bias.
template <class T>
AffineGrads<T> tdnn_backward(const TdnnCache<T>& cache, const TdnnLayerSpec& spec, const Matrix<T>& w,
                             const Matrix<T>& dy) {
  Matrix<T> dpre = spec.activation == Activation::relu ? relu_backward(cache.output, dy) : dy;
  AffineGrads<T> g = affine_backward(cache.spliced, w, dpre);
  g.dx = splice_backward(g.dx, spec.in_dim, spec.offsets);
  return g;
}

/// Squeeze-and-excitation: stats pooling (2C) -> rectified bottleneck
/// (C/r) -> sigmoid gates (C) -> channel-wise scaling.
struct SeBlockSpec {
  Eigen::Index channels = 1;
  Eigen::Index reduction_ratio = 4;

  Eigen::Index bottleneck() const { return std::max<Eigen::Index>(1, channels / reduction_ratio); }

  void validate() const {
    if (channels < 1 || reduction_ratio < 1) throw ValidationError("se: channels and ratio must be >= 1");
  }
};

template <class T>
struct SeParams {
  const Matrix<T>& w1;  // 2C x C/r
  const RowVector<T>& b1;
  const Matrix<T>& w2;  // C/r x C
  const RowVector<T>& b2;
};

template <class T>
struct SeCache {
  Matrix<T> input;
  RowVector<T> stats;
  Matrix<T> hidden;  // 1 x C/r, post-rectifier
  Matrix<T> gates;   // 1 x C
};

template <class T>
struct SeGrads {
  Matrix<T> dx;
  Matrix<T> dw1;
  RowVector<T> db1;
  Matrix<T> dw2;
  RowVector<T> db2;
};

template <class T>
Matrix<T> se_forward(const Matrix<T>& o, const SeBlockSpec& spec, const SeParams<T>& p, SeCache<T>* cache = nullptr) {
  spec.validate();
  if (o.cols() != spec.channels)
    throw DimensionError("se: input has " + std::to_string(o.cols()) + " channels, block expects " +
                         std::to_string(spec.channels));
  RowVector<T> s = stats_pool(o);
  Matrix<T> hidden = relu(affine(Matrix<T>(s), p.w1, p.b1));
  Matrix<T> gates = sigmoid(affine(hidden, p.w2, p.b2));
  Matrix<T> y = o.array().rowwise() * gates.row(0).array();
  if (cache) {
    cache->input = o;
    cache->stats = std::move(s);
    cache->hidden = std::move(hidden);
    cache->gates = std::move(gates);
  }
  return y;
}

template <class T>
SeGrads<T> se_backward(const SeCache<T>& cache, const SeParams<T>& p, const Matrix<T>& dy) {
  SeGrads<T> g;
  // Direct path through the scaling.
  g.dx = dy.array().rowwise() * cache.gates.row(0).array();
  Matrix<T> dgates = dy.cwiseProduct(cache.input).colwise().sum();
  Matrix<T> dgate_pre = sigmoid_backward(cache.gates, dgates);
  AffineGrads<T> a2 = affine_backward(cache.hidden, p.w2, dgate_pre);
  Matrix<T> dhidden_pre = relu_backward(cache.hidden, a2.dx);
  AffineGrads<T> a1 = affine_backward(Matrix<T>(cache.stats), p.w1, dhidden_pre);
  g.dx += stats_pool_backward(cache.input, cache.stats, RowVector<T>(a1.dx.row(0)));
  g.dw1 = std::move(a1.dw);
  g.db1 = std::move(a1.db);
  g.dw2 = std::move(a2.dw);
  g.db2 = std::move(a2.db);
  return g;
}

/// Gradient reversal: identity forward, -lambda * upstream backward.
template <class T>
Matrix<T> grl_forward(const Matrix<T>& x) {
  return x;
}

template <class T>
Matrix<T> grl_backward(const Matrix<T>& dy, double lambda = 1.0) {
  return -static_cast<T>(lambda) * dy;
}

enum class PoolingKind { stats, phone_att_literal, phone_att_weighted };

struct PoolingMode {
  PoolingKind kind = PoolingKind::phone_att_weighted;
  double scale = 1.5;

  bool phoneme_aware() const { return kind != PoolingKind::stats; }
};

inline std::string to_string(PoolingKind k) {
  switch (k) {
    case PoolingKind::stats: return "stats";
    case PoolingKind::phone_att_literal: return "literal";
    case PoolingKind::phone_att_weighted: return "weighted";
  }
  return "?";
}

inline PoolingKind parse_pooling(const std::string& s) {
  if (s == "stats") return PoolingKind::stats;
  if (s == "literal" || s == "phone_att_literal") return PoolingKind::phone_att_literal;
  if (s == "weighted" || s == "phone_att_weighted") return PoolingKind::phone_att_weighted;
  throw ValidationError("unknown pooling mode '" + s + "' (expected stats, literal or weighted)");
}

template <class T>
struct PoolCache {
  Matrix<T> posterior;  // p, T x P
  Matrix<T> features;   // h5, T x P
  Matrix<T> attention;  // softmax over time of p (.) h5, columns sum to 1
  Matrix<T> scaled;     // scale * attention (literal mode only)
  RowVector<T> output;
};

inline constexpr double kSimplexTolerance = 1e-6;

/// Rows must sum to 1 within kSimplexTolerance plus the rounding a
/// P-term sum can accumulate in T.
template <class T>
void check_posterior(const Matrix<T>& p) {
  using std::abs;
  const double tol =
      kSimplexTolerance + static_cast<double>(p.cols()) * static_cast<double>(std::numeric_limits<T>::epsilon());
  for (Eigen::Index t = 0; t < p.rows(); ++t) {
    const double sum = static_cast<double>(p.row(t).sum());
    const double mn = static_cast<double>(p.row(t).minCoeff());
    if (abs(sum - 1.0) > tol || mn < -tol)
      throw ValidationError("phoneme posterior row " + std::to_string(t) + " is not on the simplex (sum " +
                            format_real(sum) + ")");
  }
}

/// Phoneme-aware attentive pooling. The attention logits are the elementwise
/// product of the posterior `p` and the fifth-layer output `h5`; softmax runs
/// over frames separately for every channel and is multiplied by the scale.
///
/// Literal mode returns the statistics of the scaled attention map itself.
/// Weighted mode returns attention-weighted means and standard deviations of
/// `h5`; the per-channel renormalization makes the scale cancel there.
template <class T>
RowVector<T> phoneme_attentive_pool(const Matrix<T>& p, const Matrix<T>& h5, const PoolingMode& mode,
                                    PoolCache<T>* cache = nullptr) {
  using std::sqrt;
  if (!mode.phoneme_aware()) throw ValidationError("phoneme_attentive_pool: mode must be phoneme-aware");
  if (!(mode.scale > 0)) throw ValidationError("phoneme_attentive_pool: scale must be positive");
  if (p.rows() != h5.rows() || p.cols() != h5.cols())
    throw DimensionError("phoneme_attentive_pool: posterior is " + shape_str(p.rows(), p.cols()) +
                         " but features are " + shape_str(h5.rows(), h5.cols()));
  if (p.rows() == 0) throw EmptyInputError("phoneme_attentive_pool: no frames");
  check_posterior(p);

  const Eigen::Index frames = p.rows(), dim = p.cols();
  Matrix<T> att = softmax(Matrix<T>(p.cwiseProduct(h5)), Axis::time);
  RowVector<T> out(2 * dim);
  Matrix<T> scaled;
  if (mode.kind == PoolingKind::phone_att_literal) {
    scaled = static_cast<T>(mode.scale) * att;
    out = stats_pool(scaled);
  } else {
    for (Eigen::Index c = 0; c < dim; ++c) {
      T mean = 0;
      for (Eigen::Index t = 0; t < frames; ++t) mean += att(t, c) * h5(t, c);
      T var = 0;
      for (Eigen::Index t = 0; t < frames; ++t) var += att(t, c) * (h5(t, c) - mean) * (h5(t, c) - mean);
      out(c) = mean;
      out(dim + c) = sqrt(std::max(var, T(0)));
    }
  }
  if (cache) {
    cache->posterior = p;
    cache->features = h5;
    cache->attention = std::move(att);
    cache->scaled = std::move(scaled);
    cache->output = out;
  }
  return out;
}

template <class T>
struct PoolGrads {
  Matrix<T> dposterior;
  Matrix<T> dfeatures;
};

template <class T>
PoolGrads<T> phoneme_attentive_pool_backward(const PoolCache<T>& cache, const PoolingMode& mode,
                                             const RowVector<T>& dout) {
  using std::sqrt;
  const Matrix<T>& att = cache.attention;
  const Matrix<T>& h5 = cache.features;
  const Eigen::Index frames = att.rows(), dim = att.cols();
  if (dout.cols() != 2 * dim) throw DimensionError("phoneme_attentive_pool_backward: gradient length mismatch");

  PoolGrads<T> g;
  Matrix<T> datt(frames, dim);
  if (mode.kind == PoolingKind::phone_att_literal) {
    datt = static_cast<T>(mode.scale) * stats_pool_backward(cache.scaled, cache.output, dout);
    g.dfeatures = Matrix<T>::Zero(frames, dim);
  } else {
    g.dfeatures.resize(frames, dim);
    for (Eigen::Index c = 0; c < dim; ++c) {
      const T mean = cache.output(c);
      const T sigma = cache.output(dim + c);
      const T safe_sigma = sqrt(std::max(sigma * sigma, T(kVarianceFloor)));
      const T dvar = dout(dim + c) / (T(2) * safe_sigma);
      for (Eigen::Index t = 0; t < frames; ++t) {
        const T centered = h5(t, c) - mean;
        datt(t, c) = dout(c) * h5(t, c) + dvar * centered * centered;
        g.dfeatures(t, c) = dout(c) * att(t, c) + dvar * T(2) * att(t, c) * centered;
      }
    }
  }
  Matrix<T> dlogits = softmax_backward(att, datt, Axis::time);
  g.dposterior = dlogits.cwiseProduct(h5);
  g.dfeatures += dlogits.cwiseProduct(cache.posterior);
  return g;
}

}  // namespace pmtl
