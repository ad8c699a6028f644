// pmtl/numeric/ops.hpp

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

#include "pmtl/common.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace pmtl {

/// Axis along which softmax normalizes. `time` normalizes each column over
/// frames; `channel` normalizes each row over channels.
enum class Axis { time, channel };

/// Variance floor used when differentiating a standard deviation.
inline constexpr double kVarianceFloor = 1e-10;

template <class T>
struct AffineGrads {
  Matrix<T> dx;
  Matrix<T> dw;
  RowVector<T> db;
};

template <class T>
void check_affine_shapes(const Matrix<T>& x, const Matrix<T>& w, const RowVector<T>& b) {
  if (x.cols() != w.rows())
    throw DimensionError("affine: input X is " + shape_str(x.rows(), x.cols()) + " but weight W is " +
                         shape_str(w.rows(), w.cols()));
  if (b.cols() != w.cols())
    throw DimensionError("affine: bias b has length " + std::to_string(b.cols()) + " but weight W has " +
                         std::to_string(w.cols()) + " outputs");
}

/// Y[t] = X[t] W + b.
template <class T>
Matrix<T> affine(const Matrix<T>& x, const Matrix<T>& w, const RowVector<T>& b) {
  check_affine_shapes(x, w, b);
  Matrix<T> y = x * w;
  y.rowwise() += b;
  return y;
}

template <class T>
AffineGrads<T> affine_backward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& dy) {
  if (dy.rows() != x.rows() || dy.cols() != w.cols())
    throw DimensionError("affine_backward: upstream gradient is " + shape_str(dy.rows(), dy.cols()));
  AffineGrads<T> g;
  g.dx = dy * w.transpose();
  g.dw = x.transpose() * dy;
  g.db = dy.colwise().sum();
  return g;
}

/// Max-subtracted softmax along `axis`.
template <class T>
Matrix<T> softmax(const Matrix<T>& x, Axis axis) {
  using std::exp;
  Matrix<T> y(x.rows(), x.cols());
  if (axis == Axis::channel) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      T mx = x.row(r).maxCoeff();
      T sum = 0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        y(r, c) = exp(x(r, c) - mx);
        sum += y(r, c);
      }
      y.row(r) /= sum;
    }
  } else {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      T mx = x.col(c).maxCoeff();
      T sum = 0;
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        y(r, c) = exp(x(r, c) - mx);
        sum += y(r, c);
      }
      y.col(c) /= sum;
    }
  }
  return y;
}

/// Gradient of softmax given its output `y` and the upstream gradient `dy`.
template <class T>
Matrix<T> softmax_backward(const Matrix<T>& y, const Matrix<T>& dy, Axis axis) {
  Matrix<T> prod = y.cwiseProduct(dy);
  Matrix<T> dx(y.rows(), y.cols());
  if (axis == Axis::channel) {
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      T dot = prod.row(r).sum();
      dx.row(r) = prod.row(r) - dot * y.row(r);
    }
  } else {
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      T dot = prod.col(c).sum();
      dx.col(c) = prod.col(c) - dot * y.col(c);
    }
  }
  return dx;
}

inline void check_offsets(std::span<const int> offsets) {
  if (offsets.empty()) throw ValidationError("splice: offsets must be nonempty");
  if (!std::is_sorted(offsets.begin(), offsets.end()))
    throw ValidationError("splice: offsets must be sorted");
}

inline Eigen::Index clamp_frame(Eigen::Index t, int offset, Eigen::Index frames) {
  return std::clamp<Eigen::Index>(t + offset, 0, frames - 1);
}

/// Row t of the result concatenates X[t+o] for each offset o. Frames outside
/// [0, T) are clamped to the nearest edge frame.
template <class T>
Matrix<T> splice(const Matrix<T>& x, std::span<const int> offsets) {
  if (x.rows() == 0) throw EmptyInputError("splice: input has no frames");
  check_offsets(offsets);
  const Eigen::Index frames = x.rows(), dim = x.cols();
  const auto width = static_cast<Eigen::Index>(offsets.size());
  Matrix<T> y(frames, dim * width);
  for (Eigen::Index t = 0; t < frames; ++t)
    for (Eigen::Index k = 0; k < width; ++k)
      y.block(t, k * dim, 1, dim) = x.row(clamp_frame(t, offsets[k], frames));
  return y;
}

/// Scatter-add inverse of splice; clamped edge frames accumulate.
template <class T>
Matrix<T> splice_backward(const Matrix<T>& dy, Eigen::Index dim, std::span<const int> offsets) {
  const Eigen::Index frames = dy.rows();
  const auto width = static_cast<Eigen::Index>(offsets.size());
  if (dy.cols() != dim * width)
    throw DimensionError("splice_backward: upstream gradient has " + std::to_string(dy.cols()) +
                         " columns, expected " + std::to_string(dim * width));
  Matrix<T> dx = Matrix<T>::Zero(frames, dim);
  for (Eigen::Index t = 0; t < frames; ++t)
    for (Eigen::Index k = 0; k < width; ++k)
      dx.row(clamp_frame(t, offsets[k], frames)) += dy.block(t, k * dim, 1, dim);
  return dx;
}

/// Per-column mean followed by per-column population standard deviation.
template <class T>
RowVector<T> stats_pool(const Matrix<T>& x) {
  using std::sqrt;
  if (x.rows() == 0) throw EmptyInputError("stats_pool: input has no frames");
  const Eigen::Index frames = x.rows(), dim = x.cols();
  RowVector<T> out(2 * dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    T mean = x.col(c).sum() / static_cast<T>(frames);
    T var = (x.col(c).array() - mean).square().sum() / static_cast<T>(frames);
    out(c) = mean;
    out(dim + c) = sqrt(std::max(var, T(0)));
  }
  return out;
}

/// The forward std is exact; the variance floor only guards 1/sigma here.
template <class T>
Matrix<T> stats_pool_backward(const Matrix<T>& x, const RowVector<T>& out, const RowVector<T>& dout) {
  using std::sqrt;
  const Eigen::Index frames = x.rows(), dim = x.cols();
  if (dout.cols() != 2 * dim) throw DimensionError("stats_pool_backward: upstream gradient length mismatch");
  Matrix<T> dx(frames, dim);
  const T inv_t = T(1) / static_cast<T>(frames);
  for (Eigen::Index c = 0; c < dim; ++c) {
    const T mean = out(c);
    const T sigma = out(dim + c);
    const T safe_sigma = sqrt(std::max(sigma * sigma, T(kVarianceFloor)));
    const T dvar = dout(dim + c) / (T(2) * safe_sigma);
    for (Eigen::Index t = 0; t < frames; ++t)
      dx(t, c) = dout(c) * inv_t + dvar * T(2) * (x(t, c) - mean) * inv_t;
  }
  return dx;
}

template <class T>
Matrix<T> relu(const Matrix<T>& x) {
  return x.cwiseMax(T(0));
}

template <class T>
Matrix<T> relu_backward(const Matrix<T>& y, const Matrix<T>& dy) {
  return (y.array() > T(0)).select(dy, T(0));
}

template <class T>
T sigmoid(T v) {
  using std::exp;
  if (v >= T(0)) return T(1) / (T(1) + exp(-v));
  T e = exp(v);
  return e / (T(1) + e);
}

template <class T>
Matrix<T> sigmoid(const Matrix<T>& x) {
  return x.unaryExpr([](T v) { return sigmoid(v); });
}

template <class T>
Matrix<T> sigmoid_backward(const Matrix<T>& y, const Matrix<T>& dy) {
  return dy.cwiseProduct(y.cwiseProduct((T(1) - y.array()).matrix()));
}

/// Converts between scalar precisions.
template <class To, class From>
Matrix<To> cast(const Matrix<From>& m) {
  return m.template cast<To>();
}

}  // namespace pmtl
