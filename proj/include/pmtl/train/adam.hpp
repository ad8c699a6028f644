// pmtl/train/adam.hpp

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

#include "pmtl/numeric/param.hpp"

#include <cmath>
#include <vector>

namespace pmtl {

template <class T>
struct AdamState {
  std::vector<Matrix<T>> m;
  std::vector<Matrix<T>> v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-3;

  /// Zero moments shaped like `params`.
  static AdamState for_params(const ParamStore<T>& params, double lr = 1e-3) {
    AdamState s;
    s.lr = lr;
    for (const auto& p : params) {
      s.m.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
      s.v.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
    }
    return s;
  }
};

/// Bias-corrected Adam update using the gradients stored in `params`.
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& state) {
  using std::sqrt;
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw DimensionError("adam_step: optimizer state does not match parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (state.m[i].rows() != p.value.rows() || state.m[i].cols() != p.value.cols())
      throw DimensionError("adam_step: moment shape mismatch for '" + p.name + "'");
    if (!p.grad.allFinite()) throw NumericError("adam_step: non-finite gradient in parameter '" + p.name + "'");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T lr = static_cast<T>(state.lr), eps = static_cast<T>(state.eps);
  const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const T g = p.grad.data()[k];
      T& mk = m.data()[k];
      T& vk = v.data()[k];
      mk = b1 * mk + (T(1) - b1) * g;
      vk = b2 * vk + (T(1) - b2) * g * g;
      const T mhat = mk * inv_c1;
      const T vhat = vk * inv_c2;
      p.value.data()[k] -= lr * mhat / (sqrt(vhat) + eps);
    }
  }
}

}  // namespace pmtl
