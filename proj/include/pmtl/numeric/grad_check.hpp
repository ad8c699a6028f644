// pmtl/numeric/grad_check.hpp

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

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace pmtl {

/// Precision used by the finite-difference harness.
using GradReal = long double;

/// A differentiable operation over a list of matrix inputs (parameters count
/// as inputs). `backward` receives the inputs and the upstream gradient of
/// the output and returns one gradient per input, shaped like that input.
template <class T>
struct DiffOp {
  std::string name;
  std::function<Matrix<T>(const std::vector<Matrix<T>>&)> forward;
  std::function<std::vector<Matrix<T>>(const std::vector<Matrix<T>>&, const Matrix<T>&)> backward;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  bool finite = true;
  std::size_t worst_input = 0;
  Eigen::Index worst_coordinate = 0;
  std::string message;

  bool passed(double tolerance) const { return finite && max_relative_error < tolerance; }
};

/// Compares the analytic gradient of <R, op(inputs)> against central
/// differences, for a fixed random projection R drawn from `seed`.
/// Returns max |analytic - numeric| / max(1, |numeric|) over all coordinates.
template <class T>
GradCheckResult grad_check(const DiffOp<T>& op, std::vector<Matrix<T>> inputs, double epsilon,
                           std::uint64_t seed = 17) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-4))
    throw ValidationError("grad_check: epsilon must lie in [1e-6, 1e-4]");
  GradCheckResult result;

  const Matrix<T> y0 = op.forward(inputs);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<T> proj(y0.rows(), y0.cols());
  for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = static_cast<T>(normal(rng));

  // Projected central difference taken entry by entry. Output entries that a
  // perturbation leaves bit-identical contribute exactly zero, so a
  // non-finite value elsewhere in the output does not poison the estimate.
  auto projected_difference = [&](const Matrix<T>& plus, const Matrix<T>& minus, bool& finite) -> T {
    using std::isfinite;
    T sum = 0;
    for (Eigen::Index j = 0; j < plus.size(); ++j) {
      const T a = plus.data()[j], b = minus.data()[j];
      if (a == b) continue;
      if (!isfinite(a) || !isfinite(b)) {
        finite = false;
        return T(0);
      }
      sum += proj.data()[j] * (a - b);
    }
    return sum;
  };

  const std::vector<Matrix<T>> analytic = op.backward(inputs, proj);
  if (analytic.size() != inputs.size())
    throw DimensionError("grad_check: '" + op.name + "' backward returned wrong number of gradients");

  const T eps = static_cast<T>(epsilon);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (analytic[k].rows() != inputs[k].rows() || analytic[k].cols() != inputs[k].cols())
      throw DimensionError("grad_check: '" + op.name + "' gradient " + std::to_string(k) + " has wrong shape");
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      T& coord = inputs[k].data()[i];
      const T saved = coord;
      coord = saved + eps;
      const Matrix<T> plus = op.forward(inputs);
      coord = saved - eps;
      const Matrix<T> minus = op.forward(inputs);
      coord = saved;
      using std::isfinite;
      bool finite = isfinite(analytic[k].data()[i]);
      const T diff = finite ? projected_difference(plus, minus, finite) : T(0);
      if (!finite) {
        result.finite = false;
        result.max_relative_error = std::numeric_limits<double>::infinity();
        result.worst_input = k;
        result.worst_coordinate = i;
        result.message = "non-finite value when perturbing input " + std::to_string(k) + " coordinate " +
                         std::to_string(i);
        return result;
      }
      const T numeric = diff / (T(2) * eps);
      using std::abs;
      const T denom = std::max<T>(T(1), abs(numeric));
      const double err = static_cast<double>(abs(analytic[k].data()[i] - numeric) / denom);
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_input = k;
        result.worst_coordinate = i;
      }
    }
  }
  return result;
}

/// Fills a matrix with N(0, sd^2) draws.
template <class T, class Rng>
Matrix<T> random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(normal(rng));
  return m;
}

}  // namespace pmtl
