// pmtl/backend/linalg.hpp

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

namespace pmtl {

/// Eigenvalue floor applied wherever a covariance is inverted.
inline constexpr double kEigenFloor = 1e-8;

/// Symmetric eigendecomposition based functions with eigenvalues floored at
/// kEigenFloor.
struct SymmetricSpectrum {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;  // floored
  int floored = 0;
  double min_raw = 0.0;  // smallest eigenvalue before flooring

  explicit SymmetricSpectrum(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
    vectors = es.eigenvectors();
    values = es.eigenvalues();
    min_raw = values.size() ? values.minCoeff() : 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i)
      if (!(values(i) >= kEigenFloor)) {
        values(i) = kEigenFloor;
        ++floored;
      }
  }

  Eigen::MatrixXd inverse() const { return vectors * values.cwiseInverse().asDiagonal() * vectors.transpose(); }
  Eigen::MatrixXd inverse_sqrt() const {
    return vectors * values.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
  }
  double log_det() const { return values.array().log().sum(); }
};

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace pmtl
