// pmtl/backend/whitener.hpp

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

#include "pmtl/backend/linalg.hpp"

#include <algorithm>
#include <vector>

namespace pmtl {

/// Centering plus symmetric whitening, fitted on a set of embeddings (rows).
struct Whitener {
  Eigen::VectorXd mean;
  Eigen::MatrixXd transform;  // C^{-1/2}

  /// Whitened embedding, not length-normalized.
  Eigen::VectorXd whiten(const Eigen::VectorXd& e) const {
    if (e.size() != mean.size())
      throw DimensionError("whitener: embedding has " + std::to_string(e.size()) + " dims, expected " +
                           std::to_string(mean.size()));
    return transform * (e - mean);
  }
};

/// Needs at least D+1 rows. Population covariance (divisor n); eigenvalues
/// below the floor are clamped with a warning.
inline Whitener fit_whitener(const Eigen::MatrixXd& embeddings) {
  const Eigen::Index n = embeddings.rows(), dim = embeddings.cols();
  if (dim < 1) throw DimensionError("fit_whitener: zero-dimensional embeddings");
  if (n < dim + 1)
    throw ValidationError("fit_whitener: need at least " + std::to_string(dim + 1) + " embeddings, got " +
                          std::to_string(n));
  Whitener w;
  w.mean = embeddings.colwise().mean().transpose();
  Eigen::MatrixXd centered = embeddings.rowwise() - w.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  SymmetricSpectrum spec(cov);
  if (spec.floored > 0)
    warn("fit_whitener: covariance is rank deficient; " + std::to_string(spec.floored) +
         " eigenvalue(s) floored at 1e-8");
  w.transform = spec.inverse_sqrt();
  return w;
}

/// Whitening followed by length normalization.
inline Eigen::VectorXd apply_whitener(const Whitener& w, const Eigen::VectorXd& e) {
  Eigen::VectorXd out = w.whiten(e);
  const double norm = out.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("apply_whitener: embedding whitens to the zero vector");
  return out / norm;
}

inline double cosine_score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DimensionError("cosine_score: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw ValidationError("cosine_score: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

/// Mean of a speaker-phrase model's enrollment embeddings, length-normalized.
inline Eigen::VectorXd enroll_model(const std::vector<Eigen::VectorXd>& embeddings) {
  if (embeddings.empty()) throw EmptyInputError("enroll_model: no enrollment embeddings");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(embeddings.front().size());
  for (const auto& e : embeddings) {
    if (e.size() != mean.size()) throw DimensionError("enroll_model: dimension mismatch");
    mean += e;
  }
  mean /= static_cast<double>(embeddings.size());
  const double norm = mean.norm();
  if (!(norm > 0.0)) throw NumericError("enroll_model: enrollment mean is the zero vector");
  return mean / norm;
}

}  // namespace pmtl
