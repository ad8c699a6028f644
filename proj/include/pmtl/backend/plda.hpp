// pmtl/backend/plda.hpp

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

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

namespace pmtl {

/// Two-covariance PLDA: speaker variable y ~ N(mean, between), an embedding
/// of that speaker is y + N(0, within).
struct PldaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd between;
  Eigen::MatrixXd within;
  std::vector<double> log_likelihood;  // total-data value before each EM iteration and after the last
};

namespace detail {

struct SpeakerStats {
  int count = 0;
  Eigen::VectorXd sum;
  std::vector<Eigen::Index> rows;
};

inline std::vector<SpeakerStats> group_by_speaker(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  std::map<int, SpeakerStats> by;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto& s = by[labels[static_cast<std::size_t>(i)]];
    if (s.count == 0) s.sum = Eigen::VectorXd::Zero(x.cols());
    ++s.count;
    s.sum += x.row(i).transpose();
    s.rows.push_back(i);
  }
  std::vector<SpeakerStats> out;
  for (auto& [k, s] : by) out.push_back(std::move(s));
  return out;
}

/// Marginal log-likelihood of all embeddings under the model.
inline double plda_log_likelihood(const Eigen::MatrixXd& x, const std::vector<SpeakerStats>& groups,
                                  const Eigen::VectorXd& mu, const Eigen::MatrixXd& b, const Eigen::MatrixXd& w) {
  const double dim = static_cast<double>(x.cols());
  const double log2pi = std::log(2.0 * std::numbers::pi);
  SymmetricSpectrum ws(w);
  const Eigen::MatrixXd w_inv = ws.inverse();
  const double w_logdet = ws.log_det();
  double total = 0.0;
  for (const auto& g : groups) {
    const double n = g.count;
    const Eigen::VectorXd xbar = g.sum / n;
    double scatter = 0.0;
    for (Eigen::Index r : g.rows) {
      Eigen::VectorXd d = x.row(r).transpose() - xbar;
      scatter += d.dot(w_inv * d);
    }
    SymmetricSpectrum ms(b + w / n);
    const Eigen::VectorXd dm = xbar - mu;
    const double log_marg = -0.5 * (dim * log2pi + ms.log_det() + dm.dot(ms.inverse() * dm));
    total += -0.5 * n * dim * log2pi - 0.5 * n * w_logdet - 0.5 * scatter + 0.5 * dim * log2pi +
             0.5 * (w_logdet - dim * std::log(n)) + log_marg;
  }
  return total;
}

}  // namespace detail

/// EM estimation of the two-covariance model from labelled embeddings (rows
/// of `x`, speaker label per row). Needs at least two speakers and at least
/// one speaker with two or more sessions.
inline PldaModel plda_fit(const Eigen::MatrixXd& x, const std::vector<int>& labels, int iterations = 20) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) throw DimensionError("plda_fit: label count mismatch");
  if (x.rows() == 0) throw EmptyInputError("plda_fit: no embeddings");
  const auto groups = detail::group_by_speaker(x, labels);
  if (groups.size() < 2) throw ValidationError("plda_fit: need at least 2 speakers");
  bool repeated = false;
  for (const auto& g : groups) repeated = repeated || g.count >= 2;
  if (!repeated)
    throw ValidationError("plda_fit: every speaker has a single session; within-speaker covariance is unidentifiable");

  const Eigen::Index dim = x.cols();
  const double num_spk = static_cast<double>(groups.size());
  const double num_utt = static_cast<double>(x.rows());

  // Initialization from class means and within-class scatter.
  PldaModel m;
  m.mean = x.colwise().mean().transpose();
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(dim, dim), sb = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& g : groups) {
    const Eigen::VectorXd xbar = g.sum / g.count;
    for (Eigen::Index r : g.rows) {
      Eigen::VectorXd d = x.row(r).transpose() - xbar;
      sw += d * d.transpose();
    }
    Eigen::VectorXd dm = xbar - m.mean;
    sb += dm * dm.transpose();
  }
  m.within = symmetrize(sw / num_utt);
  m.between = symmetrize(sb / num_spk);

  for (int it = 0; it <= iterations; ++it) {
    if (!m.within.allFinite()) throw NumericError("plda_fit: within-speaker covariance became non-finite at iteration " + std::to_string(it));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(m.within, Eigen::EigenvaluesOnly);
    if (check.eigenvalues().minCoeff() <= 0.0)
      throw NumericError("plda_fit: within-speaker covariance is singular at iteration " + std::to_string(it));
    m.log_likelihood.push_back(detail::plda_log_likelihood(x, groups, m.mean, m.between, m.within));
    if (it == iterations) break;

    SymmetricSpectrum bs(m.between), ws(m.within);
    const Eigen::MatrixXd b_inv = bs.inverse(), w_inv = ws.inverse();
    const Eigen::VectorXd b_inv_mu = b_inv * m.mean;
    std::vector<Eigen::VectorXd> post_mean;
    std::vector<Eigen::MatrixXd> post_cov;
    for (const auto& g : groups) {
      SymmetricSpectrum prec(b_inv + g.count * w_inv);
      Eigen::MatrixXd cov = prec.inverse();
      post_mean.push_back(cov * (b_inv_mu + w_inv * g.sum));
      post_cov.push_back(std::move(cov));
    }
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
    for (const auto& pm : post_mean) mu += pm;
    mu /= num_spk;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dim, dim), w = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t s = 0; s < groups.size(); ++s) {
      Eigen::VectorXd dm = post_mean[s] - mu;
      b += post_cov[s] + dm * dm.transpose();
      for (Eigen::Index r : groups[s].rows) {
        Eigen::VectorXd d = x.row(r).transpose() - post_mean[s];
        w += d * d.transpose() + post_cov[s];
      }
    }
    m.mean = mu;
    m.between = symmetrize(b / num_spk);
    m.within = symmetrize(w / num_utt);
  }
  return m;
}

/// Precomputed verification scorer. With total covariance S = B + W, the
/// same-speaker pair covariance is [[S, B], [B, S]] and the
/// different-speaker one is diag(S, S); the log-likelihood ratio is a
/// quadratic form in the centered pair.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& m) : mean_(m.mean) {
    if (m.between.rows() != m.mean.size() || m.within.rows() != m.mean.size())
      throw DimensionError("PldaScorer: model dimensions disagree");
    const Eigen::MatrixXd total = symmetrize(m.between + m.within);
    SymmetricSpectrum ts(total);
    if (!(ts.min_raw > 0.0)) throw NumericError("PldaScorer: B + W is not positive definite");
    const Eigen::MatrixXd total_inv = ts.inverse();
    // Schur complement of the joint same-speaker covariance.
    const Eigen::MatrixXd schur = symmetrize(total - m.between * total_inv * m.between);
    SymmetricSpectrum ss(schur);
    if (!(ss.min_raw > 0.0)) throw NumericError("PldaScorer: joint covariance is not positive definite");
    const Eigen::MatrixXd p = ss.inverse();
    cross_ = -total_inv * m.between * p;
    diag_ = symmetrize(total_inv - p);
    offset_ = -0.5 * (ss.log_det() - ts.log_det());
  }

  double score(const Eigen::VectorXd& enroll, const Eigen::VectorXd& test) const {
    if (enroll.size() != mean_.size() || test.size() != mean_.size())
      throw DimensionError("plda_score: embedding dimension does not match the model");
    const Eigen::VectorXd a = enroll - mean_, b = test - mean_;
    return 0.5 * (a.dot(diag_ * a) + b.dot(diag_ * b)) - a.dot(cross_ * b) + offset_;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd diag_;
  Eigen::MatrixXd cross_;
  double offset_ = 0.0;
};

inline double plda_score(const PldaModel& m, const Eigen::VectorXd& enroll, const Eigen::VectorXd& test) {
  return PldaScorer(m).score(enroll, test);
}

}  // namespace pmtl
