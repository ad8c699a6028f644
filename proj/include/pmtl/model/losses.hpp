// pmtl/model/losses.hpp

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

#include "pmtl/model/network.hpp"

#include <cmath>
#include <vector>

namespace pmtl {

/// Training targets for one segment.
struct LabelBundle {
  int speaker = 0;
  std::vector<int> frame_phonemes;        // y^pf, one per frame
  std::vector<double> segment_phonemes;   // y^ps, on the simplex
};

template <class T>
struct Losses {
  T speaker = 0;           // L_s
  T frame_phonetic = 0;    // L_pf
  T segment_phonetic = 0;  // L_ps
  T total = 0;
};

namespace detail {

template <class T>
RowVector<T> log_softmax(const RowVector<T>& z) {
  using std::exp;
  using std::log;
  const T mx = z.maxCoeff();
  T sum = 0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) sum += exp(z(i) - mx);
  return (z.array() - mx - log(sum)).matrix();
}

}  // namespace detail

inline void validate_labels(const LabelBundle& y, const NetworkConfig& cfg, Eigen::Index frames) {
  if (y.speaker < 0 || y.speaker >= cfg.num_speakers)
    throw ValidationError("speaker label " + std::to_string(y.speaker) + " outside [0, " +
                          std::to_string(cfg.num_speakers) + ")");
  if (cfg.use_frame_phonetic) {
    if (static_cast<Eigen::Index>(y.frame_phonemes.size()) != frames)
      throw ValidationError("frame label count " + std::to_string(y.frame_phonemes.size()) + " != frames " +
                            std::to_string(frames));
    for (int l : y.frame_phonemes)
      if (l < 0 || l >= cfg.num_phonemes) throw ValidationError("frame phoneme label " + std::to_string(l) + " out of range");
  }
  if (cfg.use_segment_adversarial) {
    if (static_cast<Eigen::Index>(y.segment_phonemes.size()) != cfg.num_phonemes)
      throw ValidationError("segment phoneme distribution has wrong length");
    double sum = 0.0;
    for (double v : y.segment_phonemes) {
      if (v < 0) throw ValidationError("segment phoneme distribution has a negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("segment phoneme distribution does not sum to 1");
  }
}

/// Cross-entropy speaker loss, frame-averaged phoneme cross-entropy and
/// KL(y^ps || softmax(segment logits)), combined as
/// L_s + alpha * L_pf + beta * L_ps. Disabled heads contribute zero.
/// When `grads` is given it receives dL_total / d(head logits).
template <class T>
Losses<T> compute_losses(const ForwardOutputs<T>& out, const LabelBundle& y, const NetworkConfig& cfg,
                      OutputGrads<T>* grads = nullptr) {
  using std::exp;
  using std::log;
  const Eigen::Index frames = out.frame_phoneme_logits ? out.frame_phoneme_logits->rows()
                                                        : static_cast<Eigen::Index>(y.frame_phonemes.size());
  validate_labels(y, cfg, frames);
  Losses<T> l;

  RowVector<T> lsm = detail::log_softmax(out.speaker_logits);
  l.speaker = -lsm(y.speaker);
  if (grads) {
    grads->speaker_logits = lsm.array().exp().matrix();
    grads->speaker_logits(y.speaker) -= T(1);
  }

  if (cfg.use_frame_phonetic) {
    if (!out.frame_phoneme_logits) throw ValidationError("compute_losses: frame phonetic outputs missing");
    const Matrix<T>& z = *out.frame_phoneme_logits;
    T sum = 0;
    Matrix<T> dz(z.rows(), z.cols());
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
      RowVector<T> row_lsm = detail::log_softmax(RowVector<T>(z.row(t)));
      sum -= row_lsm(y.frame_phonemes[t]);
      dz.row(t) = row_lsm.array().exp().matrix();
      dz(t, y.frame_phonemes[t]) -= T(1);
    }
    const T inv_t = T(1) / static_cast<T>(z.rows());
    l.frame_phonetic = sum * inv_t;
    if (grads) grads->frame_phoneme_logits = (static_cast<T>(cfg.alpha) * inv_t) * dz;
  }

  if (cfg.use_segment_adversarial) {
    if (!out.segment_phoneme_logits) throw ValidationError("compute_losses: segment phonetic outputs missing");
    RowVector<T> lq = detail::log_softmax(*out.segment_phoneme_logits);
    T kl = 0;
    for (Eigen::Index k = 0; k < lq.cols(); ++k) {
      const T target = static_cast<T>(y.segment_phonemes[k]);
      if (target > T(0)) kl += target * (log(target) - lq(k));
    }
    l.segment_phonetic = kl;
    if (grads) {
      RowVector<T> d(lq.cols());
      for (Eigen::Index k = 0; k < lq.cols(); ++k) d(k) = exp(lq(k)) - static_cast<T>(y.segment_phonemes[k]);
      grads->segment_phoneme_logits = static_cast<T>(cfg.beta) * d;
    }
  }

  l.total = l.speaker + static_cast<T>(cfg.alpha) * l.frame_phonetic + static_cast<T>(cfg.beta) * l.segment_phonetic;
  return l;
}

}  // namespace pmtl
