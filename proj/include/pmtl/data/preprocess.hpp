// pmtl/data/preprocess.hpp

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
#include <vector>

namespace pmtl {

/// Sliding-window cepstral mean normalization. The window holds
/// min(window_frames, T) frames, is centered on the current frame where
/// possible and shifted inward at the utterance edges, so utterances no
/// longer than the window get plain global mean subtraction.
template <class T>
Matrix<T> sliding_cmn(const Matrix<T>& x, Eigen::Index window_frames = 300) {
  if (x.rows() < 1) throw EmptyInputError("sliding_cmn: no frames");
  if (window_frames < 1) throw ValidationError("sliding_cmn: window must be >= 1 frame");
  const Eigen::Index frames = x.rows(), dim = x.cols();
  const Eigen::Index len = std::min(window_frames, frames);
  // Prefix sums in double keep long windows accurate for float input.
  Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(frames + 1, dim);
  for (Eigen::Index t = 0; t < frames; ++t)
    prefix.row(t + 1) = prefix.row(t) + x.row(t).template cast<double>();
  Matrix<T> y(frames, dim);
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Index start = std::clamp<Eigen::Index>(t - window_frames / 2, 0, frames - len);
    Eigen::RowVectorXd mean = (prefix.row(start + len) - prefix.row(start)) / static_cast<double>(len);
    y.row(t) = x.row(t) - mean.cast<T>();
  }
  return y;
}

/// Energy / zero-crossing voice activity decision per frame. The energy
/// threshold is relative: a frame is compared against
/// energy_thresh * mean(energy). A frame is kept iff its energy exceeds that
/// threshold, or it exceeds half of it while its zero-crossing rate exceeds
/// zcr_thresh.
inline std::vector<bool> vad_mask(const std::vector<double>& energy, const std::vector<double>& zcr,
                                  double energy_thresh, double zcr_thresh) {
  if (energy.empty()) throw EmptyInputError("vad_mask: no frames");
  if (zcr.size() != energy.size()) throw DimensionError("vad_mask: energy and zcr lengths differ");
  if (!std::isfinite(energy_thresh) || !std::isfinite(zcr_thresh))
    throw ValidationError("vad_mask: thresholds must be finite");
  double mean = 0.0;
  for (double e : energy) mean += e;
  mean /= static_cast<double>(energy.size());
  const double th = energy_thresh * mean;
  std::vector<bool> keep(energy.size());
  for (std::size_t t = 0; t < energy.size(); ++t)
    keep[t] = energy[t] > th || (energy[t] > 0.5 * th && zcr[t] > zcr_thresh);
  return keep;
}

/// Keeps the frames selected by `mask`.
template <class T>
Matrix<T> select_frames(const Matrix<T>& x, const std::vector<bool>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != x.rows()) throw DimensionError("select_frames: mask length");
  Eigen::Index kept = std::count(mask.begin(), mask.end(), true);
  Matrix<T> y(kept, x.cols());
  Eigen::Index r = 0;
  for (Eigen::Index t = 0; t < x.rows(); ++t)
    if (mask[t]) y.row(r++) = x.row(t);
  return y;
}

}  // namespace pmtl
