// pmtl/eval/eer.hpp

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
#include <cstdlib>
#include <vector>

namespace pmtl {

struct EerResult {
  double eer = 0.0;        // in [0, 1]
  double threshold = 0.0;
};

/// Equal error rate by threshold sweep. Candidate thresholds are the
/// midpoints of consecutive pooled scores (sorted). At threshold th,
/// FAR = fraction of nontargets >= th and FRR = fraction of targets < th.
/// The first (lowest) threshold minimizing |FAR - FRR| wins and the EER is
/// (FAR + FRR) / 2 there. Ties in the gap are compared exactly.
inline EerResult compute_eer(std::vector<double> targets, std::vector<double> nontargets) {
  if (targets.empty()) throw EmptyInputError("compute_eer: no target scores");
  if (nontargets.empty()) throw EmptyInputError("compute_eer: no nontarget scores");
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());
  std::vector<double> pooled(targets);
  pooled.insert(pooled.end(), nontargets.begin(), nontargets.end());
  std::sort(pooled.begin(), pooled.end());

  const long long nt = static_cast<long long>(targets.size());
  const long long nn = static_cast<long long>(nontargets.size());
  EerResult best;
  long long best_gap = -1;  // |FAR - FRR| scaled by nt * nn, exact
  for (std::size_t i = 0; i + 1 < pooled.size(); ++i) {
    const double th = 0.5 * (pooled[i] + pooled[i + 1]);
    const long long false_rejects = std::lower_bound(targets.begin(), targets.end(), th) - targets.begin();
    const long long false_accepts = nontargets.end() - std::lower_bound(nontargets.begin(), nontargets.end(), th);
    const long long gap = std::llabs(false_accepts * nt - false_rejects * nn);
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      best.threshold = th;
      best.eer = 0.5 * (static_cast<double>(false_accepts) / static_cast<double>(nn) +
                        static_cast<double>(false_rejects) / static_cast<double>(nt));
    }
  }
  return best;
}

}  // namespace pmtl
