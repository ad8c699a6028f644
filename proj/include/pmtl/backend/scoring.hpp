// pmtl/backend/scoring.hpp

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

#include "pmtl/backend/plda.hpp"
#include "pmtl/backend/whitener.hpp"
#include "pmtl/eval/trials.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pmtl {

enum class BackendKind { cosine, plda };

inline BackendKind parse_backend(const std::string& s) {
  if (s == "cosine") return BackendKind::cosine;
  if (s == "plda") return BackendKind::plda;
  throw ValidationError("unknown backend '" + s + "' (expected cosine or plda)");
}

/// Centering + whitening + length normalization, then either cosine or PLDA
/// scoring. Both pieces are fitted on background embeddings.
struct Backend {
  BackendKind kind = BackendKind::plda;
  Whitener whitener;
  std::optional<PldaModel> plda;

  Eigen::VectorXd process(const Eigen::VectorXd& e) const { return apply_whitener(whitener, e); }
};

inline Backend fit_backend(const Eigen::MatrixXd& background, const std::vector<int>& speaker_labels,
                           BackendKind kind, int plda_iterations = 20) {
  Backend b;
  b.kind = kind;
  b.whitener = fit_whitener(background);
  if (kind == BackendKind::plda) {
    Eigen::MatrixXd processed(background.rows(), background.cols());
    for (Eigen::Index i = 0; i < background.rows(); ++i)
      processed.row(i) = b.process(background.row(i).transpose()).transpose();
    b.plda = plda_fit(processed, speaker_labels, plda_iterations);
  }
  return b;
}

/// Scores every trial. `embeddings` maps utterance id to raw embedding;
/// models average their processed enrollment embeddings.
inline std::vector<ScoredTrial> score_trials(const Backend& backend, const TrialSet& set,
                                             const std::map<std::string, Eigen::VectorXd>& embeddings) {
  auto lookup = [&](const std::string& id) -> const Eigen::VectorXd& {
    auto it = embeddings.find(id);
    if (it == embeddings.end()) throw ValidationError("no embedding for utterance '" + id + "'");
    return it->second;
  };
  std::map<std::string, Eigen::VectorXd> models;
  for (const auto& m : set.models) {
    std::vector<Eigen::VectorXd> processed;
    for (const auto& u : m.utterances) processed.push_back(backend.process(lookup(u)));
    models[m.model_id] = enroll_model(processed);
  }
  std::optional<PldaScorer> scorer;
  if (backend.kind == BackendKind::plda) scorer.emplace(*backend.plda);
  std::map<std::string, Eigen::VectorXd> tests;
  std::vector<ScoredTrial> out;
  out.reserve(set.trials.size());
  for (const auto& t : set.trials) {
    auto mit = models.find(t.model_id);
    if (mit == models.end()) throw ValidationError("trial references unknown model '" + t.model_id + "'");
    auto tit = tests.find(t.test_utt_id);
    if (tit == tests.end()) tit = tests.emplace(t.test_utt_id, backend.process(lookup(t.test_utt_id))).first;
    const double s = scorer ? scorer->score(mit->second, tit->second) : cosine_score(mit->second, tit->second);
    out.push_back({t, s});
  }
  return out;
}

}  // namespace pmtl
