// pmtl/eval/trials.hpp

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

#include "pmtl/data/corpus.hpp"
#include "pmtl/eval/eer.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pmtl {

/// Trial types: target/impostor speaker crossed with correct/wrong phrase.
enum class TrialType { TC, TW, IC, IW };

inline constexpr std::array<TrialType, 4> kTrialTypes{TrialType::TC, TrialType::TW, TrialType::IC, TrialType::IW};

inline std::string to_string(TrialType t) {
  switch (t) {
    case TrialType::TC: return "TC";
    case TrialType::TW: return "TW";
    case TrialType::IC: return "IC";
    case TrialType::IW: return "IW";
  }
  return "?";
}

inline TrialType parse_trial_type(const std::string& s) {
  for (TrialType t : kTrialTypes)
    if (to_string(t) == s) return t;
  throw ValidationError("unknown trial type '" + s + "'");
}

inline TrialType classify_trial(bool same_speaker, bool same_phrase) {
  if (same_speaker) return same_phrase ? TrialType::TC : TrialType::TW;
  return same_phrase ? TrialType::IC : TrialType::IW;
}

/// A text-dependent enrollment model: one speaker saying one phrase.
struct EnrollmentModel {
  std::string model_id;
  std::string speaker_id;
  int phrase_id = 0;
  std::vector<std::string> utterances;
};

inline std::string model_name(const std::string& speaker, int phrase) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_p%02d", phrase);
  return speaker + buf;
}

struct Trial {
  std::string model_id;
  std::string test_utt_id;
  TrialType type = TrialType::TC;
};

struct TrialSet {
  std::vector<EnrollmentModel> models;
  std::vector<Trial> trials;
};

/// Enrollment models from the enrollment sessions, then every test
/// utterance against every model of its partition. `partition` maps a
/// speaker to a group label (for example gender); speakers absent from it
/// share one default group.
inline TrialSet generate_trials(const std::vector<ManifestEntry>& manifest,
                                const std::map<std::string, std::string>* partition = nullptr) {
  TrialSet set;
  std::map<std::string, std::size_t> model_index;
  std::vector<const ManifestEntry*> tests;
  for (const auto& e : manifest) {
    if (e.enrollment()) {
      const std::string id = model_name(e.speaker_id, e.phrase_id);
      auto [it, inserted] = model_index.emplace(id, set.models.size());
      if (inserted) set.models.push_back({id, e.speaker_id, e.phrase_id, {}});
      set.models[it->second].utterances.push_back(e.utt_id);
    } else {
      tests.push_back(&e);
    }
  }
  if (set.models.empty()) throw EmptyInputError("generate_trials: manifest has no enrollment utterances");
  if (tests.empty()) throw EmptyInputError("generate_trials: manifest has no test utterances");
  auto group = [&](const std::string& spk) -> std::string {
    if (!partition) return "";
    auto it = partition->find(spk);
    return it == partition->end() ? "" : it->second;
  };
  for (const ManifestEntry* t : tests)
    for (const auto& m : set.models) {
      if (group(m.speaker_id) != group(t->speaker_id)) continue;
      set.trials.push_back(
          {m.model_id, t->utt_id, classify_trial(m.speaker_id == t->speaker_id, m.phrase_id == t->phrase_id)});
    }
  return set;
}

inline std::string encode_trials(const std::vector<Trial>& trials) {
  std::string out;
  for (const auto& t : trials) out += t.model_id + '\t' + t.test_utt_id + '\t' + to_string(t.type) + '\n';
  return out;
}

inline std::vector<Trial> decode_trials(const std::string& text) {
  std::vector<Trial> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 3) throw ValidationError("trial line needs 3 tab-separated fields: '" + line + "'");
    out.push_back({f[0], f[1], parse_trial_type(f[2])});
  }
  return out;
}

struct ScoredTrial {
  Trial trial;
  double score = 0.0;
};

inline std::string encode_scores(const std::vector<ScoredTrial>& scores) {
  std::string out;
  for (const auto& s : scores)
    out += s.trial.model_id + '\t' + s.trial.test_utt_id + '\t' + to_string(s.trial.type) + '\t' +
           format_real(s.score) + '\n';
  return out;
}

inline std::vector<ScoredTrial> decode_scores(const std::string& text) {
  std::vector<ScoredTrial> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 4) throw ValidationError("score line needs 4 tab-separated fields: '" + line + "'");
    double v = parse_real(f[3]);
    if (!std::isfinite(v)) throw ValidationError("non-finite score in line '" + line + "'");
    out.push_back({{f[0], f[1], parse_trial_type(f[2])}, v});
  }
  return out;
}

/// Scores grouped by trial type.
struct ScoreSet {
  std::map<TrialType, std::vector<double>> by_type;

  static ScoreSet from(const std::vector<ScoredTrial>& scored) {
    ScoreSet s;
    for (const auto& t : scored) s.by_type[t.trial.type].push_back(t.score);
    return s;
  }

  const std::vector<double>* get(TrialType t) const {
    auto it = by_type.find(t);
    return it == by_type.end() || it->second.empty() ? nullptr : &it->second;
  }
};

struct ReportRow {
  TrialType condition;
  double eer_percent = 0.0;
  double threshold = 0.0;
};

/// EER of TC targets against each available nontarget type. Missing types
/// are omitted and listed in `missing`.
inline std::vector<ReportRow> report(const ScoreSet& scores, std::vector<TrialType>* missing = nullptr) {
  const auto* tc = scores.get(TrialType::TC);
  if (!tc) throw EmptyInputError("report: no TC (target) trials");
  std::vector<ReportRow> rows;
  for (TrialType t : {TrialType::TW, TrialType::IC, TrialType::IW}) {
    const auto* nt = scores.get(t);
    if (!nt) {
      if (missing) missing->push_back(t);
      continue;
    }
    EerResult r = compute_eer(*tc, *nt);
    rows.push_back({t, 100.0 * r.eer, r.threshold});
  }
  return rows;
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "condition,eer_percent,threshold\n";
  for (const auto& r : rows)
    out += to_string(r.condition) + "," + format_real(r.eer_percent) + "," + format_real(r.threshold) + "\n";
  return out;
}

inline std::vector<ReportRow> parse_report_csv(const std::string& text) {
  std::vector<ReportRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    if (header) {
      if (line != "condition,eer_percent,threshold") throw ValidationError("report: unexpected CSV header");
      header = false;
      continue;
    }
    auto c1 = line.find(','), c2 = line.rfind(',');
    if (c1 == std::string::npos || c1 == c2) throw ValidationError("report: malformed row '" + line + "'");
    rows.push_back({parse_trial_type(line.substr(0, c1)), parse_real(line.substr(c1 + 1, c2 - c1 - 1)),
                    parse_real(line.substr(c2 + 1))});
  }
  return rows;
}

/// Fixed-width text table, one column per reported condition.
inline std::string report_text(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "EER (%)";
  for (const auto& r : rows) out << '\t' << to_string(r.condition);
  out << "\n       ";
  out.setf(std::ios::fixed);
  out.precision(3);
  for (const auto& r : rows) out << '\t' << r.eer_percent;
  out << '\n';
  return out.str();
}

}  // namespace pmtl
