// tests/test_eval.cpp

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

#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pmtl::test {
namespace {

// Manifest with the standard nine-session layout: sessions 1, 4, 7 enroll.
std::vector<ManifestEntry> layout(int speakers, int phrases, int sessions = 9) {
  std::vector<ManifestEntry> m;
  for (int s = 0; s < speakers; ++s)
    for (int q = 0; q < phrases; ++q)
      for (int k = 1; k <= sessions; ++k)
        m.push_back({utterance_name(s, q, k), speaker_name(s), q, k, session_device(k), "x.feat", "-"});
  return m;
}

std::map<TrialType, int> count(const TrialSet& set) {
  std::map<TrialType, int> c;
  for (const auto& t : set.trials) ++c[t.type];
  return c;
}

TEST(Trials, TwoByTwoCombinatorics) {
  // Enrollment sessions plus exactly one test session per speaker-phrase.
  auto m = layout(2, 2, 2);
  m.erase(std::remove_if(m.begin(), m.end(), [](const ManifestEntry& e) { return e.session > 2; }), m.end());
  auto set = generate_trials(m);
  EXPECT_EQ(set.models.size(), 4u);
  EXPECT_EQ(set.trials.size(), 16u);
  auto c = count(set);
  for (TrialType t : kTrialTypes) EXPECT_EQ(c[t], 4) << to_string(t);
  EXPECT_EQ(set.models[0].model_id, "spk000_p00");
}

TEST(Trials, SinglePhraseHasNoWrongContentTrials) {
  auto c = count(generate_trials(layout(3, 1)));
  EXPECT_EQ(c[TrialType::TW], 0);
  EXPECT_EQ(c[TrialType::IW], 0);
  EXPECT_GT(c[TrialType::TC], 0);
  EXPECT_GT(c[TrialType::IC], 0);
}

TEST(Trials, MatchesCountingOracle) {
  const int S = 10, Q = 5;
  auto set = generate_trials(layout(S, Q));
  std::map<TrialType, int> oracle;
  // Six test sessions per (speaker, phrase); one model per (speaker, phrase).
  for (int s = 0; s < S; ++s)
    for (int sp = 0; sp < S; ++sp)
      for (int q = 0; q < Q; ++q)
        for (int qp = 0; qp < Q; ++qp) oracle[classify_trial(s == sp, q == qp)] += 6;
  EXPECT_EQ(count(set), oracle);
  EXPECT_EQ(set.trials.size(), static_cast<std::size_t>(S * Q * 6) * static_cast<std::size_t>(S * Q));
  for (const auto& m : set.models) EXPECT_EQ(m.utterances.size(), 3u);
}

TEST(Trials, PartitionRestrictsPairs) {
  std::map<std::string, std::string> gender{{"spk000", "m"}, {"spk001", "f"}, {"spk002", "m"}, {"spk003", "f"}};
  auto set = generate_trials(layout(4, 2), &gender);
  for (const auto& t : set.trials) {
    const std::string spk_model = t.model_id.substr(0, 6), spk_test = t.test_utt_id.substr(0, 6);
    EXPECT_EQ(gender[spk_model], gender[spk_test]);
  }
  EXPECT_EQ(set.trials.size(), 2u * (2 * 2 * 6) * (2 * 2));
}

TEST(Trials, EmptySplitsAreErrors) {
  auto m = layout(2, 2);
  std::vector<ManifestEntry> enroll_only, test_only;
  for (const auto& e : m) (e.enrollment() ? enroll_only : test_only).push_back(e);
  EXPECT_THROW(generate_trials(enroll_only), EmptyInputError);
  EXPECT_THROW(generate_trials(test_only), EmptyInputError);
}

TEST(Eer, HandWorkedFixture) {
  auto r = compute_eer({0.9, 0.8, 0.7, 0.3}, {0.6, 0.4, 0.2, 0.1});
  EXPECT_EQ(r.eer, 0.25);
  EXPECT_EQ(r.threshold, 0.5);
}

TEST(Eer, SeparatedAndChance) {
  EXPECT_EQ(compute_eer({2, 3, 4}, {-1, 0, 1}).eer, 0.0);
  EXPECT_EQ(compute_eer({1, 2, 3, 3}, {3, 2, 1, 3}).eer, 0.5);
  EXPECT_EQ(compute_eer({0.5}, {0.5}).eer, 0.5);
}

TEST(Eer, EmptySideIsNamed) {
  try {
    compute_eer({}, {1.0});
    FAIL();
  } catch (const EmptyInputError& e) {
    EXPECT_NE(std::string(e.what()).find("target"), std::string::npos);
  }
  try {
    compute_eer({1.0}, {});
    FAIL();
  } catch (const EmptyInputError& e) {
    EXPECT_NE(std::string(e.what()).find("nontarget"), std::string::npos);
  }
}

// Threshold placed at every distinct score value, lowest first.
double brute_force_eer(const std::vector<double>& tar, const std::vector<double>& non) {
  std::set<double> values(tar.begin(), tar.end());
  values.insert(non.begin(), non.end());
  double best_gap = 2, eer = 0;
  for (double th : values) {
    double fa = 0, fr = 0;
    for (double s : non) fa += s >= th;
    for (double s : tar) fr += s < th;
    fa /= static_cast<double>(non.size());
    fr /= static_cast<double>(tar.size());
    if (std::abs(fa - fr) < best_gap - 1e-15) {
      best_gap = std::abs(fa - fr);
      eer = (fa + fr) / 2;
    }
  }
  return eer;
}

TEST(Eer, AgreesWithBruteForce) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> size(1, 25);
    std::uniform_int_distribution<int> coarse(0, 9);
    std::normal_distribution<double> normal;
    std::vector<double> tar(size(rng)), non(size(rng));
    // Half the sets use a coarse grid so ties are common.
    const bool ties = trial % 2 == 0;
    for (auto& s : tar) s = ties ? coarse(rng) : normal(rng) + 1.0;
    for (auto& s : non) s = ties ? coarse(rng) - 2 : normal(rng);
    EXPECT_NEAR(compute_eer(tar, non).eer, brute_force_eer(tar, non), 1e-15) << "set " << trial;
  }
}

TEST(Eer, InvariantUnderIncreasingTransforms) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> tar(20), non(30);
    for (auto& s : tar) s = normal(rng) + 0.8;
    for (auto& s : non) s = normal(rng);
    auto f = [](double x) { return std::exp(2 * x) + x * x * x; };
    std::vector<double> tf, nf;
    for (double s : tar) tf.push_back(f(s));
    for (double s : non) nf.push_back(f(s));
    EXPECT_EQ(compute_eer(tar, non).eer, compute_eer(tf, nf).eer);
  }
}

std::vector<ScoredTrial> scored(const std::vector<std::pair<TrialType, double>>& v) {
  std::vector<ScoredTrial> out;
  int i = 0;
  for (auto [t, s] : v) out.push_back({{"m", "u" + std::to_string(i++), t}, s});
  return out;
}

TEST(Report, OnlyPresentConditionsAppear) {
  auto set = ScoreSet::from(scored({{TrialType::TC, 1.0}, {TrialType::TC, 0.8}, {TrialType::IC, 0.1}}));
  std::vector<TrialType> missing;
  auto rows = report(set, &missing);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].condition, TrialType::IC);
  EXPECT_EQ(missing, (std::vector<TrialType>{TrialType::TW, TrialType::IW}));
  EXPECT_THROW(report(ScoreSet::from(scored({{TrialType::IC, 0.1}}))), EmptyInputError);
}

TEST(Report, ThreeColumnsMatchPairwiseEer) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<std::pair<TrialType, double>> v;
  for (int i = 0; i < 40; ++i) {
    v.push_back({TrialType::TC, normal(rng) + 2});
    v.push_back({TrialType::TW, normal(rng) + 1});
    v.push_back({TrialType::IC, normal(rng) + 0.5});
    v.push_back({TrialType::IW, normal(rng)});
  }
  auto set = ScoreSet::from(scored(v));
  auto rows = report(set);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    auto e = compute_eer(*set.get(TrialType::TC), *set.get(r.condition));
    EXPECT_EQ(r.eer_percent, 100 * e.eer);
    EXPECT_EQ(r.threshold, e.threshold);
  }
  auto back = parse_report_csv(report_csv(rows));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].condition, rows[i].condition);
    EXPECT_EQ(back[i].eer_percent, rows[i].eer_percent);
    EXPECT_EQ(back[i].threshold, rows[i].threshold);
  }
  EXPECT_EQ(report_csv(back), report_csv(rows));
  EXPECT_NE(report_text(rows).find("TW\tIC\tIW"), std::string::npos);
}

TEST(Files, TrialAndScoreRoundTrips) {
  auto set = generate_trials(layout(3, 2));
  const std::string text = encode_trials(set.trials);
  EXPECT_EQ(encode_trials(decode_trials(text)), text);
  std::vector<ScoredTrial> s;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (const auto& t : set.trials) s.push_back({t, normal(rng) * 1e3});
  const std::string scores = encode_scores(s);
  auto back = decode_scores(scores);
  EXPECT_EQ(encode_scores(back), scores);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(back[i].score, s[i].score);
  EXPECT_THROW(decode_scores("m\tu\tTC\tnan\n"), ValidationError);
  EXPECT_THROW(decode_trials("m\tu\tXX\n"), ValidationError);
}

}  // namespace
}  // namespace pmtl::test
