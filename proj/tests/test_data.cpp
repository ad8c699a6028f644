// tests/test_data.cpp

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

#include <filesystem>
#include <map>
#include <set>

namespace pmtl::test {
namespace {

TEST(SlidingCmn, ConstantInputBecomesZero) {
  Matrix<double> x = Matrix<double>::Constant(400, 3, 2.5);
  EXPECT_EQ(sliding_cmn(x, 300).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SlidingCmn, ShortUtteranceIsGlobalMeanSubtraction) {
  for (int T : {1, 17, 300}) {
    Matrix<double> x = rand_mat<double>(T, 4, T, 3.0);
    Matrix<double> expected = x.rowwise() - x.colwise().mean();
    EXPECT_LT((sliding_cmn(x, 300) - expected).cwiseAbs().maxCoeff(), 1e-12) << T;
    EXPECT_LT(sliding_cmn(x, 300).colwise().mean().cwiseAbs().maxCoeff(), 1e-10) << T;
  }
}

TEST(SlidingCmn, MatchesExplicitWindowOracle) {
  const int T = 500, W = 300;
  Matrix<double> x = rand_mat<double>(T, 3, 9, 2.0);
  Matrix<double> y = sliding_cmn(x, W);
  for (int t = 0; t < T; ++t) {
    // Window of W frames centered on t, slid inward at the edges.
    int start = t - W / 2;
    if (start < 0) start = 0;
    if (start + W > T) start = T - W;
    for (int j = 0; j < 3; ++j) {
      double sum = 0;
      for (int s = start; s < start + W; ++s) sum += x(s, j);
      EXPECT_NEAR(y(t, j), x(t, j) - sum / W, 1e-10);
    }
  }
}

TEST(SlidingCmn, RejectsEmptyInput) { EXPECT_THROW(sliding_cmn(Matrix<double>(0, 3)), EmptyInputError); }

TEST(Vad, SilenceAndSpeechExtremes) {
  // Relative threshold above the mean: nothing passes.
  std::vector<double> flat(10, 1.0), zcr(10, 0.0);
  auto none = vad_mask(flat, zcr, 2.5, 0.5);
  EXPECT_EQ(std::count(none.begin(), none.end(), true), 0);
  auto all = vad_mask(flat, zcr, 0.5, 0.5);
  EXPECT_EQ(std::count(all.begin(), all.end(), true), 10);
}

TEST(Vad, MixedCaseFollowsRule) {
  const std::vector<double> energy{0.1, 2.0, 0.6, 0.6, 0.2, 1.5, 0.0};
  const std::vector<double> zcr{0.9, 0.0, 0.9, 0.1, 0.9, 0.0, 0.9};
  const double th = 1.0 * (5.0 / 7.0);
  auto mask = vad_mask(energy, zcr, 1.0, 0.5);
  for (std::size_t t = 0; t < energy.size(); ++t) {
    const bool expected = energy[t] > th || (energy[t] > 0.5 * th && zcr[t] > 0.5);
    EXPECT_EQ(mask[t], expected) << t;
  }
  EXPECT_EQ(mask, (std::vector<bool>{false, true, true, false, false, true, false}));
}

TEST(Vad, Errors) {
  EXPECT_THROW(vad_mask({}, {}, 1.0, 0.5), EmptyInputError);
  EXPECT_THROW(vad_mask({1.0}, {1.0, 2.0}, 1.0, 0.5), DimensionError);
  EXPECT_THROW(vad_mask({1.0}, {1.0}, std::nan(""), 0.5), ValidationError);
}

TEST(Vad, SelectFramesKeepsMarkedRows) {
  Matrix<double> x = rand_mat<double>(4, 2, 1);
  Matrix<double> y = select_frames(x, {true, false, false, true});
  ASSERT_EQ(y.rows(), 2);
  EXPECT_EQ(y.row(0), x.row(0));
  EXPECT_EQ(y.row(1), x.row(3));
}

SynthConfig small_synth() {
  SynthConfig c;
  c.num_speakers = 8;
  c.num_phrases = 3;
  c.num_phonemes = 6;
  c.phonemes_per_phrase = 4;
  c.min_frames_per_phoneme = 3;
  c.max_frames_per_phoneme = 5;
  c.feature_dim = 5;
  c.seed = 42;
  return c;
}

TEST(Synth, SameSeedIsBitIdentical) {
  auto a = synth_corpus(small_synth()), b = synth_corpus(small_synth());
  ASSERT_EQ(a.utterances.size(), b.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    EXPECT_EQ(encode_archive(a.utterances[i].features), encode_archive(b.utterances[i].features));
    EXPECT_EQ(a.utterances[i].alignment, b.utterances[i].alignment);
  }
}

TEST(Synth, AlignmentLengthMatchesFrames) {
  auto corpus = synth_corpus(small_synth());
  EXPECT_EQ(corpus.utterances.size(), 8u * 3u * 9u);
  for (const auto& u : corpus.utterances) {
    EXPECT_EQ(static_cast<Eigen::Index>(u.alignment.size()), u.features.rows());
    for (int l : u.alignment) {
      EXPECT_GE(l, 0);
      EXPECT_LT(l, 6);
    }
  }
}

TEST(Synth, DegenerateGeneratorRepeatsFrames) {
  SynthConfig c = small_synth();
  c.noise_sd = 0;
  c.speaker_offset_sd = 0;
  c.device_offset_sd = 0;
  c.min_frames_per_phoneme = c.max_frames_per_phoneme = 4;
  auto corpus = synth_corpus(c);
  std::map<int, const UtteranceRecord*> first;
  for (const auto& u : corpus.utterances) {
    auto [it, fresh] = first.emplace(u.phrase_id, &u);
    if (!fresh) EXPECT_EQ(u.features, it->second->features) << u.utt_id;
  }
}

TEST(Synth, SpeakerOffsetsDominateWhenLarge) {
  SynthConfig c = small_synth();
  c.speaker_offset_sd = 5.0;
  c.noise_sd = 0.5;
  c.phoneme_mean_sd = 0.0;
  c.device_offset_sd = 0.0;
  auto corpus = synth_corpus(c);
  // Per-utterance means grouped by speaker.
  std::map<std::string, std::vector<Eigen::RowVectorXd>> by_speaker;
  for (const auto& u : corpus.utterances)
    by_speaker[u.speaker_id].push_back(u.features.cast<double>().colwise().mean());
  Eigen::RowVectorXd grand = Eigen::RowVectorXd::Zero(5);
  int n = 0;
  for (auto& [s, v] : by_speaker)
    for (auto& m : v) grand += m, ++n;
  grand /= n;
  double between = 0, within = 0;
  for (auto& [s, v] : by_speaker) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(5);
    for (auto& m : v) mean += m;
    mean /= static_cast<double>(v.size());
    between += (mean - grand).squaredNorm() * static_cast<double>(v.size());
    for (auto& m : v) within += (m - mean).squaredNorm();
  }
  EXPECT_GT(between / within, 10.0);
}

TEST(Synth, PhrasesAreDistinctWithoutImmediateRepeats) {
  auto corpus = synth_corpus(small_synth());
  std::set<std::vector<int>> unique(corpus.phrases.begin(), corpus.phrases.end());
  EXPECT_EQ(unique.size(), corpus.phrases.size());
  for (const auto& p : corpus.phrases)
    for (std::size_t i = 1; i < p.size(); ++i) EXPECT_NE(p[i], p[i - 1]);
}

TEST(Synth, RejectsInvalidConfig) {
  SynthConfig c = small_synth();
  c.num_speakers = 1;
  EXPECT_THROW(synth_corpus(c), ValidationError);
  c = small_synth();
  c.noise_sd = -1;
  EXPECT_THROW(synth_corpus(c), ValidationError);
  c = small_synth();
  c.num_phonemes = 2;
  EXPECT_THROW(synth_corpus(c), ValidationError);
}

TEST(Split, SessionsAndDevices) {
  EXPECT_EQ(session_device(1), Device::A);
  EXPECT_EQ(session_device(2), Device::B);
  EXPECT_EQ(session_device(3), Device::C);
  EXPECT_EQ(session_device(4), Device::A);
  EXPECT_EQ(session_device(5), Device::B);
  EXPECT_EQ(session_device(6), Device::C);
  EXPECT_EQ(session_device(7), Device::A);
  EXPECT_EQ(session_device(8), Device::B);
  EXPECT_EQ(session_device(9), Device::C);
  auto corpus = synth_corpus(small_synth());
  for (const auto& u : corpus.utterances) {
    const bool enroll = is_enrollment(u.session, u.device);
    EXPECT_EQ(enroll, u.session == 1 || u.session == 4 || u.session == 7);
    if (enroll) EXPECT_EQ(u.device, Device::A);
  }
}

TEST(Split, SpeakerSubsetsAreDisjointTwoOneOne) {
  std::map<Subset, int> counts;
  for (int s = 0; s < 40; ++s) ++counts[speaker_split(s, 40)];
  EXPECT_EQ(counts[Subset::background], 20);
  EXPECT_EQ(counts[Subset::development], 10);
  EXPECT_EQ(counts[Subset::evaluation], 10);
  auto corpus = synth_corpus(small_synth());
  std::set<std::string> seen;
  for (Subset s : {Subset::background, Subset::development, Subset::evaluation})
    for (const auto* u : corpus.subset(s)) EXPECT_TRUE(seen.insert(u->utt_id).second);
  EXPECT_EQ(seen.size(), corpus.utterances.size());
}

TEST(SoftLabels, ClosedForms) {
  EXPECT_EQ(segment_soft_labels({2, 2, 2}, 4), (std::vector<double>{0, 0, 1, 0}));
  EXPECT_EQ(segment_soft_labels({0, 0, 1, 1}, 2), (std::vector<double>{0.5, 0.5}));
  EXPECT_THROW(segment_soft_labels({}, 3), EmptyInputError);
  EXPECT_THROW(segment_soft_labels({3}, 3), ValidationError);
}

TEST(SoftLabels, MatchesCountingOracleAndSumsToOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<int> labels(100);
    for (auto& l : labels) l = static_cast<int>(rng() % 7);
    auto dist = segment_soft_labels(labels, 7);
    double sum = 0;
    for (int k = 0; k < 7; ++k) {
      EXPECT_NEAR(dist[k], std::count(labels.begin(), labels.end(), k) / 100.0, 1e-15);
      sum += dist[k];
    }
    EXPECT_EQ(sum, 1.0);
  }
}

TEST(FeatArchive, RoundTripIsBitExact) {
  Matrix<float> x = rand_mat<double>(50, 23, 5).cast<float>();
  const std::string dir = temp_dir("feat");
  write_archive(dir + "/x.feat", x);
  Matrix<float> y = read_archive(dir + "/x.feat");
  EXPECT_EQ(x, y);
  EXPECT_EQ(encode_archive(y), detail::read_file(dir + "/x.feat"));
  EXPECT_EQ(detail::read_file(dir + "/x.feat").size(), 13u + 50u * 23u * 4u);
}

TEST(FeatArchive, LittleEndianLayout) {
  Matrix<float> x(1, 2);
  x << 1.0f, -2.0f;
  const std::string bytes = encode_archive(x);
  EXPECT_EQ(bytes.substr(0, 5), "FEAT1");
  EXPECT_EQ(bytes.substr(5, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(9, 4), std::string("\x02\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(13, 4), std::string("\x00\x00\x80\x3f", 4));
  EXPECT_EQ(bytes.substr(17, 4), std::string("\x00\x00\x00\xc0", 4));
}

TEST(FeatArchive, DistinctErrorKinds) {
  const std::string good = encode_archive(Matrix<float>(rand_mat<double>(4, 3, 1).cast<float>()));
  try {
    decode_archive("FEAT2" + good.substr(5));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::bad_magic);
  }
  // Cut in the middle of the third row.
  const std::size_t cut = 13 + 4 * (3 * 2 + 1);
  try {
    decode_archive(good.substr(0, cut));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::truncated);
    EXPECT_EQ(e.offset(), cut);
  }
  std::string huge = "FEAT1";
  detail::put_u32(huge, 0xFFFFFFFFu);
  detail::put_u32(huge, 2);
  try {
    decode_archive(huge);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::dimension_overflow);
  }
  EXPECT_THROW(read_archive("/nonexistent/pmtl.feat"), FormatError);
}

TEST(FeatArchive, EmbeddingArchiveKeepsIds) {
  const std::string dir = temp_dir("emb");
  Matrix<float> e = rand_mat<double>(3, 4, 2).cast<float>();
  write_embeddings(dir + "/e.feat", {"a", "b", "c"}, e);
  auto back = read_embeddings(dir + "/e.feat");
  EXPECT_EQ(back.ids, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(back.vectors, e);
}

TEST(Manifest, RoundTripAndRelativePaths) {
  const std::string dir = temp_dir("manifest");
  auto corpus = synth_corpus(small_synth());
  write_corpus(dir, corpus);
  const std::string text = detail::read_file(dir + "/dev.tsv");
  EXPECT_EQ(encode_manifest(decode_manifest(text)), text);
  auto entries = read_manifest(dir + "/dev.tsv");
  ASSERT_FALSE(entries.empty());
  EXPECT_TRUE(std::filesystem::exists(entries[0].feature_path));
  auto utts = load_utterances(entries);
  const auto dev = corpus.subset(Subset::development);
  ASSERT_EQ(utts.size(), dev.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    EXPECT_EQ(utts[i].features, dev[i]->features);
    EXPECT_EQ(utts[i].alignment, dev[i]->alignment);
  }
  const std::string ali = detail::read_file(dir + "/dev.ali");
  EXPECT_EQ(encode_alignments(decode_alignments(ali)), ali);

  write_manifest(dir + "/dev.copy.tsv", entries);
  EXPECT_EQ(detail::read_file(dir + "/dev.copy.tsv"), text);
  auto outside = entries;
  outside[0].feature_path = "/elsewhere/x.feat";
  write_manifest(dir + "/dev.outside.tsv", outside);
  EXPECT_EQ(read_manifest(dir + "/dev.outside.tsv")[0].feature_path, "/elsewhere/x.feat");
}

TEST(Manifest, RejectsMalformedLines) {
  EXPECT_THROW(decode_manifest("a\tb\t0\t1\tA\tf\n"), ValidationError);
  EXPECT_THROW(decode_manifest("a\tb\tx\t1\tA\tf\t-\n"), ValidationError);
  EXPECT_THROW(decode_manifest("a\tb\t0\t1\tD\tf\t-\n"), ValidationError);
  EXPECT_THROW(decode_alignments("a 1 2 3\n"), ValidationError);
  EXPECT_EQ(decode_manifest("a\tb\t0\t1\tA\tf\t-\r\n")[0].has_alignment(), false);
}

TEST(Manifest, AlignmentLengthMismatchIsReported) {
  const std::string dir = temp_dir("mismatch");
  write_archive(dir + "/u.feat", Matrix<float>(Matrix<float>::Zero(3, 2)));
  write_alignments(dir + "/u.ali", {{"u", {0, 1}}});
  write_manifest(dir + "/m.tsv", {{"u", "s", 0, 1, Device::A, "u.feat", "u.ali"}});
  EXPECT_THROW(load_utterances(read_manifest(dir + "/m.tsv")), ValidationError);
}

}  // namespace
}  // namespace pmtl::test
