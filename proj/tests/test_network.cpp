// tests/test_network.cpp

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

#include <cmath>
#include <fstream>
#include <set>

namespace pmtl::test {
namespace {

std::set<std::string> names(const ParamStore<double>& s) {
  std::set<std::string> out;
  for (const auto& p : s) out.insert(p.name);
  return out;
}

TEST(Build, FullPhonemeInventoryWidths) {
  NetworkConfig cfg;
  cfg.num_phonemes = 1708;
  cfg.num_speakers = 10;
  apply_preset(cfg, "S6");
  // Shape-only: the parameter layout is built without training.
  auto model = build<float>(cfg, 1);
  EXPECT_EQ(model.store.at("speaker.1.w").value.rows(), 3416);
  EXPECT_EQ(model.store.at("speaker.1.w").value.cols(), 512);
  EXPECT_EQ(model.store.at("adversary.1.w").value.rows(), 3416);
  EXPECT_EQ(model.store.at("etdnn5.w").value.cols(), 1708);
  EXPECT_EQ(model.store.at("shared.1.w").value.rows(), 115);
  EXPECT_EQ(model.store.at("speaker.head.w").value.cols(), 10);
  EXPECT_EQ(model.store.at("shared.1.se.1.w").value.cols(), 128);
}

TEST(Build, SystemOneLayout) {
  NetworkConfig cfg = tiny_config("S1");
  std::set<std::string> expected;
  for (int k = 1; k <= 4; ++k) expected.insert({"shared." + std::to_string(k) + ".w", "shared." + std::to_string(k) + ".b"});
  for (const char* g : {"etdnn5", "frame_phonetic.1", "frame_phonetic.2", "frame_phonetic.head", "speaker.1",
                        "speaker.2", "speaker.head"})
    expected.insert({std::string(g) + ".w", std::string(g) + ".b"});
  EXPECT_EQ(names(build<double>(cfg, 3).store), expected);
}

TEST(Build, SameSeedIsBitIdentical) {
  auto a = build<float>(tiny_config(), 9), b = build<float>(tiny_config(), 9), c = build<float>(tiny_config(), 10);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.store.size(); ++i) {
    EXPECT_EQ(a.store[i].value, b.store[i].value);
    any_diff |= a.store[i].value != c.store[i].value;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Build, TogglesRemoveOnlyTheirGroups) {
  struct Case {
    const char* full;
    const char* reduced;
    std::vector<std::string> prefixes;
  };
  const std::vector<Case> cases{{"S2", "S1", {".se."}},
                                {"S6", "S4", {"adversary."}},
                                {"S2", "S5", {"frame_phonetic."}},
                                {"S4", "S3", {".se."}}};
  for (const auto& c : cases) {
    auto full = build<double>(tiny_config(c.full), 21);
    auto reduced = build<double>(tiny_config(c.reduced), 21);
    for (const auto& p : full.store) {
      bool removed = false;
      for (const auto& pre : c.prefixes) removed |= p.name.find(pre) != std::string::npos;
      ASSERT_EQ(reduced.store.contains(p.name), !removed) << c.full << " -> " << c.reduced << ": " << p.name;
      if (!removed) EXPECT_EQ(reduced.store.at(p.name).value, p.value) << p.name;
    }
    EXPECT_LT(reduced.store.size(), full.store.size());
  }
}

TEST(Build, RejectsInvalidConfigs) {
  NetworkConfig cfg = tiny_config("S4");
  cfg.use_frame_phonetic = false;
  EXPECT_THROW(build<double>(cfg, 0), ValidationError);
  cfg = tiny_config();
  cfg.num_phonemes = 1;
  EXPECT_THROW(build<double>(cfg, 0), ValidationError);
  cfg = tiny_config();
  cfg.num_speakers = 1;
  EXPECT_THROW(build<double>(cfg, 0), ValidationError);
  cfg = tiny_config();
  cfg.alpha = -0.1;
  EXPECT_THROW(build<double>(cfg, 0), ValidationError);
  EXPECT_THROW(apply_preset(cfg, "S7"), ValidationError);
}

TEST(Forward, SingleFrameFlowsEndToEnd) {
  for (const char* preset : {"S1", "S2", "S3", "S4", "S5", "S6"}) {
    auto model = build<double>(tiny_config(preset), 4);
    auto out = forward(rand_mat<double>(1, 5, 5), model);
    EXPECT_EQ(out.speaker_logits.cols(), 3) << preset;
    EXPECT_EQ(out.pooled.cols(), 8) << preset;
    EXPECT_EQ(out.embedding.cols(), 8) << preset;
    EXPECT_TRUE(all_finite(out.speaker_logits)) << preset;
  }
}

TEST(Forward, SingleTaskSystemHasNoPhoneticOutputs) {
  auto model = build<double>(tiny_config("S5"), 4);
  auto out = forward(rand_mat<double>(9, 5, 6), model);
  EXPECT_FALSE(out.frame_phoneme_logits.has_value());
  EXPECT_FALSE(out.segment_phoneme_logits.has_value());
  EXPECT_EQ(out.pooled.cols(), 2 * 4);
}

TEST(Forward, OutputsFollowToggles) {
  auto out6 = forward(rand_mat<double>(9, 5, 6), build<double>(tiny_config("S6"), 4));
  ASSERT_TRUE(out6.frame_phoneme_logits.has_value());
  EXPECT_EQ(out6.frame_phoneme_logits->rows(), 9);
  ASSERT_TRUE(out6.segment_phoneme_logits.has_value());
  EXPECT_EQ(out6.segment_phoneme_logits->cols(), 4);
  auto out4 = forward(rand_mat<double>(9, 5, 6), build<double>(tiny_config("S4"), 4));
  EXPECT_FALSE(out4.segment_phoneme_logits.has_value());
}

TEST(Forward, PosteriorRowsOnSimplex) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto model = build<double>(tiny_config("S4"), seed);
    auto out = forward(rand_mat<double>(12, 5, seed + 40, 3.0), model);
    ASSERT_TRUE(out.frame_posteriors.has_value());
    for (Eigen::Index t = 0; t < 12; ++t) {
      EXPECT_NEAR(out.frame_posteriors->row(t).sum(), 1.0, 1e-9);
      EXPECT_GE(out.frame_posteriors->row(t).minCoeff(), 0.0);
    }
  }
}

TEST(Forward, RejectsWrongFeatureWidth) {
  auto model = build<double>(tiny_config(), 1);
  EXPECT_THROW(forward(rand_mat<double>(4, 6, 1), model), DimensionError);
}

// Speaker logits for seed 12345, S6 tiny network, input rand_mat(7, 5, 777).
// Frozen from the first build of the implementation.
TEST(Forward, MatchesGoldenValues) {
  auto model = build<double>(tiny_config("S6"), 12345);
  auto out = forward(rand_mat<double>(7, 5, 777), model);
  const double golden_logits[] = {0.0045730928648315562, -0.022558709253177114, -0.024618451154532945};
  const double golden_embedding_head[] = {0.016129631475932413, -0.056590520227939908, 0.047451747494376965, -0.038955574247978492};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(out.speaker_logits(i), golden_logits[i], 1e-12);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(out.embedding(i), golden_embedding_head[i], 1e-12);
}

TEST(Losses, UniformSpeakerLogitsGiveLogN) {
  NetworkConfig cfg = tiny_config("S5");
  cfg.num_speakers = 4;
  ForwardOutputs<double> out;
  out.speaker_logits = RowVector<double>::Constant(4, 0.3);
  LabelBundle y;
  y.speaker = 2;
  EXPECT_NEAR(compute_losses(out, y, cfg).speaker, std::log(4.0), 1e-15);
}

TEST(Losses, SaturatedCorrectSpeakerIsNearZero) {
  NetworkConfig cfg = tiny_config("S5");
  ForwardOutputs<double> out;
  out.speaker_logits = RowVector<double>::Zero(3);
  out.speaker_logits(1) = 30.0;
  LabelBundle y;
  y.speaker = 1;
  EXPECT_LT(compute_losses(out, y, cfg).speaker, 1e-9);
}

TEST(Losses, KlVanishesWhenPredictionMatchesTarget) {
  NetworkConfig cfg = tiny_config("S6");
  LabelBundle y = random_labels(cfg, 10, 3);
  ForwardOutputs<double> out;
  out.speaker_logits = RowVector<double>::Zero(3);
  out.frame_phoneme_logits = Matrix<double>::Zero(10, 4);
  RowVector<double> logits(4);
  for (int k = 0; k < 4; ++k) logits(k) = std::log(std::max(y.segment_phonemes[k], 1e-300));
  out.segment_phoneme_logits = logits;
  auto l = compute_losses(out, y, cfg);
  EXPECT_NEAR(l.segment_phonetic, 0.0, 1e-12);
  EXPECT_EQ(l.total, l.speaker + 0.3 * l.frame_phonetic + 0.2 * l.segment_phonetic);
}

TEST(Losses, TotalIsWeightedSumOnRandomCases) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    NetworkConfig cfg = tiny_config("S6");
    std::mt19937_64 rng(seed);
    const int frames = 1 + static_cast<int>(rng() % 20);
    LabelBundle y = random_labels(cfg, frames, seed + 1);
    ForwardOutputs<double> out;
    out.speaker_logits = rand_mat<double>(1, 3, seed + 2, 4.0).row(0);
    out.frame_phoneme_logits = rand_mat<double>(frames, 4, seed + 3, 4.0);
    out.segment_phoneme_logits = rand_mat<double>(1, 4, seed + 4, 4.0).row(0);
    auto l = compute_losses(out, y, cfg);
    EXPECT_LT(std::abs(l.total - (l.speaker + 0.3 * l.frame_phonetic + 0.2 * l.segment_phonetic)), 1e-12);
  }
}

TEST(Losses, RejectsOutOfRangeLabels) {
  NetworkConfig cfg = tiny_config("S6");
  LabelBundle y = random_labels(cfg, 4, 1);
  ForwardOutputs<double> out;
  out.speaker_logits = RowVector<double>::Zero(3);
  out.frame_phoneme_logits = Matrix<double>::Zero(4, 4);
  out.segment_phoneme_logits = RowVector<double>::Zero(4);
  auto bad = y;
  bad.speaker = 3;
  EXPECT_THROW(compute_losses(out, bad, cfg), ValidationError);
  bad = y;
  bad.frame_phonemes[2] = 4;
  EXPECT_THROW(compute_losses(out, bad, cfg), ValidationError);
  bad = y;
  bad.segment_phonemes[0] += 0.01;
  EXPECT_THROW(compute_losses(out, bad, cfg), ValidationError);
}

// Gradient of beta * L_ps alone with the given reversal coefficient.
ParamStore<double> segment_loss_gradient(const NetworkConfig& base, double lambda, std::uint64_t seed) {
  NetworkConfig cfg = base;
  cfg.grl_lambda = lambda;
  auto model = build<double>(cfg, seed);
  Matrix<double> x = rand_mat<double>(8, 5, seed + 1);
  LabelBundle y = random_labels(cfg, 8, seed + 2);
  ForwardCache<double> cache;
  auto out = forward(x, model, &cache);
  OutputGrads<double> g;
  compute_losses(out, y, cfg, &g);
  g.speaker_logits.setZero();
  g.frame_phoneme_logits.reset();
  model.store.zero_grad();
  backward(cache, out, g, model);
  return model.store;
}

TEST(Adversary, ReversalNegatesSharedGradientsExactly) {
  for (PoolingKind pool : {PoolingKind::phone_att_weighted, PoolingKind::phone_att_literal}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      NetworkConfig cfg = tiny_network_config("S6", pool);
      auto reversed = segment_loss_gradient(cfg, 1.0, seed);
      auto identity = segment_loss_gradient(cfg, -1.0, seed);
      double largest = 0;
      for (const auto& p : reversed) {
        const auto& q = identity.at(p.name);
        if (p.name.rfind("adversary.", 0) == 0) {
          EXPECT_LT((p.grad - q.grad).cwiseAbs().maxCoeff(), 1e-12) << p.name;
        } else {
          EXPECT_LT((p.grad + q.grad).cwiseAbs().maxCoeff(), 1e-12) << p.name;
          largest = std::max(largest, p.grad.cwiseAbs().maxCoeff());
        }
      }
      EXPECT_GT(largest, 0.0);
    }
  }
}

TEST(Network, TinyGradientCheckPassesForEveryPreset) {
  for (const char* preset : {"S1", "S2", "S3", "S4", "S5", "S6"}) {
    for (PoolingKind pool : {PoolingKind::phone_att_weighted, PoolingKind::phone_att_literal}) {
      NetworkConfig cfg = tiny_network_config(preset, pool);
      Matrix<LD> x = rand_mat<LD>(6, 5, 31);
      auto op = network_loss_op(cfg, x, gradcheck_labels(cfg, 6, 7));
      for (std::uint64_t seed : {1, 2}) {
        auto r = grad_check(op, network_params_sample(cfg, seed), 1e-6);
        EXPECT_TRUE(r.passed(1e-4)) << preset << " " << to_string(pool) << " seed " << seed << ": "
                                    << r.max_relative_error << " " << r.message;
      }
    }
  }
}

TEST(Embedding, DeterministicAndFixedLength) {
  auto model = build<double>(tiny_config("S4"), 8);
  for (int T : {1, 3, 50}) {
    Matrix<double> x = rand_mat<double>(T, 5, T);
    RowVector<double> a = extract_embedding(x, model), b = extract_embedding(x, model);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.cols(), 8);
  }
}

TEST(Embedding, MatchesTrainingForwardTap) {
  for (const char* preset : {"S1", "S4", "S5", "S6"}) {
    auto model = build<double>(tiny_config(preset), 8);
    Matrix<double> x = rand_mat<double>(10, 5, 2);
    EXPECT_EQ(extract_embedding(x, model), forward(x, model).embedding) << preset;
  }
}

TEST(Embedding, SecondSegmentLayerDiffers) {
  NetworkConfig cfg = tiny_config("S4");
  auto model1 = build<double>(cfg, 8);
  cfg.embedding_layer = EmbeddingLayer::segment2;
  auto model2 = build<double>(cfg, 8);
  Matrix<double> x = rand_mat<double>(10, 5, 2);
  EXPECT_GT((extract_embedding(x, model1) - extract_embedding(x, model2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto model = build<float>(tiny_config("S6"), 77);
  KeyValueConfig extra;
  extra.set("note", "x");
  const std::string bytes = encode_checkpoint(to_checkpoint(model, extra));
  Checkpoint ck = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(ck), bytes);
  auto back = from_checkpoint<float>(ck);
  ASSERT_EQ(back.store.size(), model.store.size());
  for (std::size_t i = 0; i < model.store.size(); ++i) EXPECT_EQ(back.store[i].value, model.store[i].value);
  EXPECT_EQ(back.config.to_kv().to_text(), model.config.to_kv().to_text());
  EXPECT_EQ(bytes.substr(0, 5), "PMTL1");
}

TEST(Checkpoint, DetectsCorruption) {
  auto model = build<float>(tiny_config("S1"), 77);
  std::string bytes = encode_checkpoint(to_checkpoint(model));
  EXPECT_THROW(decode_checkpoint("PMTL2" + bytes.substr(5)), FormatError);
  try {
    decode_checkpoint(bytes.substr(0, bytes.size() - 3));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::truncated);
  }
  Checkpoint ck = decode_checkpoint(bytes);
  ck.tensors.pop_back();
  EXPECT_THROW(from_checkpoint<float>(ck), FormatError);
}

}  // namespace
}  // namespace pmtl::test
