// pmtl/model/config.hpp

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

#include "pmtl/io/kv_config.hpp"
#include "pmtl/nn/layers.hpp"

#include <string>

namespace pmtl {

enum class EmbeddingLayer { segment1, segment2 };

/// Architecture description plus the ablation toggles behind the S1..S6
/// system variants.
struct NetworkConfig {
  Eigen::Index input_dim = 23;
  Eigen::Index hidden_dim = 512;
  Eigen::Index num_phonemes = 2;
  Eigen::Index num_speakers = 2;
  double alpha = 0.3;
  double beta = 0.2;
  PoolingMode pooling{};
  bool use_se = true;
  bool use_frame_phonetic = true;
  bool use_segment_adversarial = false;
  Eigen::Index se_ratio = 4;
  EmbeddingLayer embedding_layer = EmbeddingLayer::segment1;
  double grl_lambda = 1.0;

  void validate() const {
    if (input_dim < 1 || hidden_dim < 1) throw ValidationError("config: input_dim and hidden_dim must be >= 1");
    if (num_phonemes < 2) throw ValidationError("config: num_phonemes must be >= 2");
    if (num_speakers < 2) throw ValidationError("config: num_speakers must be >= 2");
    if (alpha < 0 || beta < 0) throw ValidationError("config: alpha and beta must be >= 0");
    if (!(pooling.scale > 0)) throw ValidationError("config: pooling scale must be > 0");
    if (se_ratio < 1) throw ValidationError("config: se_ratio must be >= 1");
    if (pooling.phoneme_aware() && !use_frame_phonetic)
      throw ValidationError("config: phoneme-aware pooling needs the frame-level phonetic subnet");
  }

  bool needs_alignments() const { return use_frame_phonetic || use_segment_adversarial; }

  /// Emits every field as `key = value` in a fixed order.
  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    kv.set("input_dim", std::to_string(input_dim));
    kv.set("hidden_dim", std::to_string(hidden_dim));
    kv.set("num_phonemes", std::to_string(num_phonemes));
    kv.set("num_speakers", std::to_string(num_speakers));
    kv.set("alpha", format_real(alpha));
    kv.set("beta", format_real(beta));
    kv.set("pooling", to_string(pooling.kind));
    kv.set("scale", format_real(pooling.scale));
    kv.set("use_se", use_se ? "true" : "false");
    kv.set("use_frame_phonetic", use_frame_phonetic ? "true" : "false");
    kv.set("use_segment_adversarial", use_segment_adversarial ? "true" : "false");
    kv.set("se_ratio", std::to_string(se_ratio));
    kv.set("embedding_layer", embedding_layer == EmbeddingLayer::segment1 ? "segment1" : "segment2");
    kv.set("grl_lambda", format_real(grl_lambda));
    return kv;
  }

  /// Reads the keys this struct owns; other keys are left unconsumed.
  void read_kv(const KeyValueConfig& kv) {
    kv.take_into("input_dim", input_dim);
    kv.take_into("hidden_dim", hidden_dim);
    kv.take_into("num_phonemes", num_phonemes);
    kv.take_into("num_speakers", num_speakers);
    kv.take_into("alpha", alpha);
    kv.take_into("beta", beta);
    if (auto v = kv.take("pooling")) pooling.kind = parse_pooling(*v);
    kv.take_into("scale", pooling.scale);
    kv.take_into("use_se", use_se);
    kv.take_into("use_frame_phonetic", use_frame_phonetic);
    kv.take_into("use_segment_adversarial", use_segment_adversarial);
    kv.take_into("se_ratio", se_ratio);
    if (auto v = kv.take("embedding_layer")) {
      if (*v == "segment1") embedding_layer = EmbeddingLayer::segment1;
      else if (*v == "segment2") embedding_layer = EmbeddingLayer::segment2;
      else throw ValidationError("config: embedding_layer must be segment1 or segment2");
    }
    kv.take_into("grl_lambda", grl_lambda);
  }
};

/// Expands a system preset into its toggle set. `phone_pooling` is the
/// phoneme-aware mode used by S3, S4 and S6.
inline void apply_preset(NetworkConfig& cfg, const std::string& preset,
                         PoolingKind phone_pooling = PoolingKind::phone_att_weighted) {
  if (phone_pooling == PoolingKind::stats) phone_pooling = PoolingKind::phone_att_weighted;
  auto set = [&](bool frame, PoolingKind pool, bool se, bool adv) {
    cfg.use_frame_phonetic = frame;
    cfg.pooling.kind = pool;
    cfg.use_se = se;
    cfg.use_segment_adversarial = adv;
  };
  if (preset == "S1") set(true, PoolingKind::stats, false, false);
  else if (preset == "S2") set(true, PoolingKind::stats, true, false);
  else if (preset == "S3") set(true, phone_pooling, false, false);
  else if (preset == "S4") set(true, phone_pooling, true, false);
  else if (preset == "S5") set(false, PoolingKind::stats, true, false);
  else if (preset == "S6") set(true, phone_pooling, true, true);
  else throw ValidationError("unknown preset '" + preset + "' (expected S1..S6)");
}

}  // namespace pmtl
