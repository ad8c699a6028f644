// pmtl/model/network.hpp

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

#include "pmtl/model/config.hpp"
#include "pmtl/numeric/param.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pmtl {

/// Context offsets of the four shared frame-level layers.
inline const std::array<std::vector<int>, 4>& shared_layer_offsets() {
  static const std::array<std::vector<int>, 4> offsets = {
      std::vector<int>{-2, -1, 0, 1, 2}, std::vector<int>{-2, 0, 2}, std::vector<int>{-3, 0, 3},
      std::vector<int>{0}};
  return offsets;
}

template <class T>
struct ModelParams {
  NetworkConfig config;
  ParamStore<T> store;

  template <class U>
  ModelParams<U> cast() const {
    return {config, store.template cast<U>()};
  }
};

namespace detail {

/// Each parameter gets its own stream so that toggling one group leaves the
/// initial values of every other group unchanged.
inline std::mt19937_64 param_rng(std::uint64_t seed, const std::string& name) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (unsigned char ch : name) words.push_back(ch);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

template <class T>
void add_dense(ParamStore<T>& store, const std::string& prefix, Eigen::Index in, Eigen::Index out,
               std::uint64_t seed) {
  auto w = store.add(prefix + ".w", in, out);
  store.add(prefix + ".b", 1, out);
  auto rng = param_rng(seed, prefix + ".w");
  glorot_uniform(store[w].value, rng);
}

}  // namespace detail

/// Allocates and initializes every parameter group enabled by `config`.
/// Deterministic in `seed`.
template <class T>
ModelParams<T> build(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams<T> model{config, {}};
  auto& s = model.store;
  const Eigen::Index h = config.hidden_dim, pp = config.num_phonemes;
  const auto& offsets = shared_layer_offsets();
  Eigen::Index in = config.input_dim;
  for (int k = 0; k < 4; ++k) {
    const std::string name = "shared." + std::to_string(k + 1);
    detail::add_dense(s, name, in * static_cast<Eigen::Index>(offsets[k].size()), h, seed);
    if (config.use_se) {
      SeBlockSpec se{h, config.se_ratio};
      detail::add_dense(s, name + ".se.1", 2 * h, se.bottleneck(), seed);
      detail::add_dense(s, name + ".se.2", se.bottleneck(), h, seed);
    }
    in = h;
  }
  detail::add_dense(s, "etdnn5", h, pp, seed);
  if (config.use_frame_phonetic) {
    detail::add_dense(s, "frame_phonetic.1", h, h, seed);
    detail::add_dense(s, "frame_phonetic.2", h, h, seed);
    detail::add_dense(s, "frame_phonetic.head", h, pp, seed);
  }
  detail::add_dense(s, "speaker.1", 2 * pp, h, seed);
  detail::add_dense(s, "speaker.2", h, h, seed);
  detail::add_dense(s, "speaker.head", h, config.num_speakers, seed);
  if (config.use_segment_adversarial) {
    detail::add_dense(s, "adversary.1", 2 * pp, h, seed);
    detail::add_dense(s, "adversary.2", h, h, seed);
    detail::add_dense(s, "adversary.head", h, pp, seed);
  }
  return model;
}

template <class T>
struct ForwardOutputs {
  RowVector<T> speaker_logits;
  std::optional<Matrix<T>> frame_phoneme_logits;
  std::optional<Matrix<T>> frame_posteriors;
  std::optional<RowVector<T>> segment_phoneme_logits;
  RowVector<T> pooled;
  RowVector<T> embedding;
};

/// Everything the backward pass needs from one forward pass.
template <class T>
struct ForwardCache {
  std::array<TdnnCache<T>, 4> shared;
  std::array<std::optional<SeCache<T>>, 4> se;
  Matrix<T> h4;
  TdnnCache<T> etdnn5;
  TdnnCache<T> pf1, pf2, pf_head;
  PoolCache<T> pool;
  Matrix<T> pool_input;
  TdnnCache<T> spk1, spk2, spk_head;
  TdnnCache<T> adv1, adv2, adv_head;
};

/// Upstream gradients w.r.t. the network heads.
template <class T>
struct OutputGrads {
  RowVector<T> speaker_logits;
  std::optional<Matrix<T>> frame_phoneme_logits;
  std::optional<RowVector<T>> segment_phoneme_logits;
};

namespace detail {

inline TdnnLayerSpec dense_spec(Eigen::Index in, Eigen::Index out, Activation act) {
  return TdnnLayerSpec{{0}, in, out, false, act};
}

template <class T>
Matrix<T> dense_forward(const ParamStore<T>& s, const std::string& name, const Matrix<T>& x, Activation act,
                        TdnnCache<T>* cache) {
  const auto& w = s.at(name + ".w").value;
  RowVector<T> b = s.at(name + ".b").value.row(0);
  return tdnn_forward(x, dense_spec(w.rows(), w.cols(), act), w, b, cache);
}

template <class T>
Matrix<T> dense_backward(ParamStore<T>& s, const std::string& name, const TdnnCache<T>& cache,
                         const Matrix<T>& dy, Activation act) {
  auto& w = s.at(name + ".w");
  auto g = tdnn_backward(cache, dense_spec(w.value.rows(), w.value.cols(), act), w.value, dy);
  w.grad += g.dw;
  s.at(name + ".b").grad += g.db;
  return std::move(g.dx);
}

template <class T>
SeParams<T> se_params(const ParamStore<T>& s, const std::string& prefix, RowVector<T>& b1, RowVector<T>& b2) {
  b1 = s.at(prefix + ".se.1.b").value.row(0);
  b2 = s.at(prefix + ".se.2.b").value.row(0);
  return SeParams<T>{s.at(prefix + ".se.1.w").value, b1, s.at(prefix + ".se.2.w").value, b2};
}

}  // namespace detail

/// Which heads a forward pass evaluates.
enum class ForwardScope { training, embedding };

template <class T>
ForwardOutputs<T> forward(const Matrix<T>& x, const ModelParams<T>& model, ForwardCache<T>* cache = nullptr,
                          ForwardScope scope = ForwardScope::training) {
  const NetworkConfig& cfg = model.config;
  const auto& s = model.store;
  if (x.cols() != cfg.input_dim)
    throw DimensionError("forward: features have " + std::to_string(x.cols()) + " dims, model expects " +
                         std::to_string(cfg.input_dim));
  if (x.rows() < 1) throw EmptyInputError("forward: utterance has no frames");
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  ForwardOutputs<T> out;

  const auto& offsets = shared_layer_offsets();
  Matrix<T> h = x;
  for (int k = 0; k < 4; ++k) {
    const std::string name = "shared." + std::to_string(k + 1);
    const auto& w = s.at(name + ".w").value;
    RowVector<T> b = s.at(name + ".b").value.row(0);
    TdnnLayerSpec spec{offsets[k], h.cols(), cfg.hidden_dim, cfg.use_se, Activation::relu};
    h = tdnn_forward(h, spec, w, b, &c.shared[k]);
    if (cfg.use_se) {
      RowVector<T> b1, b2;
      auto sp = detail::se_params(s, name, b1, b2);
      c.se[k].emplace();
      h = se_forward(h, SeBlockSpec{cfg.hidden_dim, cfg.se_ratio}, sp, &*c.se[k]);
    }
  }
  c.h4 = h;
  Matrix<T> h5 = detail::dense_forward(s, "etdnn5", c.h4, Activation::identity, &c.etdnn5);

  const bool phone_pool = cfg.pooling.phoneme_aware();
  const bool need_phonetic = cfg.use_frame_phonetic && (scope == ForwardScope::training || phone_pool);
  if (need_phonetic) {
    Matrix<T> f = detail::dense_forward(s, "frame_phonetic.1", c.h4, Activation::relu, &c.pf1);
    f = detail::dense_forward(s, "frame_phonetic.2", f, Activation::relu, &c.pf2);
    Matrix<T> logits = detail::dense_forward(s, "frame_phonetic.head", f, Activation::identity, &c.pf_head);
    out.frame_posteriors = softmax(logits, Axis::channel);
    out.frame_phoneme_logits = std::move(logits);
  }

  if (phone_pool) {
    out.pooled = phoneme_attentive_pool(*out.frame_posteriors, h5, cfg.pooling, &c.pool);
  } else {
    out.pooled = stats_pool(h5);
    c.pool_input = std::move(h5);
  }

  const Matrix<T> pooled(out.pooled);
  Matrix<T> seg1 = detail::dense_forward(s, "speaker.1", pooled, Activation::identity, &c.spk1);
  Matrix<T> seg1_act = relu(seg1);
  if (cfg.embedding_layer == EmbeddingLayer::segment1) out.embedding = seg1.row(0);
  if (scope == ForwardScope::embedding && cfg.embedding_layer == EmbeddingLayer::segment1) return out;

  Matrix<T> seg2 = detail::dense_forward(s, "speaker.2", seg1_act, Activation::identity, &c.spk2);
  if (cfg.embedding_layer == EmbeddingLayer::segment2) out.embedding = seg2.row(0);
  if (scope == ForwardScope::embedding) return out;

  out.speaker_logits =
      detail::dense_forward(s, "speaker.head", relu(seg2), Activation::identity, &c.spk_head).row(0);

  if (cfg.use_segment_adversarial) {
    Matrix<T> a = detail::dense_forward(s, "adversary.1", grl_forward(pooled), Activation::relu, &c.adv1);
    a = detail::dense_forward(s, "adversary.2", a, Activation::relu, &c.adv2);
    out.segment_phoneme_logits =
        detail::dense_forward(s, "adversary.head", a, Activation::identity, &c.adv_head).row(0);
  }
  return out;
}

/// Accumulates parameter gradients into `model.store` grads.
template <class T>
void backward(const ForwardCache<T>& c, const ForwardOutputs<T>& out, const OutputGrads<T>& d, ModelParams<T>& model) {
  const NetworkConfig& cfg = model.config;
  auto& s = model.store;

  // Speaker subnet. The segment layers are affine + separate rectifier so the
  // embedding tap sits before the nonlinearity.
  Matrix<T> g = detail::dense_backward(s, "speaker.head", c.spk_head, Matrix<T>(d.speaker_logits),
                                       Activation::identity);
  g = relu_backward(relu(c.spk2.output), g);
  g = detail::dense_backward(s, "speaker.2", c.spk2, g, Activation::identity);
  g = relu_backward(relu(c.spk1.output), g);
  Matrix<T> dpooled = detail::dense_backward(s, "speaker.1", c.spk1, g, Activation::identity);

  if (cfg.use_segment_adversarial && d.segment_phoneme_logits) {
    Matrix<T> a = detail::dense_backward(s, "adversary.head", c.adv_head, Matrix<T>(*d.segment_phoneme_logits),
                                         Activation::identity);
    a = detail::dense_backward(s, "adversary.2", c.adv2, a, Activation::relu);
    a = detail::dense_backward(s, "adversary.1", c.adv1, a, Activation::relu);
    dpooled += grl_backward(a, cfg.grl_lambda);
  }

  const Eigen::Index frames = c.h4.rows();
  Matrix<T> dh5;
  Matrix<T> dpf_logits = Matrix<T>::Zero(frames, cfg.num_phonemes);
  bool have_pf_grad = false;
  if (cfg.pooling.phoneme_aware()) {
    auto pg = phoneme_attentive_pool_backward(c.pool, cfg.pooling, RowVector<T>(dpooled.row(0)));
    dh5 = std::move(pg.dfeatures);
    dpf_logits += softmax_backward(*out.frame_posteriors, pg.dposterior, Axis::channel);
    have_pf_grad = true;
  } else {
    dh5 = stats_pool_backward(c.pool_input, out.pooled, RowVector<T>(dpooled.row(0)));
  }
  if (d.frame_phoneme_logits) {
    dpf_logits += *d.frame_phoneme_logits;
    have_pf_grad = true;
  }

  Matrix<T> dh4 = detail::dense_backward(s, "etdnn5", c.etdnn5, dh5, Activation::identity);
  if (cfg.use_frame_phonetic && have_pf_grad) {
    Matrix<T> f = detail::dense_backward(s, "frame_phonetic.head", c.pf_head, dpf_logits, Activation::identity);
    f = detail::dense_backward(s, "frame_phonetic.2", c.pf2, f, Activation::relu);
    dh4 += detail::dense_backward(s, "frame_phonetic.1", c.pf1, f, Activation::relu);
  }

  const auto& offsets = shared_layer_offsets();
  Matrix<T> dh = std::move(dh4);
  for (int k = 3; k >= 0; --k) {
    const std::string name = "shared." + std::to_string(k + 1);
    if (cfg.use_se) {
      RowVector<T> b1, b2;
      auto sp = detail::se_params(s, name, b1, b2);
      auto sg = se_backward(*c.se[k], sp, dh);
      s.at(name + ".se.1.w").grad += sg.dw1;
      s.at(name + ".se.1.b").grad += sg.db1;
      s.at(name + ".se.2.w").grad += sg.dw2;
      s.at(name + ".se.2.b").grad += sg.db2;
      dh = std::move(sg.dx);
    }
    auto& w = s.at(name + ".w");
    const Eigen::Index in_dim = k == 0 ? cfg.input_dim : cfg.hidden_dim;
    TdnnLayerSpec spec{offsets[k], in_dim, cfg.hidden_dim, cfg.use_se, Activation::relu};
    auto tg = tdnn_backward(c.shared[k], spec, w.value, dh);
    w.grad += tg.dw;
    s.at(name + ".b").grad += tg.db;
    dh = std::move(tg.dx);
  }
}

/// Segment-level speaker embedding; only the layers it depends on are run.
template <class T>
RowVector<T> extract_embedding(const Matrix<T>& x, const ModelParams<T>& model) {
  return forward(x, model, static_cast<ForwardCache<T>*>(nullptr), ForwardScope::embedding).embedding;
}

}  // namespace pmtl
