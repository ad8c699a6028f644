// pmtl/model/grad_registry.hpp

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
#include "pmtl/model/losses.hpp"
#include "pmtl/numeric/grad_check.hpp"

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace pmtl {

/// A registered differentiable operation plus a generator of random
/// evaluation points.
struct GradCheckCase {
  DiffOp<GradReal> op;
  std::function<std::vector<Matrix<GradReal>>(std::uint64_t seed)> sample;
};

namespace detail {

using GR = GradReal;

inline Matrix<GR> scalar(GR v) {
  Matrix<GR> m(1, 1);
  m(0, 0) = v;
  return m;
}

inline std::vector<Matrix<GR>> randn(std::uint64_t seed, std::initializer_list<std::pair<int, int>> shapes,
                                     double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<Matrix<GR>> out;
  for (auto [r, c] : shapes) out.push_back(random_matrix<GR>(r, c, rng, sd));
  return out;
}

}  // namespace detail

/// Loss-head labels used by the loss and network cases.
inline LabelBundle gradcheck_labels(const NetworkConfig& cfg, int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5bd1e995u);
  LabelBundle y;
  y.speaker = std::uniform_int_distribution<int>(0, static_cast<int>(cfg.num_speakers) - 1)(rng);
  std::uniform_int_distribution<int> ph(0, static_cast<int>(cfg.num_phonemes) - 1);
  for (int t = 0; t < frames; ++t) y.frame_phonemes.push_back(ph(rng));
  y.segment_phonemes = segment_soft_labels(y.frame_phonemes, static_cast<int>(cfg.num_phonemes));
  return y;
}

/// Gradient of L_total w.r.t. every parameter of a network, as a DiffOp over
/// the parameter list. The input features and labels are fixed. The gradient
/// reversal coefficient is forced to -1 (identity) so the analytic gradient
/// is the true gradient of L_total; the reversal itself is checked separately.
inline DiffOp<GradReal> network_loss_op(NetworkConfig cfg, Matrix<GradReal> features, LabelBundle labels) {
  using GR = GradReal;
  cfg.grl_lambda = -1.0;
  auto model = std::make_shared<ModelParams<GR>>(build<GR>(cfg, 0));
  auto load = [model](const std::vector<Matrix<GR>>& in) {
    for (std::size_t i = 0; i < model->store.size(); ++i) model->store[i].value = in[i];
  };
  DiffOp<GR> op;
  op.name = "network_total_loss";
  op.forward = [=](const std::vector<Matrix<GR>>& in) {
    load(in);
    auto out = forward(features, *model);
    return detail::scalar(compute_losses(out, labels, model->config).total);
  };
  op.backward = [=](const std::vector<Matrix<GR>>& in, const Matrix<GR>& dy) {
    load(in);
    model->store.zero_grad();
    ForwardCache<GR> cache;
    auto out = forward(features, *model, &cache);
    OutputGrads<GR> g;
    compute_losses(out, labels, model->config, &g);
    const GR up = dy(0, 0);
    g.speaker_logits *= up;
    if (g.frame_phoneme_logits) *g.frame_phoneme_logits *= up;
    if (g.segment_phoneme_logits) *g.segment_phoneme_logits *= up;
    backward(cache, out, g, *model);
    std::vector<Matrix<GR>> grads;
    for (const auto& p : model->store) grads.push_back(p.grad);
    return grads;
  };
  return op;
}

/// Random parameter point for `network_loss_op`.
inline std::vector<Matrix<GradReal>> network_params_sample(const NetworkConfig& cfg, std::uint64_t seed) {
  auto model = build<GradReal>(cfg, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> small(0.0, 0.1);
  std::vector<Matrix<GradReal>> out;
  for (auto& p : model.store) {
    Matrix<GradReal> v = p.value;
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += static_cast<GradReal>(small(rng));
    out.push_back(std::move(v));
  }
  return out;
}

/// Tiny network configuration: input_dim 5, hidden 8, P 4, N 3.
inline NetworkConfig tiny_network_config(const std::string& preset = "S6",
                                         PoolingKind pooling = PoolingKind::phone_att_weighted) {
  NetworkConfig c;
  c.input_dim = 5;
  c.hidden_dim = 8;
  c.num_phonemes = 4;
  c.num_speakers = 3;
  apply_preset(c, preset, pooling);
  return c;
}

/// Every differentiable operation of the library.
inline std::vector<GradCheckCase> gradcheck_registry() {
  using GR = GradReal;
  using detail::randn;
  using detail::scalar;
  std::vector<GradCheckCase> cases;

  cases.push_back({{"affine",
                    [](const auto& in) { return affine(in[0], in[1], RowVector<GR>(in[2].row(0))); },
                    [](const auto& in, const Matrix<GR>& dy) {
                      auto g = affine_backward(in[0], in[1], dy);
                      return std::vector<Matrix<GR>>{g.dx, g.dw, Matrix<GR>(g.db)};
                    }},
                   [](std::uint64_t s) { return randn(s, {{4, 3}, {3, 2}, {1, 2}}); }});

  for (Axis axis : {Axis::time, Axis::channel}) {
    cases.push_back({{axis == Axis::time ? "softmax_time" : "softmax_channel",
                      [axis](const auto& in) { return softmax(in[0], axis); },
                      [axis](const auto& in, const Matrix<GR>& dy) {
                        return std::vector<Matrix<GR>>{softmax_backward(softmax(in[0], axis), dy, axis)};
                      }},
                     [](std::uint64_t s) { return randn(s, {{5, 4}}, 2.0); }});
  }

  cases.push_back({{"splice",
                    [](const auto& in) { return splice(in[0], std::vector<int>{-2, 0, 2}); },
                    [](const auto& in, const Matrix<GR>& dy) {
                      return std::vector<Matrix<GR>>{splice_backward(dy, in[0].cols(), std::vector<int>{-2, 0, 2})};
                    }},
                   [](std::uint64_t s) { return randn(s, {{5, 3}}); }});

  cases.push_back({{"stats_pool", [](const auto& in) { return Matrix<GR>(stats_pool(in[0])); },
                    [](const auto& in, const Matrix<GR>& dy) {
                      return std::vector<Matrix<GR>>{stats_pool_backward(in[0], stats_pool(in[0]), RowVector<GR>(dy.row(0)))};
                    }},
                   [](std::uint64_t s) { return randn(s, {{7, 3}}); }});

  const TdnnLayerSpec tdnn{{-2, 0, 2}, 3, 4, false, Activation::relu};
  cases.push_back({{"tdnn",
                    [tdnn](const auto& in) { return tdnn_forward(in[0], tdnn, in[1], RowVector<GR>(in[2].row(0))); },
                    [tdnn](const auto& in, const Matrix<GR>& dy) {
                      TdnnCache<GR> c;
                      tdnn_forward(in[0], tdnn, in[1], RowVector<GR>(in[2].row(0)), &c);
                      auto g = tdnn_backward(c, tdnn, in[1], dy);
                      return std::vector<Matrix<GR>>{g.dx, g.dw, Matrix<GR>(g.db)};
                    }},
                   [](std::uint64_t s) { return randn(s, {{6, 3}, {9, 4}, {1, 4}}); }});

  const SeBlockSpec se{8, 4};
  auto se_run = [se](const std::vector<Matrix<GR>>& in, SeCache<GR>* c) {
    RowVector<GR> b1 = in[2].row(0), b2 = in[4].row(0);
    return se_forward(in[0], se, SeParams<GR>{in[1], b1, in[3], b2}, c);
  };
  cases.push_back({{"se_block", [se_run](const auto& in) { return se_run(in, nullptr); },
                    [se_run](const auto& in, const Matrix<GR>& dy) {
                      SeCache<GR> c;
                      se_run(in, &c);
                      RowVector<GR> b1 = in[2].row(0), b2 = in[4].row(0);
                      auto g = se_backward(c, SeParams<GR>{in[1], b1, in[3], b2}, dy);
                      return std::vector<Matrix<GR>>{g.dx, g.dw1, Matrix<GR>(g.db1), g.dw2, Matrix<GR>(g.db2)};
                    }},
                   [](std::uint64_t s) { return randn(s, {{6, 8}, {16, 2}, {1, 2}, {2, 8}, {1, 8}}); }});

  // f(grl(x)) with f = elementwise square. The reversed analytic gradient is
  // negated back before comparison with central differences.
  cases.push_back({{"grl_composite",
                    [](const auto& in) { return Matrix<GR>(grl_forward(in[0]).array().square().matrix()); },
                    [](const auto& in, const Matrix<GR>& dy) {
                      Matrix<GR> df = (GR(2) * grl_forward(in[0]).array() * dy.array()).matrix();
                      return std::vector<Matrix<GR>>{Matrix<GR>(-grl_backward(df, 1.0))};
                    }},
                   [](std::uint64_t s) { return randn(s, {{3, 4}}); }});

  for (PoolingKind kind : {PoolingKind::phone_att_literal, PoolingKind::phone_att_weighted}) {
    const PoolingMode mode{kind, 1.5};
    // Input 0 holds posterior logits so every perturbation stays on the simplex.
    cases.push_back({{kind == PoolingKind::phone_att_literal ? "phone_att_pool_literal" : "phone_att_pool_weighted",
                      [mode](const auto& in) {
                        return Matrix<GR>(phoneme_attentive_pool(softmax(in[0], Axis::channel), in[1], mode));
                      },
                      [mode](const auto& in, const Matrix<GR>& dy) {
                        PoolCache<GR> c;
                        Matrix<GR> p = softmax(in[0], Axis::channel);
                        phoneme_attentive_pool(p, in[1], mode, &c);
                        auto g = phoneme_attentive_pool_backward(c, mode, RowVector<GR>(dy.row(0)));
                        return std::vector<Matrix<GR>>{softmax_backward(p, g.dposterior, Axis::channel), g.dfeatures};
                      }},
                     [](std::uint64_t s) { return randn(s, {{6, 3}, {6, 3}}, 1.5); }});
  }

  NetworkConfig heads;
  heads.num_speakers = 5;
  heads.num_phonemes = 4;
  heads.use_frame_phonetic = false;
  heads.pooling.kind = PoolingKind::stats;
  heads.use_segment_adversarial = false;
  cases.push_back({{"speaker_cross_entropy",
                    [heads](const auto& in) {
                      ForwardOutputs<GR> o;
                      o.speaker_logits = in[0].row(0);
                      return scalar(compute_losses(o, gradcheck_labels(heads, 1, 3), heads).speaker);
                    },
                    [heads](const auto& in, const Matrix<GR>& dy) {
                      ForwardOutputs<GR> o;
                      o.speaker_logits = in[0].row(0);
                      OutputGrads<GR> g;
                      compute_losses(o, gradcheck_labels(heads, 1, 3), heads, &g);
                      return std::vector<Matrix<GR>>{Matrix<GR>(dy(0, 0) * g.speaker_logits)};
                    }},
                   [](std::uint64_t s) { return randn(s, {{1, 5}}, 2.0); }});

  NetworkConfig frame = heads;
  frame.use_frame_phonetic = true;
  frame.alpha = 1.0;
  cases.push_back({{"frame_phoneme_cross_entropy",
                    [frame](const auto& in) {
                      ForwardOutputs<GR> o;
                      o.speaker_logits = RowVector<GR>::Zero(frame.num_speakers);
                      o.frame_phoneme_logits = in[0];
                      return scalar(compute_losses(o, gradcheck_labels(frame, 6, 4), frame).frame_phonetic);
                    },
                    [frame](const auto& in, const Matrix<GR>& dy) {
                      ForwardOutputs<GR> o;
                      o.speaker_logits = RowVector<GR>::Zero(frame.num_speakers);
                      o.frame_phoneme_logits = in[0];
                      OutputGrads<GR> g;
                      compute_losses(o, gradcheck_labels(frame, 6, 4), frame, &g);
                      return std::vector<Matrix<GR>>{Matrix<GR>(dy(0, 0) * *g.frame_phoneme_logits)};
                    }},
                   [](std::uint64_t s) { return randn(s, {{6, 4}}, 2.0); }});

  NetworkConfig seg = heads;
  seg.use_segment_adversarial = true;
  seg.beta = 1.0;
  cases.push_back({{"segment_phoneme_kl",
                    [seg](const auto& in) {
                      ForwardOutputs<GR> o;
                      o.speaker_logits = RowVector<GR>::Zero(seg.num_speakers);
                      o.segment_phoneme_logits = in[0].row(0);
                      return scalar(compute_losses(o, gradcheck_labels(seg, 9, 5), seg).segment_phonetic);
                    },
                    [seg](const auto& in, const Matrix<GR>& dy) {
                      ForwardOutputs<GR> o;
                      o.speaker_logits = RowVector<GR>::Zero(seg.num_speakers);
                      o.segment_phoneme_logits = in[0].row(0);
                      OutputGrads<GR> g;
                      compute_losses(o, gradcheck_labels(seg, 9, 5), seg, &g);
                      return std::vector<Matrix<GR>>{Matrix<GR>(dy(0, 0) * *g.segment_phoneme_logits)};
                    }},
                   [](std::uint64_t s) { return randn(s, {{1, 4}}, 2.0); }});

  for (const char* preset : {"S6"}) {
    const NetworkConfig cfg = tiny_network_config(preset);
    std::mt19937_64 rng(99);
    Matrix<GR> x = random_matrix<GR>(6, cfg.input_dim, rng);
    cases.push_back({network_loss_op(cfg, x, gradcheck_labels(cfg, 6, 7)),
                     [cfg](std::uint64_t s) { return network_params_sample(cfg, s); }});
    cases.back().op.name = std::string("network_") + preset;
  }
  return cases;
}

}  // namespace pmtl
