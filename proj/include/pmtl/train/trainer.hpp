// pmtl/train/trainer.hpp

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
#include "pmtl/model/checkpoint.hpp"
#include "pmtl/model/losses.hpp"
#include "pmtl/train/adam.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pmtl {

/// A fixed-length training segment cut from one utterance.
struct Chunk {
  Matrix<float> features;
  std::vector<int> frame_index;  // source frame of every chunk frame
  std::vector<int> frame_phonemes;
  std::vector<double> segment_phonemes;
};

/// Cuts floor(T / chunk_len) non-overlapping chunks at random offsets.
/// Utterances shorter than chunk_len yield one chunk, wrapped by repetition.
/// Frame labels follow the frames; the segment distribution is recomputed on
/// the chunk. `num_phonemes` is only needed when the utterance is aligned.
template <class Rng>
std::vector<Chunk> make_chunks(const UtteranceRecord& u, int chunk_len, Rng& rng, int num_phonemes = 0) {
  if (chunk_len < 1) throw ValidationError("make_chunks: chunk_len must be >= 1");
  const int frames = static_cast<int>(u.features.rows());
  if (frames == 0) throw EmptyInputError("make_chunks: utterance '" + u.utt_id + "' has no frames");
  const bool aligned = !u.alignment.empty();
  if (aligned && static_cast<int>(u.alignment.size()) != frames)
    throw ValidationError("make_chunks: alignment length differs from frame count for '" + u.utt_id + "'");

  std::vector<int> starts;
  if (frames < chunk_len) {
    starts.push_back(0);
  } else {
    const int count = frames / chunk_len;
    const int slack = frames - count * chunk_len;
    std::uniform_int_distribution<int> pick(0, slack);
    std::vector<int> shifts(count);
    for (auto& s : shifts) s = pick(rng);
    std::sort(shifts.begin(), shifts.end());
    for (int i = 0; i < count; ++i) starts.push_back(i * chunk_len + shifts[i]);
  }

  std::vector<Chunk> out;
  for (int start : starts) {
    Chunk c;
    c.features.resize(chunk_len, u.features.cols());
    for (int i = 0; i < chunk_len; ++i) {
      const int src = (start + i) % frames;
      c.frame_index.push_back(src);
      c.features.row(i) = u.features.row(src);
      if (aligned) c.frame_phonemes.push_back(u.alignment[src]);
    }
    if (aligned && num_phonemes > 0) c.segment_phonemes = segment_soft_labels(c.frame_phonemes, num_phonemes);
    out.push_back(std::move(c));
  }
  return out;
}

struct TrainSchedule {
  int epochs = 20;
  double lr = 1e-3;
  int batch_size = 256;
  int chunk_len = 100;
  int patience = 2;
  double lr_decay = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 0) throw ValidationError("train: epochs must be >= 0");
    if (lr < 0) throw ValidationError("train: lr must be >= 0");
    if (batch_size < 1 || chunk_len < 1) throw ValidationError("train: batch_size and chunk_len must be >= 1");
    if (patience < 1 || !(lr_decay > 0 && lr_decay <= 1)) throw ValidationError("train: invalid plateau schedule");
  }

  void read_kv(const KeyValueConfig& kv) {
    kv.take_into("train.epochs", epochs);
    kv.take_into("train.lr", lr);
    kv.take_into("train.batch_size", batch_size);
    kv.take_into("train.chunk_len", chunk_len);
    kv.take_into("train.patience", patience);
    kv.take_into("train.lr_decay", lr_decay);
  }
};

struct TraceRow {
  int epoch = 0;
  int batch = 0;  // -1 marks the epoch average
  double speaker = 0, frame_phonetic = 0, segment_phonetic = 0, total = 0;
};

inline std::string trace_csv_header() { return "epoch,batch,L_s,L_pf,L_ps,L_total\n"; }

inline std::string trace_csv_row(const TraceRow& r) {
  return std::to_string(r.epoch) + "," + (r.batch < 0 ? std::string("avg") : std::to_string(r.batch)) + "," +
         format_real(r.speaker) + "," + format_real(r.frame_phonetic) + "," + format_real(r.segment_phonetic) + "," +
         format_real(r.total) + "\n";
}

/// Model, optimizer and schedule state between epochs; everything needed to
/// resume bit-identically.
struct TrainerState {
  ModelParams<float> model;
  AdamState<float> adam;
  int epochs_done = 0;
  double lr = 1e-3;
  double best_loss = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
};

inline Checkpoint trainer_checkpoint(const TrainerState& st) {
  KeyValueConfig extra;
  extra.set("trainer.epochs_done", std::to_string(st.epochs_done));
  extra.set("trainer.lr", format_real(st.lr));
  extra.set("trainer.best_loss", std::isinf(st.best_loss) ? "inf" : format_real(st.best_loss));
  extra.set("trainer.bad_epochs", std::to_string(st.bad_epochs));
  extra.set("adam.step", std::to_string(st.adam.step));
  Checkpoint ck = to_checkpoint(st.model, extra);
  for (std::size_t i = 0; i < st.model.store.size(); ++i) {
    ck.tensors.emplace_back("adam.m:" + st.model.store[i].name, st.adam.m[i]);
    ck.tensors.emplace_back("adam.v:" + st.model.store[i].name, st.adam.v[i]);
  }
  return ck;
}

inline TrainerState trainer_state_from(const Checkpoint& ck) {
  TrainerState st;
  st.model = from_checkpoint<float>(ck);
  st.adam = AdamState<float>::for_params(st.model.store);
  ck.meta.take_into("trainer.epochs_done", st.epochs_done);
  ck.meta.take_into("trainer.lr", st.lr);
  if (auto v = ck.meta.take("trainer.best_loss"))
    st.best_loss = *v == "inf" ? std::numeric_limits<double>::infinity() : parse_real(*v);
  ck.meta.take_into("trainer.bad_epochs", st.bad_epochs);
  ck.meta.take_into("adam.step", st.adam.step);
  st.adam.lr = st.lr;
  for (std::size_t i = 0; i < st.model.store.size(); ++i) {
    const auto& name = st.model.store[i].name;
    const Matrix<float>* m = ck.find("adam.m:" + name);
    const Matrix<float>* v = ck.find("adam.v:" + name);
    if (!m || !v) throw FormatError(FormatError::Kind::io, "checkpoint lacks optimizer state for '" + name + "'");
    st.adam.m[i] = *m;
    st.adam.v[i] = *v;
  }
  return st;
}

/// Sorted speaker ids; the position is the class index.
inline std::vector<std::string> speaker_index(const std::vector<UtteranceRecord>& utts) {
  std::vector<std::string> ids;
  for (const auto& u : utts) ids.push_back(u.speaker_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

struct TrainResult {
  TrainerState state;
  std::vector<TraceRow> trace;
  std::string checkpoint_path;
};

/// Chunked mini-batch Adam training. Each epoch takes one random chunk per
/// utterance, interleaves speakers round-robin (random order within each
/// round) and averages gradients over each batch. After every epoch the
/// learning rate is multiplied by lr_decay when the epoch loss has not
/// improved for `patience` epochs, and a checkpoint is written to
/// `out_dir/epoch_<k>.pmtl` plus `out_dir/final.pmtl` when training ends.
class Trainer {
 public:
  Trainer(std::vector<UtteranceRecord> utts, TrainSchedule schedule)
      : utts_(std::move(utts)), schedule_(schedule), speakers_(speaker_index(utts_)) {
    schedule_.validate();
    if (speakers_.size() < 2) throw ValidationError("train: corpus needs at least 2 speakers");
    for (std::size_t i = 0; i < speakers_.size(); ++i) speaker_of_[speakers_[i]] = static_cast<int>(i);
  }

  const std::vector<std::string>& speakers() const { return speakers_; }

  TrainerState initial_state(NetworkConfig cfg) const {
    cfg.num_speakers = static_cast<Eigen::Index>(speakers_.size());
    if (cfg.needs_alignments())
      for (const auto& u : utts_)
        if (u.alignment.empty())
          throw ValidationError("train: configuration needs phoneme alignments but '" + u.utt_id + "' has none");
    TrainerState st;
    st.model = build<float>(cfg, schedule_.seed);
    st.adam = AdamState<float>::for_params(st.model.store, schedule_.lr);
    st.lr = schedule_.lr;
    return st;
  }

  /// Runs the remaining epochs of `st`. `out_dir` may be empty to skip
  /// writing files.
  TrainResult run(TrainerState st, const std::string& out_dir = "") const {
    namespace fs = std::filesystem;
    TrainResult result;
    if (!out_dir.empty()) fs::create_directories(out_dir);
    for (int epoch = st.epochs_done + 1; epoch <= schedule_.epochs; ++epoch) {
      TraceRow avg = run_epoch(st, epoch, result.trace);
      if (avg.total < st.best_loss) {
        st.best_loss = avg.total;
        st.bad_epochs = 0;
      } else if (++st.bad_epochs >= schedule_.patience) {
        st.lr *= schedule_.lr_decay;
        st.bad_epochs = 0;
      }
      st.adam.lr = st.lr;
      st.epochs_done = epoch;
      if (!out_dir.empty()) {
        result.checkpoint_path = (fs::path(out_dir) / ("epoch_" + std::to_string(epoch) + ".pmtl")).string();
        write_checkpoint(result.checkpoint_path, trainer_checkpoint(st));
      }
    }
    if (!out_dir.empty()) {
      result.checkpoint_path = (fs::path(out_dir) / "final.pmtl").string();
      write_checkpoint(result.checkpoint_path, trainer_checkpoint(st));
    }
    result.state = std::move(st);
    return result;
  }

  /// The epoch's chunk order, batches of at most batch_size.
  std::vector<std::vector<std::pair<int, Chunk>>> epoch_batches(int epoch, int num_phonemes) const {
    auto rng = epoch_rng(schedule_.seed, epoch);
    std::map<std::string, std::vector<std::pair<int, Chunk>>> per_speaker;
    for (const auto& u : utts_) {
      auto chunks = make_chunks(u, schedule_.chunk_len, rng, num_phonemes);
      std::uniform_int_distribution<std::size_t> pick(0, chunks.size() - 1);
      per_speaker[u.speaker_id].emplace_back(speaker_of_.at(u.speaker_id), std::move(chunks[pick(rng)]));
    }
    std::vector<std::vector<std::pair<int, Chunk>>*> queues;
    for (auto& [spk, list] : per_speaker) {
      std::shuffle(list.begin(), list.end(), rng);
      queues.push_back(&list);
    }
    std::vector<std::pair<int, Chunk>> order;
    std::vector<std::size_t> next(queues.size(), 0);
    std::vector<std::size_t> ids(queues.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    for (bool any = true; any;) {
      any = false;
      std::shuffle(ids.begin(), ids.end(), rng);
      for (std::size_t q : ids) {
        if (next[q] < queues[q]->size()) {
          order.push_back(std::move((*queues[q])[next[q]++]));
          any = true;
        }
      }
    }
    std::vector<std::vector<std::pair<int, Chunk>>> batches;
    for (std::size_t i = 0; i < order.size(); i += schedule_.batch_size) {
      const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(schedule_.batch_size));
      batches.emplace_back(std::make_move_iterator(order.begin() + i), std::make_move_iterator(order.begin() + end));
    }
    return batches;
  }

 private:
  TraceRow run_epoch(TrainerState& st, int epoch, std::vector<TraceRow>& trace) const {
    const NetworkConfig& cfg = st.model.config;
    const auto batches = epoch_batches(epoch, static_cast<int>(cfg.num_phonemes));
    TraceRow avg{epoch, -1};
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      st.model.store.zero_grad();
      TraceRow row{epoch, static_cast<int>(b) + 1};
      for (const auto& [speaker, chunk] : batches[b]) {
        LabelBundle labels{speaker, chunk.frame_phonemes, chunk.segment_phonemes};
        ForwardCache<float> cache;
        auto out = forward(chunk.features, st.model, &cache);
        OutputGrads<float> grads;
        auto l = compute_losses(out, labels, cfg, &grads);
        backward(cache, out, grads, st.model);
        row.speaker += l.speaker;
        row.frame_phonetic += l.frame_phonetic;
        row.segment_phonetic += l.segment_phonetic;
        row.total += l.total;
      }
      const double n = static_cast<double>(batches[b].size());
      if (!std::isfinite(row.total))
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + " batch " + std::to_string(b + 1));
      for (auto& p : st.model.store) p.grad /= static_cast<float>(n);
      st.adam.lr = st.lr;
      adam_step(st.model.store, st.adam);
      avg.speaker += row.speaker;
      avg.frame_phonetic += row.frame_phonetic;
      avg.segment_phonetic += row.segment_phonetic;
      avg.total += row.total;
      seen += batches[b].size();
      row.speaker /= n;
      row.frame_phonetic /= n;
      row.segment_phonetic /= n;
      row.total /= n;
      trace.push_back(row);
    }
    if (seen > 0) {
      const double n = static_cast<double>(seen);
      avg.speaker /= n;
      avg.frame_phonetic /= n;
      avg.segment_phonetic /= n;
      avg.total /= n;
    }
    trace.push_back(avg);
    return avg;
  }

  std::vector<UtteranceRecord> utts_;
  TrainSchedule schedule_;
  std::vector<std::string> speakers_;
  std::map<std::string, int> speaker_of_;
};

inline void write_trace(const std::string& path, const std::vector<TraceRow>& trace, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error("cannot write loss trace '" + path + "'");
  if (!append) out << trace_csv_header();
  for (const auto& r : trace) out << trace_csv_row(r);
}

}  // namespace pmtl
