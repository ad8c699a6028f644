// pmtl/data/corpus.hpp

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

#include "pmtl/data/feat_io.hpp"
#include "pmtl/io/kv_config.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace pmtl {

/// Normalized histogram of frame labels over P phonemes. The largest bin
/// absorbs the rounding residue so that the bins, accumulated in index
/// order, sum to exactly one.
inline std::vector<double> segment_soft_labels(const std::vector<int>& labels, int num_phonemes) {
  if (labels.empty()) throw EmptyInputError("segment_soft_labels: empty alignment");
  if (num_phonemes < 1) throw ValidationError("segment_soft_labels: num_phonemes must be >= 1");
  std::vector<std::size_t> counts(num_phonemes, 0);
  for (int l : labels) {
    if (l < 0 || l >= num_phonemes) throw ValidationError("segment_soft_labels: label " + std::to_string(l) + " out of range");
    ++counts[l];
  }
  const double n = static_cast<double>(labels.size());
  std::vector<double> dist(num_phonemes);
  for (int k = 0; k < num_phonemes; ++k) dist[k] = static_cast<double>(counts[k]) / n;
  const auto top = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  for (int pass = 0; pass < 8; ++pass) {
    double sum = 0.0;
    for (double d : dist) sum += d;
    if (sum == 1.0) break;
    dist[top] += 1.0 - sum;
  }
  return dist;
}

enum class Device : char { A = 'A', B = 'B', C = 'C' };

inline Device parse_device(const std::string& s) {
  if (s == "A") return Device::A;
  if (s == "B") return Device::B;
  if (s == "C") return Device::C;
  throw ValidationError("unknown device '" + s + "'");
}

/// Enrollment sessions are 1, 4 and 7, recorded on device A.
inline bool is_enrollment(int session, Device device) {
  return device == Device::A && (session == 1 || session == 4 || session == 7);
}

/// Device for a 1-based session index: enrollment sessions use A, the
/// remaining sessions alternate B and C.
inline Device session_device(int session) {
  if (session == 1 || session == 4 || session == 7) return Device::A;
  int rank = 0;
  for (int s = 1; s < session; ++s)
    if (s != 1 && s != 4 && s != 7) ++rank;
  return rank % 2 == 0 ? Device::B : Device::C;
}

struct UtteranceRecord {
  std::string utt_id;
  std::string speaker_id;
  int phrase_id = 0;
  int session = 1;
  Device device = Device::A;
  Matrix<float> features;
  std::vector<int> alignment;
};

struct SynthConfig {
  int num_speakers = 16;
  int num_phrases = 4;
  int num_phonemes = 12;
  int phonemes_per_phrase = 6;
  int min_frames_per_phoneme = 8;
  int max_frames_per_phoneme = 16;
  int feature_dim = 23;
  double speaker_offset_sd = 1.0;
  double phoneme_mean_sd = 2.0;
  double noise_sd = 1.0;
  double device_offset_sd = 0.3;
  int sessions_per_speaker = 9;
  std::uint64_t seed = 1;

  void validate() const {
    if (num_speakers < 2) throw ValidationError("synth: num_speakers must be >= 2");
    if (num_phrases < 2) throw ValidationError("synth: num_phrases must be >= 2");
    if (num_phonemes < num_phrases) throw ValidationError("synth: num_phonemes must be >= num_phrases");
    if (phonemes_per_phrase < 1) throw ValidationError("synth: phonemes_per_phrase must be >= 1");
    if (min_frames_per_phoneme < 1 || max_frames_per_phoneme < min_frames_per_phoneme)
      throw ValidationError("synth: invalid frames-per-phoneme range");
    if (feature_dim < 1) throw ValidationError("synth: feature_dim must be >= 1");
    if (speaker_offset_sd < 0 || phoneme_mean_sd < 0 || noise_sd < 0 || device_offset_sd < 0)
      throw ValidationError("synth: standard deviations must be >= 0");
    if (sessions_per_speaker < 1) throw ValidationError("synth: sessions_per_speaker must be >= 1");
  }

  void read_kv(const KeyValueConfig& kv) {
    kv.take_into("synth.speakers", num_speakers);
    kv.take_into("synth.phrases", num_phrases);
    kv.take_into("synth.phonemes", num_phonemes);
    kv.take_into("synth.phonemes_per_phrase", phonemes_per_phrase);
    kv.take_into("synth.min_frames_per_phoneme", min_frames_per_phoneme);
    kv.take_into("synth.max_frames_per_phoneme", max_frames_per_phoneme);
    kv.take_into("synth.feature_dim", feature_dim);
    kv.take_into("synth.speaker_offset_sd", speaker_offset_sd);
    kv.take_into("synth.phoneme_mean_sd", phoneme_mean_sd);
    kv.take_into("synth.noise_sd", noise_sd);
    kv.take_into("synth.device_offset_sd", device_offset_sd);
    kv.take_into("synth.sessions", sessions_per_speaker);
  }
};

enum class Subset { background, development, evaluation };

inline std::string to_string(Subset s) {
  switch (s) {
    case Subset::background: return "background";
    case Subset::development: return "dev";
    case Subset::evaluation: return "eval";
  }
  return "?";
}

struct SynthCorpus {
  std::vector<UtteranceRecord> utterances;
  std::vector<std::vector<int>> phrases;  // phoneme sequence per phrase
  std::map<std::string, Subset> speaker_subset;

  std::vector<const UtteranceRecord*> subset(Subset s) const {
    std::vector<const UtteranceRecord*> out;
    for (const auto& u : utterances)
      if (speaker_subset.at(u.speaker_id) == s) out.push_back(&u);
    return out;
  }
};

inline std::string speaker_name(int s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d", s);
  return buf;
}

inline std::string utterance_name(int s, int q, int session) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "spk%03d_p%02d_s%d", s, q, session);
  return buf;
}

/// Speakers are split into background / development / evaluation blocks in
/// roughly 2:1:1 proportion, in speaker order.
inline Subset speaker_split(int s, int num_speakers) {
  const int background = (num_speakers + 1) / 2;
  const int dev = (num_speakers - background + 1) / 2;
  if (s < background) return Subset::background;
  if (s < background + dev) return Subset::development;
  return Subset::evaluation;
}

/// Generates a speaker x phrase x session corpus. Frame t of phoneme k by
/// speaker s on device d is mu_k + o_s + delta_d + noise, every draw coming
/// from one seeded stream in a fixed order.
inline SynthCorpus synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int dim = cfg.feature_dim;
  auto draw_vectors = [&](int n, double sd) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(n, dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = sd * normal(rng);
    return m;
  };
  const Eigen::MatrixXd phoneme_means = draw_vectors(cfg.num_phonemes, cfg.phoneme_mean_sd);
  const Eigen::MatrixXd speaker_offsets = draw_vectors(cfg.num_speakers, cfg.speaker_offset_sd);
  const Eigen::MatrixXd device_offsets = draw_vectors(3, cfg.device_offset_sd);

  SynthCorpus corpus;
  std::uniform_int_distribution<int> any_phoneme(0, cfg.num_phonemes - 1);
  for (int q = 0; q < cfg.num_phrases; ++q) {
    // Distinct leading phonemes keep phrases distinct.
    std::vector<int> seq{q};
    while (static_cast<int>(seq.size()) < cfg.phonemes_per_phrase) {
      int k = any_phoneme(rng);
      if (cfg.num_phonemes > 1 && k == seq.back()) continue;
      seq.push_back(k);
    }
    corpus.phrases.push_back(std::move(seq));
  }

  std::uniform_int_distribution<int> duration(cfg.min_frames_per_phoneme, cfg.max_frames_per_phoneme);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < cfg.num_speakers; ++s) {
    corpus.speaker_subset[speaker_name(s)] = speaker_split(s, cfg.num_speakers);
    for (int q = 0; q < cfg.num_phrases; ++q) {
      for (int session = 1; session <= cfg.sessions_per_speaker; ++session) {
        UtteranceRecord u;
        u.utt_id = utterance_name(s, q, session);
        u.speaker_id = speaker_name(s);
        u.phrase_id = q;
        u.session = session;
        u.device = session_device(session);
        const int d = static_cast<int>(static_cast<char>(u.device) - 'A');
        for (int k : corpus.phrases[q]) {
          const int n = duration(rng);
          for (int f = 0; f < n; ++f) u.alignment.push_back(k);
        }
        u.features.resize(static_cast<Eigen::Index>(u.alignment.size()), dim);
        for (std::size_t t = 0; t < u.alignment.size(); ++t) {
          const int k = u.alignment[t];
          for (int j = 0; j < dim; ++j) {
            const double v = phoneme_means(k, j) + speaker_offsets(s, j) + device_offsets(d, j) +
                             cfg.noise_sd * normal(rng);
            u.features(static_cast<Eigen::Index>(t), j) = static_cast<float>(v);
          }
        }
        corpus.utterances.push_back(std::move(u));
      }
    }
  }
  return corpus;
}

/// One manifest line. Paths are stored relative to the manifest's directory
/// and resolved on read.
struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  int phrase_id = 0;
  int session = 1;
  Device device = Device::A;
  std::string feature_path;
  std::string alignment_path;  // "-" when the utterance carries no alignment

  bool enrollment() const { return is_enrollment(session, device); }
  bool has_alignment() const { return alignment_path != "-" && !alignment_path.empty(); }
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

inline std::string encode_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.utt_id + '\t' + e.speaker_id + '\t' + std::to_string(e.phrase_id) + '\t' + std::to_string(e.session) +
           '\t' + static_cast<char>(e.device) + '\t' + e.feature_path + '\t' + e.alignment_path + '\n';
  }
  return out;
}

inline std::vector<ManifestEntry> decode_manifest(const std::string& text, const std::string& origin = "<manifest>") {
  std::vector<ManifestEntry> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 7)
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected 7 tab-separated fields, got " +
                            std::to_string(f.size()));
    ManifestEntry e;
    e.utt_id = f[0];
    e.speaker_id = f[1];
    e.phrase_id = static_cast<int>(parse_int(f[2]));
    e.session = static_cast<int>(parse_int(f[3]));
    e.device = parse_device(f[4]);
    e.feature_path = f[5];
    e.alignment_path = f[6];
    out.push_back(std::move(e));
  }
  return out;
}

/// Writes a manifest. Relative paths are taken as relative to the manifest
/// already; absolute paths inside its directory tree are stored relative to
/// it, so write(read(m)) reproduces m.
inline void write_manifest(const std::string& path, std::vector<ManifestEntry> entries) {
  namespace fs = std::filesystem;
  const fs::path base = fs::absolute(fs::path(path)).parent_path().lexically_normal();
  auto relativize = [&](std::string& p) {
    if (p == "-" || p.empty() || fs::path(p).is_relative()) return;
    const fs::path rel = fs::path(p).lexically_normal().lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") p = rel.string();
  };
  for (auto& e : entries) {
    relativize(e.feature_path);
    relativize(e.alignment_path);
  }
  detail::write_file(path, encode_manifest(entries));
}

/// Reads a manifest; relative paths are resolved against its directory and
/// returned as absolute paths.
inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  auto entries = decode_manifest(detail::read_file(path), path);
  const std::filesystem::path base = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
  auto resolve = [&](std::string& p) {
    if (p == "-" || p.empty()) return;
    std::filesystem::path fp(p);
    if (fp.is_relative()) p = (base / fp).lexically_normal().string();
  };
  for (auto& e : entries) {
    resolve(e.feature_path);
    resolve(e.alignment_path);
  }
  return entries;
}

using AlignmentTable = std::vector<std::pair<std::string, std::vector<int>>>;

inline std::string encode_alignments(const AlignmentTable& table) {
  std::string out;
  for (const auto& [id, labels] : table) {
    out += id + '\t';
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(labels[i]);
    }
    out += '\n';
  }
  return out;
}

inline AlignmentTable decode_alignments(const std::string& text, const std::string& origin = "<alignments>") {
  AlignmentTable table;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected 'utt_id<TAB>labels'");
    std::vector<int> labels;
    std::istringstream ls(line.substr(tab + 1));
    std::string tok;
    while (ls >> tok) {
      long long v = parse_int(tok);
      if (v < 0) throw ValidationError(origin + ":" + std::to_string(lineno) + ": negative phoneme label");
      labels.push_back(static_cast<int>(v));
    }
    table.emplace_back(line.substr(0, tab), std::move(labels));
  }
  return table;
}

inline void write_alignments(const std::string& path, const AlignmentTable& table) {
  detail::write_file(path, encode_alignments(table));
}

inline AlignmentTable read_alignments(const std::string& path) {
  return decode_alignments(detail::read_file(path), path);
}

/// Loads features (and alignments, when the manifest names them) for every
/// entry, preserving manifest order.
inline std::vector<UtteranceRecord> load_utterances(const std::vector<ManifestEntry>& entries) {
  std::map<std::string, std::map<std::string, std::vector<int>>> ali_cache;
  std::vector<UtteranceRecord> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    UtteranceRecord u;
    u.utt_id = e.utt_id;
    u.speaker_id = e.speaker_id;
    u.phrase_id = e.phrase_id;
    u.session = e.session;
    u.device = e.device;
    u.features = read_archive(e.feature_path);
    if (e.has_alignment()) {
      auto it = ali_cache.find(e.alignment_path);
      if (it == ali_cache.end()) {
        std::map<std::string, std::vector<int>> m;
        for (auto& [id, labels] : read_alignments(e.alignment_path)) m[id] = std::move(labels);
        it = ali_cache.emplace(e.alignment_path, std::move(m)).first;
      }
      auto a = it->second.find(e.utt_id);
      if (a == it->second.end())
        throw ValidationError(e.alignment_path + ": no alignment for utterance '" + e.utt_id + "'");
      u.alignment = a->second;
      if (static_cast<Eigen::Index>(u.alignment.size()) != u.features.rows())
        throw ValidationError("utterance '" + e.utt_id + "': alignment has " + std::to_string(u.alignment.size()) +
                              " labels for " + std::to_string(u.features.rows()) + " frames");
    }
    out.push_back(std::move(u));
  }
  return out;
}

/// Writes features under `dir/feats/`, one alignment file and one manifest
/// per subset (`background.tsv`, `dev.tsv`, `eval.tsv`).
inline void write_corpus(const std::string& dir, const SynthCorpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "feats");
  for (Subset s : {Subset::background, Subset::development, Subset::evaluation}) {
    std::vector<ManifestEntry> entries;
    AlignmentTable ali;
    const std::string name = to_string(s);
    for (const UtteranceRecord* u : corpus.subset(s)) {
      const std::string feat_rel = "feats/" + u->utt_id + ".feat";
      write_archive((fs::path(dir) / feat_rel).string(), u->features);
      entries.push_back({u->utt_id, u->speaker_id, u->phrase_id, u->session, u->device, feat_rel, name + ".ali"});
      ali.emplace_back(u->utt_id, u->alignment);
    }
    write_alignments((fs::path(dir) / (name + ".ali")).string(), ali);
    write_manifest((fs::path(dir) / (name + ".tsv")).string(), entries);
  }
}

}  // namespace pmtl
