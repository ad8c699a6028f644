// tools/pmtl_cli.cpp

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

// Command-line driver: synth, train, extract, score, eval, gradcheck, info.

#include "pmtl/pmtl.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace pmtl;
namespace fs = std::filesystem;

/// Problems with flags or configuration; reported with exit status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string pooling;
  std::string backend;
  std::string out;
  std::string model;
  std::string manifest;
  std::string embeddings;
  std::string background;
  std::string background_manifest;
  std::string scores;
  std::string resume;
  bool tiny = false;
  bool layers = false;
  bool no_alignments = false;
  int points = 1;
};

/// Everything a run can be configured with. All groups are read from the
/// same file so unknown keys are caught regardless of the subcommand.
struct RunConfig {
  std::string preset = "S4";
  std::uint64_t seed = 1;
  NetworkConfig net;
  SynthConfig synth;
  TrainSchedule schedule;
  BackendKind backend = BackendKind::plda;
  int plda_iterations = 20;
};

RunConfig load_run_config(const Flags& f) {
  KeyValueConfig kv;
  if (!f.config.empty()) {
    try {
      kv = KeyValueConfig::load(f.config);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  RunConfig rc;
  try {
    kv.take_into("preset", rc.preset);
    kv.take_into("seed", rc.seed);
    if (!f.preset.empty()) rc.preset = f.preset;
    if (f.seed) rc.seed = *f.seed;

    rc.synth.read_kv(kv);
    rc.synth.seed = rc.seed;
    rc.schedule.read_kv(kv);
    rc.schedule.seed = rc.seed;
    if (auto v = kv.take("backend")) rc.backend = parse_backend(*v);
    if (!f.backend.empty()) rc.backend = parse_backend(f.backend);
    kv.take_into("plda.iterations", rc.plda_iterations);

    PoolingKind phone_pool = PoolingKind::phone_att_weighted;
    if (!f.pooling.empty()) phone_pool = parse_pooling(f.pooling);
    else if (kv.has("pooling")) phone_pool = parse_pooling(*kv.take("pooling"));
    rc.net.input_dim = rc.synth.feature_dim;
    rc.net.num_phonemes = rc.synth.num_phonemes;
    apply_preset(rc.net, rc.preset, phone_pool);
    rc.net.read_kv(kv);
    // An explicit pooling choice overrides the preset, including "stats".
    if (!f.pooling.empty()) rc.net.pooling.kind = parse_pooling(f.pooling);
    kv.reject_unknown();
  } catch (const ValidationError& e) {
    throw UsageError(std::string(f.config.empty() ? "flags" : f.config) + ": " + e.what());
  }
  return rc;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

int cmd_synth(const Flags& f) {
  require(f.out, "--out");
  RunConfig rc = load_run_config(f);
  SynthCorpus corpus = synth_corpus(rc.synth);
  if (f.no_alignments)
    for (auto& u : corpus.utterances) u.alignment.clear();
  write_corpus(f.out, corpus);
  if (f.no_alignments)
    for (const char* name : {"background", "dev", "eval"}) {
      const std::string path = (fs::path(f.out) / (std::string(name) + ".tsv")).string();
      auto entries = decode_manifest(detail::read_file(path), path);
      for (auto& e : entries) e.alignment_path = "-";
      write_manifest(path, entries);
      fs::remove(fs::path(f.out) / (std::string(name) + ".ali"));
    }
  std::cout << "wrote " << corpus.utterances.size() << " utterances to " << f.out << "\n";
  return 0;
}

void check_alignment_policy(const RunConfig& rc, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) {
    if (rc.net.needs_alignments() && !e.has_alignment())
      throw UsageError("preset " + rc.preset + " needs phoneme alignments but utterance '" + e.utt_id +
                       "' has none");
    if (!rc.net.needs_alignments() && e.has_alignment())
      throw UsageError("preset " + rc.preset + " is single-task and does not accept phoneme alignments ('" +
                       e.utt_id + "' carries one)");
  }
}

int cmd_train(const Flags& f) {
  require(f.manifest, "--manifest");
  require(f.out, "--out");
  RunConfig rc = load_run_config(f);
  auto entries = read_manifest(f.manifest);
  check_alignment_policy(rc, entries);
  Trainer trainer(load_utterances(entries), rc.schedule);
  TrainerState st;
  if (!f.resume.empty()) {
    st = trainer_state_from(read_checkpoint(f.resume));
  } else {
    st = trainer.initial_state(rc.net);
  }
  if (st.model.config.num_speakers != static_cast<Eigen::Index>(trainer.speakers().size()))
    throw ValidationError("checkpoint was trained on a different speaker set");
  fs::create_directories(f.out);
  const std::string trace_path = (fs::path(f.out) / "loss.csv").string();
  if (f.resume.empty() || !fs::exists(trace_path)) {
    write_trace(trace_path, {});
  } else {
    // Drop rows for epochs the resumed run will redo.
    std::istringstream in(detail::read_file(trace_path));
    std::string line, kept;
    std::getline(in, line);
    kept = line + "\n";
    while (std::getline(in, line))
      if (!line.empty() && std::stoi(line.substr(0, line.find(','))) <= st.epochs_done) kept += line + "\n";
    detail::write_file(trace_path, kept);
  }
  auto result = trainer.run(std::move(st), f.out);
  write_trace(trace_path, result.trace, true);
  for (const auto& r : result.trace)
    if (r.batch < 0)
      std::cout << "epoch " << r.epoch << "  L_s " << format_real(r.speaker) << "  L_pf "
                << format_real(r.frame_phonetic) << "  L_ps " << format_real(r.segment_phonetic) << "  L_total "
                << format_real(r.total) << "\n";
  std::cout << "checkpoint " << result.checkpoint_path << "\n";
  return 0;
}

int cmd_extract(const Flags& f) {
  require(f.model, "--model");
  require(f.manifest, "--manifest");
  require(f.out, "--out");
  auto model = load_model<float>(f.model);
  auto entries = read_manifest(f.manifest);
  if (entries.empty()) throw EmptyInputError(f.manifest + ": no utterances");
  Matrix<float> emb;
  std::vector<std::string> ids;
  for (const auto& e : entries) {
    RowVector<float> v = extract_embedding(read_archive(e.feature_path), model);
    if (emb.size() == 0) emb.resize(static_cast<Eigen::Index>(entries.size()), v.cols());
    emb.row(static_cast<Eigen::Index>(ids.size())) = v;
    ids.push_back(e.utt_id);
  }
  if (fs::path(f.out).has_parent_path()) fs::create_directories(fs::path(f.out).parent_path());
  write_embeddings(f.out, ids, emb);
  std::cout << "wrote " << ids.size() << " embeddings of dimension " << emb.cols() << " to " << f.out << "\n";
  return 0;
}

std::map<std::string, Eigen::VectorXd> embedding_map(const EmbeddingArchive& a) {
  std::map<std::string, Eigen::VectorXd> m;
  for (std::size_t i = 0; i < a.ids.size(); ++i)
    m[a.ids[i]] = a.vectors.row(static_cast<Eigen::Index>(i)).cast<double>().transpose();
  return m;
}

int cmd_score(const Flags& f) {
  require(f.embeddings, "--embeddings");
  require(f.manifest, "--manifest");
  require(f.background, "--background");
  require(f.background_manifest, "--background-manifest");
  require(f.out, "--out");
  RunConfig rc = load_run_config(f);

  auto bg = read_embeddings(f.background);
  std::map<std::string, std::string> speaker_of;
  for (const auto& e : read_manifest(f.background_manifest)) speaker_of[e.utt_id] = e.speaker_id;
  std::map<std::string, int> speaker_index;
  std::vector<int> labels;
  for (const auto& id : bg.ids) {
    auto it = speaker_of.find(id);
    if (it == speaker_of.end()) throw ValidationError(f.background_manifest + ": no entry for '" + id + "'");
    labels.push_back(speaker_index.emplace(it->second, static_cast<int>(speaker_index.size())).first->second);
  }
  Backend backend = fit_backend(bg.vectors.cast<double>(), labels, rc.backend, rc.plda_iterations);

  TrialSet trials = generate_trials(read_manifest(f.manifest));
  auto scored = score_trials(backend, trials, embedding_map(read_embeddings(f.embeddings)));
  if (fs::path(f.out).has_parent_path()) fs::create_directories(fs::path(f.out).parent_path());
  detail::write_file(f.out, encode_scores(scored));
  std::cout << "scored " << scored.size() << " trials against " << trials.models.size() << " models\n";
  return 0;
}

int cmd_eval(const Flags& f) {
  require(f.scores, "--scores");
  auto scored = decode_scores(detail::read_file(f.scores));
  std::vector<TrialType> missing;
  auto rows = report(ScoreSet::from(scored), &missing);
  for (TrialType t : missing) std::cerr << "notice: no " << to_string(t) << " trials; column omitted\n";
  std::cout << report_text(rows);
  if (!f.out.empty()) detail::write_file(f.out, report_csv(rows));
  return 0;
}

int cmd_gradcheck(const Flags& f) {
  const double tolerance = 1e-4;
  std::vector<GradCheckCase> cases;
  if (f.layers) {
    cases = gradcheck_registry();
  } else {
    NetworkConfig cfg;
    if (f.tiny) {
      PoolingKind pool = f.pooling.empty() ? PoolingKind::phone_att_weighted : parse_pooling(f.pooling);
      cfg = tiny_network_config(f.preset.empty() ? "S6" : f.preset, pool);
      if (!f.pooling.empty()) cfg.pooling.kind = pool;
    } else {
      if (f.config.empty()) throw UsageError("gradcheck needs --tiny, --layers or --config");
      Flags g = f;
      if (g.preset.empty()) g.preset = "S6";
      cfg = load_run_config(g).net;
      if (cfg.num_speakers < 2) cfg.num_speakers = 2;
    }
    cfg.validate();
    std::mt19937_64 rng(f.seed.value_or(99));
    const int frames = 6;
    Matrix<GradReal> x = random_matrix<GradReal>(frames, cfg.input_dim, rng);
    GradCheckCase c{network_loss_op(cfg, x, gradcheck_labels(cfg, frames, 7)),
                    [cfg](std::uint64_t s) { return network_params_sample(cfg, s); }};
    c.op.name = "network";
    cases.push_back(std::move(c));
  }
  double worst = 0.0;
  bool ok = true;
  for (const auto& c : cases) {
    double case_worst = 0.0;
    for (int p = 0; p < f.points; ++p) {
      auto r = grad_check(c.op, c.sample(f.seed.value_or(1) + static_cast<std::uint64_t>(p)), 1e-6);
      case_worst = std::max(case_worst, r.max_relative_error);
      if (!r.finite) std::cerr << c.op.name << ": " << r.message << "\n";
      ok = ok && r.passed(tolerance);
    }
    worst = std::max(worst, case_worst);
    if (cases.size() > 1) std::cout << c.op.name << " " << format_real(case_worst) << "\n";
  }
  std::cout << "max_relative_error = " << format_real(worst) << "\n";
  return ok ? 0 : 1;
}

int cmd_info(const Flags& f) {
  require(f.model, "--model");
  Checkpoint ck = read_checkpoint(f.model);
  std::cout << ck.meta.to_text();
  std::size_t values = 0, model_tensors = 0;
  for (const auto& [name, m] : ck.tensors) {
    if (name.rfind("adam.", 0) == 0) continue;
    ++model_tensors;
    values += static_cast<std::size_t>(m.size());
  }
  std::cout << "tensors = " << model_tensors << "\n";
  std::cout << "parameters = " << values << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phoneme-aware multi-task speaker verification toolkit"};
  app.require_subcommand(1);
  Flags f;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "key = value configuration file");
    sub->add_option("--seed", seed_value, "random seed")->each([&](const std::string&) { f.seed = seed_value; });
  };
  auto add_net = [&](CLI::App* sub) {
    sub->add_option("--preset", f.preset, "system preset")->check(CLI::IsMember({"S1", "S2", "S3", "S4", "S5", "S6"}));
    sub->add_option("--pooling", f.pooling, "pooling mode")->check(CLI::IsMember({"stats", "literal", "weighted"}));
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth);
  synth->add_option("--out", f.out, "output directory");
  synth->add_flag("--no-alignments", f.no_alignments, "write manifests without phoneme alignments");

  auto* train = app.add_subcommand("train", "train a network");
  add_common(train);
  add_net(train);
  train->add_option("--manifest", f.manifest, "training manifest");
  train->add_option("--out", f.out, "checkpoint directory");
  train->add_option("--resume", f.resume, "continue from a trainer checkpoint");

  auto* extract = app.add_subcommand("extract", "extract speaker embeddings");
  extract->add_option("--model", f.model, "model checkpoint");
  extract->add_option("--manifest", f.manifest, "utterances to embed");
  extract->add_option("--out", f.out, "embedding archive");

  auto* score = app.add_subcommand("score", "score verification trials");
  add_common(score);
  score->add_option("--backend", f.backend, "scoring backend")->check(CLI::IsMember({"cosine", "plda"}));
  score->add_option("--embeddings", f.embeddings, "embeddings of the evaluated partition");
  score->add_option("--manifest", f.manifest, "manifest of the evaluated partition");
  score->add_option("--background", f.background, "background embeddings for backend training");
  score->add_option("--background-manifest", f.background_manifest, "manifest of the background set");
  score->add_option("--out", f.out, "score file");

  auto* eval = app.add_subcommand("eval", "report EER per trial condition");
  eval->add_option("--scores", f.scores, "score file");
  eval->add_option("--out", f.out, "CSV report");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(grad);
  add_net(grad);
  grad->add_flag("--tiny", f.tiny, "use the tiny network (input 5, hidden 8, P 4, N 3)");
  grad->add_flag("--layers", f.layers, "check every registered operation instead of the network");
  grad->add_option("--points", f.points, "random evaluation points per operation")->check(CLI::PositiveNumber);

  auto* info = app.add_subcommand("info", "print checkpoint metadata");
  info->add_option("--model", f.model, "model checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(f);
    if (train->parsed()) return cmd_train(f);
    if (extract->parsed()) return cmd_extract(f);
    if (score->parsed()) return cmd_score(f);
    if (eval->parsed()) return cmd_eval(f);
    if (grad->parsed()) return cmd_gradcheck(f);
    if (info->parsed()) return cmd_info(f);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
