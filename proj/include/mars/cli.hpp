// Copyright 2026 The mars-context Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mars/backends.hpp"
#include "mars/config.hpp"
#include "mars/core.hpp"
#include "mars/decoding.hpp"
#include "mars/error.hpp"
#include "mars/external_backend.hpp"
#include "mars/metrics.hpp"
#include "mars/retrieval.hpp"
#include "mars/selection.hpp"
#include "mars/synthetic.hpp"
#include "mars/text_embedder.hpp"

namespace mars::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kInputFormat = 3,
  kConfiguration = 4,
  kBackend = 5,
  kPartialFailure = 6,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format:
    case ErrorKind::ingestion:
    case ErrorKind::manifest:
    case ErrorKind::lookup:
    case ErrorKind::kernel:
    case ErrorKind::embedding:
    case ErrorKind::scoring:
      return kInputFormat;
    case ErrorKind::config:
      return kConfiguration;
    case ErrorKind::backend:
      return kBackend;
    case ErrorKind::selection:
      return kInternal;
  }
  return kInternal;
}

// Flag values as given on the command line; unset flags fall back to the
// config file, then to RunConfig defaults.
struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<double> w_frame;
  std::optional<std::size_t> radius;
  std::optional<double> mask_p;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> n;
  std::optional<std::string> mer_mode;
  std::optional<std::string> backend;
  std::optional<std::string> embedder;
  std::optional<std::size_t> text_dim;
  std::optional<double> mock_base_rate;
  std::optional<double> mock_context_rate;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "Flat key = value config file (flags override)");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--k", k, "Top-K per modality (default 3)");
    app.add_option("--w-frame", w_frame, "Frame-level weight; utterance-level weight is 1 - w (default 0.5)");
    app.add_option("--radius", radius, "FastDTW radius (default 1)");
    app.add_option("--mask-p", mask_p, "Context mask probability (default 0.5)");
    app.add_option("--workers", workers, "Parallel decode workers (default 1)");
    app.add_option("--n", n, "Context count for preceding-n decoding (default 1)");
    app.add_option("--mer-mode", mer_mode, "macro | micro (default macro)");
    app.add_option("--backend", backend, "mock | echo | external:<http endpoint> (default mock)");
    app.add_option("--embedder", embedder, "reference | precomputed:<path> (default reference)");
    app.add_option("--text-dim", text_dim, "Reference embedder dimension (default 256)");
    app.add_option("--mock-base-rate", mock_base_rate, "Mock backend corruption rate (default 0.15)");
    app.add_option("--mock-context-rate", mock_context_rate, "Mock backend rate for context tokens (default 0.02)");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) {
      for (const auto& [key, value] : read_kv_file(config_path)) cfg.set(key, value);
    }
    if (seed) cfg.seed = *seed;
    if (k) cfg.k = *k;
    if (w_frame) cfg.w_frame = *w_frame;
    if (radius) cfg.radius = *radius;
    if (mask_p) cfg.mask_p = *mask_p;
    if (workers) cfg.workers = *workers;
    if (n) cfg.preceding_n = *n;
    if (mer_mode) cfg.set("mer_mode", *mer_mode);
    if (backend) cfg.backend = *backend;
    if (embedder) cfg.embedder = *embedder;
    if (text_dim) cfg.text_dim = *text_dim;
    if (mock_base_rate) cfg.mock_base_rate = *mock_base_rate;
    if (mock_context_rate) cfg.mock_context_rate = *mock_context_rate;
    cfg.validate();
    return cfg;
  }
};

inline std::unique_ptr<TextEmbedder> make_embedder(const RunConfig& cfg) {
  if (cfg.embedder == "reference") return std::make_unique<ReferenceNgramEmbedder>(cfg.text_dim);
  return load_precomputed_vectors(cfg.embedder.substr(std::string("precomputed:").size()));
}

inline std::unique_ptr<AsrBackend> make_backend(const RunConfig& cfg, const ContextDatabase& db) {
  if (cfg.backend == "mock") {
    return std::make_unique<MockAsrBackend>(db, MockBackendOptions{cfg.mock_base_rate, cfg.mock_context_rate, cfg.seed});
  }
  if (cfg.backend == "echo") return std::make_unique<EchoBackend>();
  return std::make_unique<HttpBackend>(db, cfg.backend.substr(std::string("external:").size()));
}

inline UtteranceId parse_utterance_id(const std::string& s) {
  const auto hash = s.rfind('#');
  if (hash == std::string::npos || hash + 1 == s.size()) {
    throw ConfigError("utterance must be given as conversation#index, got '" + s + "'");
  }
  UtteranceId id;
  id.conversation_id = s.substr(0, hash);
  id.index = detail::parse_number<std::uint64_t>("utterance index", s.substr(hash + 1));
  return id;
}

inline nlohmann::ordered_json header(const std::string& command, const RunConfig& cfg) {
  nlohmann::ordered_json h;
  h["header"]["command"] = command;
  h["header"]["config"] = cfg.to_json();
  return h;
}

inline nlohmann::json nullable(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

// Writes to `path`, or to `fallback` when path is empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      const std::filesystem::path p(path);
      if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
      file_.open(p, std::ios::trunc);
      if (!file_) throw IngestionError("cannot write " + path);
      out_ = &file_;
    }
  }
  std::ostream& operator*() { return *out_; }
  void line(const nlohmann::ordered_json& j) { *out_ << j.dump() << '\n'; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

inline nlohmann::ordered_json candidate_json(const RetrievalCandidate& c) {
  nlohmann::ordered_json j;
  j["candidate"] = c.id().str();
  j["source"] = to_string(c.source);
  j["retrieved_by_both"] = c.retrieved_by_both;
  j["sw"] = nullable(c.sw);
  j["tw"] = nullable(c.tw);
  return j;
}

inline nlohmann::ordered_json decode_record_json(const DecodeRecord& r) {
  nlohmann::ordered_json j;
  j["conversation_id"] = r.id.conversation_id;
  j["index"] = r.id.index;
  j["transcription"] = r.transcription;
  j["context_used"] = r.context_ids.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.context_ids.back().str());
  auto ids = nlohmann::json::array();
  for (const auto& c : r.context_ids) ids.push_back(c.str());
  j["context_ids"] = ids;
  j["closeness"] = nullable(r.closeness);
  j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
  return j;
}

// Ranking rows for one query: the data behind similarity scatter plots.
inline void emit_ranking(Sink& sink, const UtteranceId& query, std::span<const RetrievalCandidate> completed) {
  if (completed.empty()) {
    nlohmann::ordered_json j;
    j["query"] = query.str();
    j["candidate"] = nullptr;
    j["note"] = "empty history";
    sink.line(j);
    return;
  }
  const auto r = rank_candidates(completed);
  for (std::size_t i = 0; i < completed.size(); ++i) {
    nlohmann::ordered_json j;
    j["query"] = query.str();
    j["candidate"] = completed[i].id().str();
    j["sw"] = r.matrix.rows[i].sw;
    j["tw"] = r.matrix.rows[i].tw;
    j["sr"] = r.matrix.sr[i];
    j["tr"] = r.matrix.tr[i];
    j["d_plus"] = r.ranking.d_plus[i];
    j["d_minus"] = r.ranking.d_minus[i];
    j["c"] = r.ranking.closeness[i];
    j["selected"] = i == r.ranking.best_index;
    sink.line(j);
  }
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::string format_rate(double r) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << r * 100.0 << "%";
  return s.str();
}

// Entry point shared by the mars executable and the tests. `args` excludes
// the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-modal context retrieval and selection for conversational ASR", "mars"};
  app.require_subcommand(1);
  CommonFlags flags;

  std::string manifest_path, out_path, db_path, utterance, conversation, mode_name = "mars", decode_path, spec_path;
  bool all_utterances = false;
  std::size_t bench_limit = 0;

  auto* build = app.add_subcommand("build-db", "Ingest a manifest and embeddings into a database directory");
  build->add_option("--manifest", manifest_path, "Conversation manifest (JSONL)")->required();
  build->add_option("--out", out_path, "Output database directory")->required();
  flags.attach(*build);

  auto* retrieve = app.add_subcommand("retrieve", "List speech/text Top-K candidates for one utterance");
  retrieve->add_option("--db", db_path, "Database directory")->required();
  retrieve->add_option("--utterance", utterance, "conversation#index")->required();
  retrieve->add_option("--out", out_path, "Output file (default stdout)");
  flags.attach(*retrieve);

  auto* select = app.add_subcommand("select", "Emit the near-ideal ranking of retrieved candidates");
  select->add_option("--db", db_path, "Database directory")->required();
  auto* utt_opt = select->add_option("--utterance", utterance, "conversation#index");
  auto* all_opt = select->add_flag("--all", all_utterances, "Rank for every utterance in the database");
  utt_opt->excludes(all_opt);
  select->add_option("--out", out_path, "Output file (default stdout)");
  flags.attach(*select);

  auto* decode = app.add_subcommand("decode", "Decode utterances against the ASR backend");
  decode->add_option("--db", db_path, "Database directory")->required();
  decode->add_option("--mode", mode_name,
                     "direct | mars | two-pass | preceding-n | sum-top1 | speech-only | text-only (default mars)");
  decode->add_option("--conversation", conversation, "Restrict to one conversation");
  decode->add_option("--out", out_path, "Output file (default stdout)");
  flags.attach(*decode);

  auto* mask = app.add_subcommand("mask", "Build MARS training examples and mask contexts");
  mask->add_option("--db", db_path, "Database directory (references required)")->required();
  mask->add_option("--out", out_path, "Output file (default stdout)");
  flags.attach(*mask);

  auto* score = app.add_subcommand("score", "Score decode output against manifest references");
  score->add_option("--decode", decode_path, "Decode output (JSONL)")->required();
  auto* db_opt = score->add_option("--db", db_path, "Database directory holding manifest.jsonl");
  auto* man_opt = score->add_option("--manifest", manifest_path, "Manifest with references");
  db_opt->excludes(man_opt);
  score->add_option("--out", out_path, "Machine-readable report (JSON)");
  flags.attach(*score);

  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic conversational corpus");
  gen->add_option("--spec", spec_path, "Corpus spec file (key = value)");
  gen->add_option("--out", out_path, "Output corpus directory")->required();
  gen->add_option("--seed", flags.seed, "Corpus seed (overrides the spec file)");

  auto* bench = app.add_subcommand("bench", "Time retrieval + selection per utterance");
  bench->add_option("--db", db_path, "Database directory")->required();
  bench->add_option("--limit", bench_limit, "Time at most this many utterances (0 = all)");
  bench->add_option("--out", out_path, "Output file (default stdout)");
  flags.attach(*bench);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      CorpusSpec spec;
      if (!spec_path.empty()) {
        for (const auto& [key, value] : read_kv_file(spec_path)) apply_corpus_key(spec, key, value);
      }
      if (flags.seed) spec.seed = *flags.seed;
      const auto corpus = generate_corpus(spec);
      write_corpus(corpus, out_path);
      const auto stats = corpus_stats(corpus);
      out << "wrote " << corpus.utterances.size() << " utterances to " << out_path << " (mean gap "
          << stats.mean_gap << ", designated-token overlap " << stats.token_overlap << ")\n";
      return kOk;
    }

    const RunConfig cfg = flags.resolve();
    const auto embedder = make_embedder(cfg);
    const DecodeParams params = cfg.decode_params();

    if (build->parsed()) {
      const auto db = build_database(manifest_path, *embedder);
      save_database(db, out_path);
      out << "built database with " << db.size() << " records (d=" << db.metadata().speech_dim
          << ", e=" << db.metadata().text_dim << ", embedder " << db.metadata().embedder_id << ") in " << out_path
          << "\n";
      return kOk;
    }

    if (score->parsed()) {
      const auto rows = read_manifest(db_path.empty() ? std::filesystem::path(manifest_path)
                                                      : std::filesystem::path(db_path) / "manifest.jsonl");
      std::unordered_map<UtteranceId, const ManifestRow*, UtteranceIdHash> by_id;
      for (const auto& r : rows) by_id.emplace(r.id(), &r);
      std::vector<ScoredUtterance> utts;
      for (const auto& j : read_jsonl(decode_path)) {
        if (j.contains("header")) continue;
        UtteranceId id{j.at("conversation_id").get<std::string>(), j.at("index").get<std::uint64_t>()};
        auto it = by_id.find(id);
        if (it == by_id.end()) throw LookupError("decode output names unknown utterance " + id.str());
        if (!it->second->reference) throw FormatError("manifest has no reference for " + id.str());
        utts.push_back({it->second->language, *it->second->reference, j.at("transcription").get<std::string>()});
      }
      const auto report = mixed_error_rate(utts, cfg.mer_mode);
      out << "language        metric  rate      tokens  utterances\n";
      for (const auto& ls : report.languages) {
        std::ostringstream line;
        line << std::left;
        line.width(16);
        line << ls.language;
        line.width(8);
        line << to_string(ls.metric);
        line.width(10);
        line << format_rate(ls.error_rate);
        line.width(8);
        line << ls.edits.ref_length;
        line << ls.n_utterances;
        out << line.str() << "\n";
      }
      out << "MER (" << to_string(report.mode) << "): " << format_rate(report.mer) << "\n";
      nlohmann::ordered_json j = header("score", cfg);
      nlohmann::ordered_json rep;
      rep["mer"] = report.mer;
      rep["mode"] = to_string(report.mode);
      rep["languages"] = nlohmann::json::array();
      for (const auto& ls : report.languages) {
        nlohmann::ordered_json l;
        l["language"] = ls.language;
        l["metric"] = to_string(ls.metric);
        l["error_rate"] = ls.error_rate;
        l["n_ref_tokens"] = ls.edits.ref_length;
        l["substitutions"] = ls.edits.substitutions;
        l["deletions"] = ls.edits.deletions;
        l["insertions"] = ls.edits.insertions;
        l["n_utterances"] = ls.n_utterances;
        rep["languages"].push_back(l);
      }
      j["report"] = rep;
      if (!out_path.empty()) {
        Sink sink(out_path, out);
        *sink << j.dump(2) << '\n';
      } else {
        out << j.dump() << "\n";
      }
      return kOk;
    }

    const auto db = load_database(db_path, *embedder);

    if (retrieve->parsed()) {
      Sink sink(out_path, out);
      sink.line(header("retrieve", cfg));
      const auto& current = db.at(parse_utterance_id(utterance));
      const auto r = retrieve_multimodal(db, current, params.retrieval);
      for (const auto* list : {&r.speech, &r.text}) {
        for (const auto& c : *list) {
          auto j = candidate_json(c);
          j["stage"] = "topk";
          sink.line(j);
        }
      }
      for (const auto& c : r.completed) {
        auto j = candidate_json(c);
        j["stage"] = "completed";
        sink.line(j);
      }
      return kOk;
    }

    if (select->parsed()) {
      if (!all_utterances && utterance.empty()) throw ConfigError("select needs --utterance or --all");
      Sink sink(out_path, out);
      sink.line(header("select", cfg));
      if (all_utterances) {
        for (const auto& rec : db.records()) {
          emit_ranking(sink, rec.id, retrieve_multimodal(db, rec, params.retrieval).completed);
        }
      } else {
        const auto& current = db.at(parse_utterance_id(utterance));
        emit_ranking(sink, current.id, retrieve_multimodal(db, current, params.retrieval).completed);
      }
      return kOk;
    }

    if (decode->parsed()) {
      const DecodeMode mode = parse_decode_mode(mode_name);
      const auto backend = make_backend(cfg, db);
      std::vector<DecodeRecord> records;
      const auto scope = conversation.empty() ? db.records() : db.conversation(conversation);
      if (mode == DecodeMode::two_pass) {
        records = decode_two_pass(db, scope, *backend, *embedder, params);
      } else {
        records = decode_records(db, scope, mode, *backend, params);
      }
      Sink sink(out_path, out);
      auto h = header("decode", cfg);
      h["header"]["mode"] = to_string(mode);
      h["header"]["backend_id"] = backend->id();
      sink.line(h);
      std::size_t failures = 0;
      for (const auto& r : records) {
        sink.line(decode_record_json(r));
        if (r.error) ++failures;
      }
      if (failures > 0) {
        err << failures << " of " << records.size() << " utterances failed to decode\n";
        return kPartialFailure;
      }
      return kOk;
    }

    if (mask->parsed()) {
      auto examples = mask_contexts(build_training_examples(db, params), cfg.mask_p, cfg.seed);
      Sink sink(out_path, out);
      sink.line(header("mask", cfg));
      const auto recs = db.records();
      for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        nlohmann::ordered_json j;
        j["conversation_id"] = recs[i].id.conversation_id;
        j["index"] = recs[i].id.index;
        j["language_prompt"] = ex.bundle.language_prompt;
        j["context_hypothesis"] =
            ex.bundle.context_hypothesis ? nlohmann::json(*ex.bundle.context_hypothesis) : nlohmann::json(nullptr);
        j["current_hypothesis"] = ex.bundle.current_hypothesis;
        j["target"] = ex.target;
        j["masked"] = ex.masked;
        sink.line(j);
      }
      return kOk;
    }

    if (bench->parsed()) {
      using clock = std::chrono::steady_clock;
      std::vector<double> ms;
      const auto recs = db.records();
      const std::size_t n = bench_limit == 0 ? recs.size() : std::min(bench_limit, recs.size());
      const auto t0 = clock::now();
      for (std::size_t i = 0; i < n; ++i) {
        const auto s = clock::now();
        const auto r = retrieve_multimodal(db, recs[i], params.retrieval);
        if (!r.completed.empty()) (void)select_best(r.completed);
        ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - s).count());
      }
      const double total = std::chrono::duration<double>(clock::now() - t0).count();
      std::sort(ms.begin(), ms.end());
      nlohmann::ordered_json j = header("bench", cfg);
      j["utterances"] = n;
      j["median_ms"] = ms.empty() ? 0.0 : ms[ms.size() / 2];
      j["p95_ms"] = ms.empty() ? 0.0 : ms[std::min(ms.size() - 1, ms.size() * 95 / 100)];
      j["max_ms"] = ms.empty() ? 0.0 : ms.back();
      j["total_s"] = total;
      j["utterances_per_s"] = total > 0 ? static_cast<double>(n) / total : 0.0;
      Sink sink(out_path, out);
      sink.line(j);
      return kOk;
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}

}  // namespace mars::cli
