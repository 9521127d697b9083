// Copyright 2026 The Reflectiva Authors
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

// reflectiva: command-line driver.

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reflectiva/data_forge.hpp"
#include "reflectiva/dense_index.hpp"
#include "reflectiva/embedder.hpp"
#include "reflectiva/error.hpp"
#include "reflectiva/eval_harness.hpp"
#include "reflectiva/kb_store.hpp"
#include "reflectiva/mock_backend.hpp"
#include "reflectiva/reflective_engine.hpp"
#include "reflectiva/remote_backend.hpp"
#include "reflectiva/reranker.hpp"
#include "reflectiva/sample.hpp"
#include "reflectiva/synthetic.hpp"
#include "reflectiva/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reflectiva;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

/// Raw flag values; unset ones fall back to the config file, then to defaults.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string backend;
  std::string out;
  std::string kb;
  std::string index;
  std::string dataset;
  std::string scripts;
  std::string endpoint;
  std::optional<std::size_t> top_k;
  std::string rerank;
  std::optional<std::size_t> k_p;
  std::optional<std::size_t> max_relevant;
  std::string force;
  std::string reranker_endpoint;
  std::optional<double> rel_tol;
  bool timings = false;
};

struct RunConfig {
  fs::path kb;
  fs::path index;
  fs::path dataset;
  std::string backend = "mock";
  fs::path scripts;
  HttpConfig http;
  std::optional<HttpConfig> reranker;
  std::optional<HttpConfig> judge;
  PipelineConfig pipeline;
  std::uint64_t seed = 0;
  int jobs = 0;
  fs::path out = ".";
  double rel_tol = kDefaultRelativeTolerance;
  bool timings = false;
};

HttpConfig http_from_json(const json& j, HttpConfig h = {}) {
  h.endpoint = j.value("endpoint", h.endpoint);
  h.timeout_ms = j.value("timeout_ms", h.timeout_ms);
  h.retries = j.value("retries", h.retries);
  h.backoff_ms = j.value("backoff_ms", h.backoff_ms);
  h.max_inflight = j.value("max_inflight", h.max_inflight);
  return h;
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  c.jobs = omp_get_num_procs();
  json file = json::object();
  if (!f.config.empty()) {
    try {
      file = json::parse(read_file(f.config));
    } catch (const json::exception& e) {
      throw ConfigError("config file " + f.config + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError("config file " + f.config + ": " + e.what());
    }
  }
  try {
    c.kb = file.value("kb", std::string{});
    c.index = file.value("index", std::string{});
    c.dataset = file.value("dataset", std::string{});
    c.out = file.value("out", std::string("."));
    c.seed = file.value("seed", std::uint64_t{0});
    c.jobs = file.value("jobs", c.jobs);
    c.rel_tol = file.value("rel_tol", c.rel_tol);
    if (file.contains("backend")) {
      const auto& b = file.at("backend");
      c.backend = b.value("kind", c.backend);
      c.scripts = b.value("scripts", std::string{});
      c.http = http_from_json(b, c.http);
    }
    if (file.contains("reranker")) c.reranker = http_from_json(file.at("reranker"));
    if (file.contains("judge")) c.judge = http_from_json(file.at("judge"));
    if (file.contains("pipeline")) c.pipeline = pipeline_config_from_json(file.at("pipeline"), c.pipeline);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + f.config + ": " + e.what());
  }

  if (const char* env = std::getenv("REFLECTIVA_ENDPOINT"); env != nullptr && *env) c.http.endpoint = env;

  if (!f.kb.empty()) c.kb = f.kb;
  if (!f.index.empty()) c.index = f.index;
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.out.empty()) c.out = f.out;
  if (!f.backend.empty()) c.backend = f.backend;
  if (!f.scripts.empty()) c.scripts = f.scripts;
  if (!f.endpoint.empty()) c.http.endpoint = f.endpoint;
  if (!f.reranker_endpoint.empty()) {
    HttpConfig h = c.reranker.value_or(HttpConfig{});
    h.endpoint = f.reranker_endpoint;
    c.reranker = h;
  }
  if (f.seed) c.seed = *f.seed;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.rel_tol) c.rel_tol = *f.rel_tol;
  if (f.top_k) c.pipeline.top_k_docs = *f.top_k;
  if (!f.rerank.empty()) c.pipeline.rerank = parse_rerank_mode(f.rerank);
  if (f.k_p) c.pipeline.k_p = *f.k_p;
  if (f.max_relevant) c.pipeline.max_relevant = *f.max_relevant;
  if (!f.force.empty()) c.pipeline.force_decision = parse_force_decision(f.force);
  c.timings = f.timings;
  c.pipeline.seed = c.seed;
  if (c.backend != "mock" && c.backend != "remote") throw ConfigError("--backend must be mock or remote");
  if (c.jobs < 1) throw ConfigError("--jobs must be at least 1");
  c.pipeline.validate();
  return c;
}

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(std::string(what) + " path not set");
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

fs::path out_dir(const RunConfig& c) {
  fs::create_directories(c.out);
  return c.out;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::unique_ptr<GenerativeBackend> make_backend(const RunConfig& c) {
  std::unique_ptr<GenerativeBackend> b;
  if (c.backend == "mock") {
    require_file(c.scripts, "mock script file (--scripts)");
    auto m = std::make_unique<MockBackend>();
    m->load_scripts(c.scripts);
    b = std::move(m);
  } else {
    b = std::make_unique<RemoteBackend>(c.http);
  }
  check_control_token_conformance(*b);
  return b;
}

/// Shared state for commands that run the pipeline.
struct Session {
  RunConfig cfg;
  std::optional<KnowledgeBase> kb;
  std::optional<DenseIndex> index;
  std::vector<QuerySample> samples;
  std::unique_ptr<GenerativeBackend> backend;
  std::unique_ptr<PassageReranker> reranker;
  LexicalOverlapScorer scorer;
  std::unique_ptr<AnswerJudge> judge;
  std::unique_ptr<Engine> engine;

  explicit Session(RunConfig c, bool need_dataset = true) : cfg(std::move(c)) {
    if (need_dataset) {
      require_file(cfg.dataset, "dataset");
      samples = load_samples(cfg.dataset);
    }
    if (!cfg.kb.empty()) {
      require_file(cfg.kb, "knowledge base");
      kb.emplace(load_kb(cfg.kb));
    }
    if (!cfg.index.empty()) {
      require_file(cfg.index, "index");
      index.emplace(DenseIndex::load(cfg.index));
    }
    backend = make_backend(cfg);
    engine = std::make_unique<Engine>(*backend, kb ? &*kb : nullptr, index ? &*index : nullptr);
    engine->set_text_scorer(&scorer);
    if (cfg.reranker) {
      reranker = std::make_unique<RemoteReranker>(*cfg.reranker);
      engine->set_reranker(reranker.get());
    }
    if (cfg.judge) judge = std::make_unique<RemoteAnswerJudge>(*cfg.judge);
  }

  EvalOptions eval_options() const { return {cfg.rel_tol, judge.get()}; }
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "64-bit seed for every random choice (default 0)");
  cmd->add_option("--jobs", f.jobs, "worker threads (default: logical CPUs)");
  cmd->add_option("--backend", f.backend, "generative backend: mock or remote");
  cmd->add_option("--out", f.out, "output directory");
}

void add_pipeline(CLI::App* cmd, Flags& f) {
  cmd->add_option("--kb", f.kb, "knowledge base JSONL");
  cmd->add_option("--index", f.index, "index file written by 'index'");
  cmd->add_option("--dataset", f.dataset, "query samples JSONL");
  cmd->add_option("--scripts", f.scripts, "mock backend script file");
  cmd->add_option("--endpoint", f.endpoint, "remote backend URL (env REFLECTIVA_ENDPOINT)");
  cmd->add_option("--reranker-endpoint", f.reranker_endpoint, "external reranker URL");
  cmd->add_option("--top-k", f.top_k, "documents retrieved per query (default 5)");
  cmd->add_option("--rerank", f.rerank, "none, builtin or external");
  cmd->add_option("--k-p", f.k_p, "passages kept by re-ranking");
  cmd->add_option("--max-relevant", f.max_relevant, "cap on relevant passages");
  cmd->add_option("--force-decision", f.force, "none, always_ret or always_noret");
  cmd->add_option("--rel-tol", f.rel_tol, "relative tolerance of relaxed accuracy (default 0.05)");
  cmd->add_flag("--timings", f.timings, "keep per-phase timings in trace files");
}

std::string traces_jsonl(const std::vector<PipelineTrace>& traces, bool timings) {
  std::string out;
  for (const auto& t : traces) out += to_json(t, timings).dump() + "\n";
  return out;
}

int finish_batch(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& failures) {
  if (failures.empty()) return kExitOk;
  json j = json::array();
  for (const auto& [id, err] : failures) j.push_back({{"sample_id", id}, {"error", err}});
  write_json(dir / "failures.json", j);
  std::cerr << failures.size() << " sample(s) failed; see " << (dir / "failures.json").string() << "\n";
  return kExitPartial;
}

int cmd_ingest(const Flags& f) {
  RunConfig c = resolve(f);
  require_file(c.kb, "knowledge base");
  const KnowledgeBase kb = load_kb(c.kb);
  const bool sidecar = kb.manifest().storage == EmbeddingStorage::Sidecar;
  std::cout << "documents: " << kb.size() << "\n"
            << "embedding_dim: " << kb.embedding_dim() << "\n"
            << "embeddings: " << (sidecar ? "sidecar" : "inline") << "\n"
            << "missing_embedding: " << kb.load_stats().missing_embedding << "\n"
            << "empty_summary: " << kb.load_stats().empty_summary << "\n"
            << "checksum: " << kb.manifest().checksum << "\n";
  if (!f.out.empty()) {
    write_json(out_dir(c) / "ingest.json", {{"documents", kb.size()},
                                            {"embedding_dim", kb.embedding_dim()},
                                            {"embeddings", sidecar ? "sidecar" : "inline"},
                                            {"missing_embedding", kb.load_stats().missing_embedding},
                                            {"empty_summary", kb.load_stats().empty_summary},
                                            {"checksum", kb.manifest().checksum}});
  }
  return kExitOk;
}

int cmd_index(const Flags& f, const std::string& mode_text, const std::string& embedder_kind) {
  RunConfig c = resolve(f);
  require_file(c.kb, "knowledge base");
  const KnowledgeBase kb = load_kb(c.kb);
  const RetrievalMode mode = parse_retrieval_mode(mode_text);
  std::unique_ptr<TextEmbedder> embedder;
  if (mode != RetrievalMode::Visual) {
    if (embedder_kind == "hashing") {
      embedder = std::make_unique<HashingTextEmbedder>(kb.embedding_dim(), c.seed);
    } else if (embedder_kind == "remote") {
      embedder = std::make_unique<RemoteTextEmbedder>(c.http, kb.embedding_dim());
    } else {
      throw ConfigError("--embedder must be hashing or remote");
    }
  }
  const DenseIndex index = build_index(kb, mode, embedder.get());
  const fs::path path = out_dir(c) / "index.jsonl";
  index.save(path);
  std::cout << "indexed: " << index.size() << " (" << to_string(mode) << ") -> " << path.string() << "\n";
  return kExitOk;
}

int cmd_answer(const Flags& f, const std::string& sample_id, bool oracle) {
  Session s(resolve(f));
  const auto it = std::find_if(s.samples.begin(), s.samples.end(), [&](const QuerySample& q) { return q.id == sample_id; });
  if (it == s.samples.end()) throw ConfigError("sample " + sample_id + " not in dataset");
  PipelineTrace t;
  if (oracle) {
    if (!it->gold_doc_id) throw ConfigError("sample " + sample_id + " has no gold document for oracle mode");
    t = s.engine->run_oracle(*it, *it->gold_doc_id, s.cfg.pipeline);
  } else {
    t = s.engine->run(*it, s.cfg.pipeline);
  }
  std::cout << t.answer << "\n";
  write_json(out_dir(s.cfg) / ("trace-" + sample_id + ".json"), to_json(t, s.cfg.timings));
  return kExitOk;
}

int cmd_eval(const Flags& f, bool oracle, bool ablation) {
  Session s(resolve(f));
  const fs::path dir = out_dir(s.cfg);
  std::vector<std::pair<std::string, std::string>> failures;
  const auto items = s.engine->run_batch(s.samples, s.cfg.pipeline, s.cfg.jobs, oracle);
  const auto traces = successful_traces(items, s.samples, &failures);
  write_file_atomic(dir / "traces.jsonl", traces_jsonl(traces, s.cfg.timings));
  const EvalReport report = evaluate(traces, s.samples, s.eval_options());
  json out = {{"seed", s.cfg.seed}, {"pipeline", to_json(s.cfg.pipeline)}, {"report", to_json(report)}};
  if (ablation) {
    const auto result =
        run_ablation(*s.engine, s.samples, s.cfg.pipeline, all_ablation_variants(), s.eval_options(), s.cfg.jobs);
    out["ablation"] = to_json(result);
    write_file_atomic(dir / "ablation.csv", ablation_csv(result, s.cfg.pipeline));
  }
  write_json(dir / "report.json", out);
  std::cout << "samples: " << report.num_samples << " failed: " << report.num_failed
            << " accuracy: " << report.accuracy << "\n";
  return finish_batch(dir, failures);
}

int cmd_mine(const Flags& f, int stage, const std::string& annotator_kind, const std::string& annotator_endpoint) {
  RunConfig c = resolve(f);
  if (stage == 1) {
    require_file(c.kb, "knowledge base");
    require_file(c.dataset, "dataset");
    const KnowledgeBase kb = load_kb(c.kb);
    const auto samples = load_samples(c.dataset);
    std::unique_ptr<PassageAnnotator> annotator;
    if (annotator_kind == "heuristic") {
      annotator = std::make_unique<HeuristicAnnotator>();
    } else if (annotator_kind == "remote") {
      HttpConfig h = c.http;
      if (!annotator_endpoint.empty()) h.endpoint = annotator_endpoint;
      annotator = std::make_unique<RemoteAnnotator>(h);
    } else {
      throw ConfigError("--annotator must be heuristic or remote");
    }
    LexicalOverlapScorer scorer;
    const auto r = build_stage1(kb, samples, *annotator, scorer);
    const fs::path dir = out_dir(c);
    save_sequences(r.sequences, dir / "stage1.jsonl");
    json skipped = json::array();
    for (const auto& sk : r.skipped) skipped.push_back({{"sample_id", sk.sample_id}, {"reason", sk.reason}});
    std::map<std::string, std::size_t> kinds;
    for (const auto& seq : r.sequences) ++kinds[std::string(to_string(seq.kind))];
    write_json(dir / "stage1_report.json", {{"seed", c.seed},
                                            {"groups", r.groups.size()},
                                            {"sequences", r.sequences.size()},
                                            {"kinds", kinds},
                                            {"forced_positive", r.forced_positive},
                                            {"forced_negative", r.forced_negative},
                                            {"skipped", skipped}});
    std::cout << "stage1 sequences: " << r.sequences.size() << " groups: " << r.groups.size()
              << " skipped: " << r.skipped.size() << "\n";
    return kExitOk;
  }
  if (stage != 2) throw ConfigError("--stage must be 1 or 2");
  Session s(c);
  if (!s.kb || !s.index) throw ConfigError("stage 2 needs --kb and --index");
  std::vector<QuerySample> kb_samples;
  std::vector<QuerySample> noret;
  for (const auto& q : s.samples) (q.gold_doc_id ? kb_samples : noret).push_back(q);
  const auto r = build_stage2(*s.backend, *s.index, *s.kb, kb_samples, noret, s.cfg.seed, s.cfg.jobs);
  const fs::path dir = out_dir(s.cfg);
  save_sequences(r.dataset.sequences, dir / "stage2.jsonl");
  json skipped = json::array();
  for (const auto& sk : r.skipped) skipped.push_back({{"sample_id", sk.sample_id}, {"reason", sk.reason}});
  json mixture = to_json(r.dataset.report);
  mixture["triplets"] = r.triplets.size();
  mixture["skipped"] = skipped;
  write_json(dir / "mixture.json", mixture);
  std::cout << "stage2 sequences: " << r.dataset.sequences.size() << " triplets: " << r.triplets.size()
            << " skipped: " << r.skipped.size() << "\n";
  return kExitOk;
}

std::vector<std::size_t> parse_list(const std::string& text, std::string_view what) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoul(std::string(trim(item)), &pos);
      if (v == 0 || pos != trim(item).size()) throw std::invalid_argument("bad");
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": '" + item + "' is not a positive integer");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + " is empty");
  return out;
}

int cmd_rerank_sweep(const Flags& f, const std::string& ks_text, const std::string& kps_text,
                     const std::string& mode_text) {
  Session s(resolve(f));
  const auto ks = parse_list(ks_text, "--ks");
  const auto kps = parse_list(kps_text, "--kps");
  const auto result = rerank_sweep(*s.engine, s.samples, s.cfg.pipeline, ks, kps, parse_rerank_mode(mode_text),
                                   s.eval_options(), s.cfg.jobs);
  const fs::path dir = out_dir(s.cfg);
  json out = to_json(result);
  out["seed"] = s.cfg.seed;
  write_json(dir / "sweep.json", out);
  const std::string csv = sweep_csv(result);
  write_file_atomic(dir / "sweep.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_token_acc(const Flags& f, const std::string& suite_path) {
  Session s(resolve(f));
  std::vector<TokenExpectation> suite;
  if (!suite_path.empty()) {
    std::istringstream in(read_file(suite_path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (trim(line).empty()) continue;
      try {
        suite.push_back(token_expectation_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw ParseError(e.what(), n);
      }
    }
  } else {
    if (!s.kb || !s.index) throw ConfigError("token-acc without --suite needs --kb and --index");
    suite = build_token_suite(*s.kb, *s.index, s.samples, s.cfg.seed);
  }
  if (!s.kb) throw ConfigError("token-acc needs --kb to resolve probe passages");
  std::map<std::string, const QuerySample*> by_id;
  for (const auto& q : s.samples) by_id[q.id] = &q;
  std::vector<PipelineTrace> traces;
  std::vector<std::pair<std::string, std::string>> failures;
  std::vector<TokenExpectation> kept;
  for (const auto& e : suite) {
    const auto it = by_id.find(e.sample_id);
    if (it == by_id.end()) throw ValidationError("suite sample " + e.sample_id + " not in dataset");
    try {
      std::vector<Passage> probes;
      for (const auto& p : e.passages) probes.push_back(s.kb->passage(p.passage.doc_id, p.passage.section_index));
      traces.push_back(s.engine->probe(*it->second, probes));
      kept.push_back(e);
    } catch (const Error& ex) {
      failures.emplace_back(e.sample_id, ex.what());
    }
  }
  const auto report = token_accuracy(traces, kept);
  const fs::path dir = out_dir(s.cfg);
  std::string suite_out;
  for (const auto& e : suite) suite_out += to_json(e).dump() + "\n";
  write_file_atomic(dir / "token_suite.jsonl", suite_out);
  write_json(dir / "token_accuracy.json", {{"seed", s.cfg.seed}, {"report", to_json(report)}});
  std::cout << to_json(report)["overall"].dump(2) << "\n";
  return finish_batch(dir, failures);
}

int cmd_synth(const Flags& f, SyntheticConfig sc) {
  RunConfig c = resolve(f);
  sc.seed = c.seed;
  const SyntheticWorld w = make_synthetic_world(sc);
  const fs::path dir = out_dir(c);
  write_synthetic_world(w, dir);
  const KnowledgeBase kb = w.knowledge_base();
  build_index(kb, RetrievalMode::Visual, nullptr).save(dir / "index.jsonl");
  std::cout << "documents: " << w.documents.size() << " samples: " << w.samples.size() << " -> " << dir.string()
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reflectiva: retrieval-augmented visual question answering with reflective tokens"};
  app.require_subcommand(1);
  Flags flags;

  auto* ingest = app.add_subcommand("ingest", "validate a knowledge base and print its statistics");
  add_common(ingest, flags);
  ingest->add_option("--kb", flags.kb, "knowledge base JSONL")->required();

  std::string mode = "visual";
  std::string embedder = "hashing";
  auto* index = app.add_subcommand("index", "build a dense index over a knowledge base");
  add_common(index, flags);
  index->add_option("--kb", flags.kb, "knowledge base JSONL")->required();
  index->add_option("--mode", mode, "visual, textual_title or textual_title_summary");
  index->add_option("--embedder", embedder, "text embedder for textual modes: hashing or remote");
  index->add_option("--endpoint", flags.endpoint, "remote embedder URL");

  std::string sample_id;
  bool oracle = false;
  auto* answer = app.add_subcommand("answer", "answer one sample and write its trace");
  add_common(answer, flags);
  add_pipeline(answer, flags);
  answer->add_option("--sample", sample_id, "sample id in the dataset")->required();
  answer->add_flag("--oracle", oracle, "use the gold document's passages instead of search");

  bool ablation = false;
  auto* eval = app.add_subcommand("eval", "run and score a dataset");
  add_common(eval, flags);
  add_pipeline(eval, flags);
  eval->add_flag("--oracle", oracle, "use the gold document's passages instead of search");
  eval->add_flag("--ablation", ablation, "also run every ablation variant");

  int stage = 1;
  std::string annotator = "heuristic";
  std::string annotator_endpoint;
  auto* mine = app.add_subcommand("mine", "build stage-1 or stage-2 training sequences");
  add_common(mine, flags);
  add_pipeline(mine, flags);
  mine->add_option("--stage", stage, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
  mine->add_option("--annotator", annotator, "stage 1 annotator: heuristic or remote");
  mine->add_option("--annotator-endpoint", annotator_endpoint, "remote annotator URL");

  std::string ks = "20,50";
  std::string kps = "1,3,5,10,20";
  std::string sweep_mode = "builtin";
  auto* sweep = app.add_subcommand("rerank-sweep", "accuracy over a grid of k and k_p");
  add_common(sweep, flags);
  add_pipeline(sweep, flags);
  sweep->add_option("--ks", ks, "comma-separated document counts");
  sweep->add_option("--kps", kps, "comma-separated passage counts");
  sweep->add_option("--mode", sweep_mode, "builtin or external");

  std::string suite;
  auto* token_acc = app.add_subcommand("token-acc", "accuracy of the reflective tokens");
  add_common(token_acc, flags);
  add_pipeline(token_acc, flags);
  token_acc->add_option("--suite", suite, "expectations JSONL (built from the dataset when absent)");

  SyntheticConfig sc;
  auto* synth = app.add_subcommand("synth", "write a synthetic knowledge base, dataset and mock scripts");
  add_common(synth, flags);
  synth->add_option("--docs", sc.num_docs, "documents");
  synth->add_option("--samples", sc.num_samples, "query samples");
  synth->add_option("--dim", sc.dim, "embedding dimension");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*ingest) return cmd_ingest(flags);
    if (*index) return cmd_index(flags, mode, embedder);
    if (*answer) return cmd_answer(flags, sample_id, oracle);
    if (*eval) return cmd_eval(flags, oracle, ablation);
    if (*mine) return cmd_mine(flags, stage, annotator, annotator_endpoint);
    if (*sweep) return cmd_rerank_sweep(flags, ks, kps, sweep_mode);
    if (*token_acc) return cmd_token_acc(flags, suite);
    if (*synth) return cmd_synth(flags, sc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
