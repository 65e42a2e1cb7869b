// Copyright 2026 The SAGE Authors.
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

#include "sage/pipeline.h"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <regex>
#include <set>
#include <sstream>

#include "sage/align_string.h"
#include "sage/coref_align.h"
#include "sage/corpus.h"
#include "sage/embedded_resources.h"
#include "sage/error.h"
#include "sage/hash.h"
#include "sage/llm_mock.h"
#include "sage/metrics.h"
#include "sage/salience.h"
#include "sage/sumqual.h"
#include "sage/text.h"

namespace sage {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---- configuration -------------------------------------------------------------

std::optional<std::string> ProcessEnv(std::string_view name) {
  const char *v = std::getenv(std::string(name).c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

json InterpolateEnv(const json &j, const EnvLookup &env) {
  if (j.is_string()) {
    static const std::regex var_re(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
    const std::string s = j.get<std::string>();
    std::string out;
    auto begin = std::sregex_iterator(s.begin(), s.end(), var_re);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      const std::smatch &m = *it;
      out.append(s, last, static_cast<std::size_t>(m.position(0)) - last);
      const auto value = env(m[1].str());
      if (!value) throw ConfigError("config references unset environment variable " + m[1].str());
      out += *value;
      last = static_cast<std::size_t>(m.position(0) + m.length(0));
    }
    out.append(s, last);
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = InterpolateEnv(it.value(), env);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const json &v : j) out.push_back(InterpolateEnv(v, env));
    return out;
  }
  return j;
}

fs::path RunConfig::ModelPath() const {
  return model_path.empty() ? RunDir() / "model" / "ensemble.json" : model_path;
}

fs::path RunConfig::CachePath() const {
  if (llm.cache == "none") return {};
  return llm.cache.empty() ? RunDir() / "cache" / "llm.jsonl" : fs::path(llm.cache);
}

MatchConfig RunConfig::Matching() const {
  MatchConfig m;
  m.partial_min_hits = partial_min_hits;
  m.partial_len_threshold = partial_len_threshold;
  if (!stopwords.empty()) m.stopwords = LoadWordList(stopwords);
  if (!pronouns.empty()) m.pronouns = LoadWordList(pronouns);
  return m;
}

ordered_json RunConfig::ToJson() const {
  ordered_json j;
  j["corpus"] = corpus.string();
  j["out_dir"] = out_dir.string();
  j["run_id"] = run_id;
  ordered_json methods_json = ordered_json::array();
  for (Method m : methods) methods_json.push_back(std::string(MethodName(m)));
  j["methods"] = methods_json;
  j["partial_min_hits"] = partial_min_hits;
  j["partial_len_threshold"] = partial_len_threshold;
  j["stopwords"] = stopwords.string();
  j["pronouns"] = pronouns.string();
  j["llm"] = {{"endpoint", llm.endpoint},
              {"model", llm.model},
              {"temperature", llm.temperature},
              {"top_p", llm.top_p},
              {"max_tokens", llm.max_tokens},
              {"batch_size", llm.batch_size},
              {"max_in_flight", llm.max_in_flight},
              {"max_attempts", llm.max_attempts},
              {"backoff_ms", llm.backoff_ms},
              {"timeout_s", llm.timeout_s},
              {"api_key", llm.api_key.empty() ? "" : "<redacted>"},
              {"cache", llm.cache}};
  j["coref"] = {{"command", coref.command}, {"order", coref.order}, {"timeout_s", coref.timeout_s}};
  j["generation"] = {{"model", generation.model_name},
                     {"max_tokens", generation.max_tokens},
                     {"temperature", generation.temperature},
                     {"top_p", generation.top_p},
                     {"max_reprompts", generation.max_reprompts},
                     {"max_chars", generation.max_chars}};
  j["target_summaries"] = target_summaries;
  j["ensemble"] = {{"learning_rate", ensemble.learning_rate},
                   {"l2_lambda", ensemble.l2_lambda},
                   {"max_iters", ensemble.max_iters},
                   {"tolerance", ensemble.tolerance}};
  j["model_path"] = model_path.string();
  ordered_json table = ordered_json::array();
  for (const auto &[bound, score] : segment_table) table.push_back({bound, score});
  j["segment_table"] = table;
  j["salient_only"] = salient_only;
  j["seed"] = seed;
  j["resamples"] = resamples;
  j["workers"] = workers;
  j["shots"] = shots;
  j["embedder"] = embedder;
  return j;
}

namespace {

void RejectUnknown(const json &j, std::initializer_list<std::string_view> known,
                   std::string_view where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError("unknown config key " + std::string(where) + it.key());
    }
  }
}

template <typename T>
void Take(const json &j, const char *key, T &dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::FromJson(const json &j) {
  RunConfig c;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    RejectUnknown(j,
                  {"corpus", "out_dir", "run_id", "methods", "partial_min_hits",
                   "partial_len_threshold", "stopwords", "pronouns", "llm", "coref", "generation", "target_summaries",
                   "ensemble", "model_path", "segment_table", "salient_only", "seed",
                   "resamples", "workers", "shots", "embedder"},
                  "");
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    Take(j, "run_id", c.run_id);
    if (j.contains("methods")) {
      c.methods.clear();
      for (const json &m : j.at("methods")) c.methods.push_back(ParseMethod(m.get<std::string>()));
    }
    Take(j, "partial_min_hits", c.partial_min_hits);
    Take(j, "partial_len_threshold", c.partial_len_threshold);
    if (j.contains("stopwords")) c.stopwords = j.at("stopwords").get<std::string>();
    if (j.contains("pronouns")) c.pronouns = j.at("pronouns").get<std::string>();
    if (j.contains("llm")) {
      const json &l = j.at("llm");
      RejectUnknown(l,
                    {"endpoint", "model", "temperature", "top_p", "max_tokens", "batch_size",
                     "max_in_flight", "max_attempts", "backoff_ms", "timeout_s", "api_key",
                     "cache"},
                    "llm.");
      Take(l, "endpoint", c.llm.endpoint);
      Take(l, "model", c.llm.model);
      Take(l, "temperature", c.llm.temperature);
      Take(l, "top_p", c.llm.top_p);
      Take(l, "max_tokens", c.llm.max_tokens);
      Take(l, "batch_size", c.llm.batch_size);
      Take(l, "max_in_flight", c.llm.max_in_flight);
      Take(l, "max_attempts", c.llm.max_attempts);
      Take(l, "backoff_ms", c.llm.backoff_ms);
      Take(l, "timeout_s", c.llm.timeout_s);
      Take(l, "api_key", c.llm.api_key);
      Take(l, "cache", c.llm.cache);
    }
    if (j.contains("coref")) {
      const json &k = j.at("coref");
      RejectUnknown(k, {"command", "order", "timeout_s"}, "coref.");
      Take(k, "command", c.coref.command);
      Take(k, "order", c.coref.order);
      Take(k, "timeout_s", c.coref.timeout_s);
    }
    if (j.contains("generation")) {
      const json &g = j.at("generation");
      RejectUnknown(g, {"model", "max_tokens", "temperature", "top_p", "max_reprompts", "max_chars"},
                    "generation.");
      Take(g, "model", c.generation.model_name);
      Take(g, "max_tokens", c.generation.max_tokens);
      Take(g, "temperature", c.generation.temperature);
      Take(g, "top_p", c.generation.top_p);
      Take(g, "max_reprompts", c.generation.max_reprompts);
      Take(g, "max_chars", c.generation.max_chars);
    }
    Take(j, "target_summaries", c.target_summaries);
    if (j.contains("ensemble")) {
      const json &e = j.at("ensemble");
      RejectUnknown(e, {"learning_rate", "l2_lambda", "max_iters", "tolerance"}, "ensemble.");
      Take(e, "learning_rate", c.ensemble.learning_rate);
      Take(e, "l2_lambda", c.ensemble.l2_lambda);
      Take(e, "max_iters", c.ensemble.max_iters);
      Take(e, "tolerance", c.ensemble.tolerance);
    }
    if (j.contains("model_path")) c.model_path = j.at("model_path").get<std::string>();
    if (j.contains("segment_table")) {
      c.segment_table.clear();
      for (const json &row : j.at("segment_table")) {
        c.segment_table.emplace_back(row.at(0).get<double>(), row.at(1).get<int>());
      }
    }
    Take(j, "salient_only", c.salient_only);
    Take(j, "seed", c.seed);
    Take(j, "resamples", c.resamples);
    Take(j, "workers", c.workers);
    Take(j, "shots", c.shots);
    Take(j, "embedder", c.embedder);
  } catch (const json::exception &e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  return c;
}

void RunConfig::Validate() const {
  if (run_id.empty() || run_id.find('/') != std::string::npos) {
    throw ConfigError("run_id must be a non-empty name without '/'");
  }
  if (methods.empty()) throw ConfigError("no alignment methods selected");
  for (Method m : methods) {
    if (m != Method::kString && m != Method::kCoref && m != Method::kLlm) {
      throw ConfigError("methods may only list string, coref and llm");
    }
  }
  Matching().Validate();
  if (llm.batch_size < kMinAlignBatch || llm.batch_size > kMaxAlignBatch) {
    throw ConfigError("llm.batch_size must be within [15, 20]");
  }
  if (llm.max_in_flight < 1 || llm.max_in_flight > 256) {
    throw ConfigError("llm.max_in_flight must be within [1, 256]");
  }
  if (llm.max_attempts < 1) throw ConfigError("llm.max_attempts must be >= 1");
  if (coref.order != "document-first" && coref.order != "summary-first") {
    throw ConfigError("coref.order must be document-first or summary-first");
  }
  if (target_summaries < 1) throw ConfigError("target_summaries must be >= 1");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (shots < 0) throw ConfigError("shots must be >= 0");
  if (resamples < 1) throw ConfigError("resamples must be >= 1");
  SegmentTable table(segment_table);  // validates
  (void)table;
}

RunConfig LoadRunConfig(const fs::path &path, const EnvLookup &env) {
  json raw;
  try {
    raw = json::parse(ReadTextFile(path));
  } catch (const json::exception &e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return RunConfig::FromJson(InterpolateEnv(raw, env));
}

// ---- files ---------------------------------------------------------------------

std::string ReadTextFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFileAtomic(const fs::path &path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---- manifest ------------------------------------------------------------------

Manifest::Manifest(const RunConfig &config, std::string command)
    : config_(config), command_(std::move(command)) {}

void Manifest::AddWarning(std::string warning) { warnings_.push_back(std::move(warning)); }
void Manifest::AddOutput(const fs::path &path) { outputs_.push_back(path); }
void Manifest::SetCache(const GatewayStats &stats) { cache_ = stats; }
void Manifest::SetVersion(const std::string &name, const std::string &value) {
  versions_.emplace_back(name, value);
}

void Manifest::Time(const std::string &stage, const std::function<void()> &fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  const std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - start;
  timings_ms_.emplace_back(stage, d.count());
}

namespace {

std::string PromptsDigest() {
  std::string all;
  for (std::string_view p :
       {resources::k_prompts_summary_system, resources::k_prompts_summary_user,
        resources::k_prompts_summary_abbreviate, resources::k_prompts_align_system,
        resources::k_prompts_align_user, resources::k_prompts_align_strict,
        resources::k_prompts_salience_system, resources::k_prompts_salience_user,
        resources::k_prompts_salience_shot, resources::k_prompts_salience_strict}) {
    all += p;
    all.push_back('\0');
  }
  return Sha256Hex(all).substr(0, 16);
}

std::string Relative(const fs::path &p, const fs::path &base) {
  std::error_code ec;
  fs::path rel = fs::relative(p, base, ec);
  return (ec || rel.empty()) ? p.string() : rel.generic_string();
}

}  // namespace

void Manifest::Commit() const {
  const fs::path path = config_.RunDir() / "manifest.json";
  ordered_json manifest;
  std::error_code ec;
  if (fs::exists(path, ec)) {
    try {
      manifest = ordered_json::parse(ReadTextFile(path));
    } catch (const nlohmann::json::exception &) {
      manifest = ordered_json::object();
    }
  }
  if (!manifest.is_object()) manifest = ordered_json::object();
  manifest["run_id"] = config_.run_id;
  if (!manifest.contains("commands")) manifest["commands"] = ordered_json::object();

  ordered_json entry;
  entry["config"] = config_.ToJson();
  entry["seed"] = config_.seed;
  ordered_json versions;
  versions["sage"] = std::string(kSageVersion);
  versions["prompts"] = PromptsDigest();
  for (const auto &[k, v] : versions_) versions[k] = v;
  entry["versions"] = versions;
  if (cache_) {
    entry["cache"] = {{"hits", cache_->cache_hits},
                      {"misses", cache_->cache_misses},
                      {"network_calls", cache_->network_calls}};
  } else {
    entry["cache"] = nullptr;
  }
  ordered_json timings = ordered_json::object();
  for (const auto &[stage, ms] : timings_ms_) timings[stage] = ms;
  entry["timings_ms"] = timings;
  entry["warnings"] = warnings_;
  ordered_json outputs = ordered_json::object();
  for (const fs::path &p : outputs_) {
    outputs[Relative(p, config_.RunDir())] = Sha256File(p);
  }
  entry["outputs"] = outputs;
  manifest["commands"][command_] = entry;
  WriteFileAtomic(path, manifest.dump(2) + "\n");
}

// ---- shared plumbing -------------------------------------------------------------

namespace {

// Removes every registered output unless Keep() is called.
class OutputGuard {
 public:
  explicit OutputGuard(Manifest &manifest) : manifest_(manifest) {}
  ~OutputGuard() {
    if (kept_) return;
    for (const fs::path &p : written_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
  void Write(const fs::path &path, std::string_view content) {
    WriteFileAtomic(path, content);
    written_.push_back(path);
    manifest_.AddOutput(path);
  }
  void Keep() { kept_ = true; }

 private:
  Manifest &manifest_;
  std::vector<fs::path> written_;
  bool kept_ = false;
};

Corpus LoadConfiguredCorpus(const RunConfig &config) {
  if (config.corpus.empty()) throw ConfigError("no corpus path given");
  return LoadCorpus(config.corpus);
}

Error WithContext(const Error &e, const std::string &context) {
  return Error(e.kind(), context + ": " + e.what());
}

// Runs fn(i) for every document index with the configured worker bound.
// The first failure in document order is rethrown after the loop.
void ForEachDocument(const RunConfig &config, const std::vector<Document> &docs,
                     const std::function<void(std::size_t)> &fn) {
  std::vector<std::exception_ptr> failures(docs.size());
  const int threads = config.workers > 0 ? config.workers : omp_get_max_threads();
  const auto n = static_cast<long>(docs.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      fn(k);
    } catch (const Error &e) {
      failures[k] = std::make_exception_ptr(WithContext(e, "document " + docs[k].id));
    } catch (...) {
      failures[k] = std::current_exception();
    }
  }
  for (const auto &f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

struct LlmServices {
  std::unique_ptr<Transport> transport;
  std::unique_ptr<ResponseCache> cache;
  std::unique_ptr<LlmGateway> gateway;
};

LlmServices MakeLlmServices(const RunConfig &config, const std::string &endpoint) {
  LlmServices s;
  if (endpoint.empty()) {
    throw ConfigError("no LLM endpoint configured; set llm.endpoint or pass --mock-llm");
  }
  if (endpoint == "mock") {
    s.transport = std::make_unique<HeuristicMockTransport>(config.Matching());
  } else {
    std::string key = config.llm.api_key;
    if (key.empty()) key = ProcessEnv("SAGE_API_KEY").value_or("");
    s.transport = std::make_unique<HttpTransport>(endpoint, key,
                                                  std::chrono::seconds(config.llm.timeout_s));
  }
  const fs::path cache_path = config.CachePath();
  if (cache_path.empty()) {
    s.cache = std::make_unique<ResponseCache>();
  } else {
    fs::create_directories(cache_path.parent_path());
    s.cache = std::make_unique<ResponseCache>(cache_path);
  }
  GatewayOptions options;
  options.max_attempts = config.llm.max_attempts;
  options.backoff_base = std::chrono::milliseconds(config.llm.backoff_ms);
  options.max_in_flight = config.llm.max_in_flight;
  s.gateway = std::make_unique<LlmGateway>(*s.transport, s.cache.get(), options);
  return s;
}

LlmTaskConfig TaskConfig(const RunConfig &config) {
  LlmTaskConfig t;
  t.model_name = config.llm.model;
  t.temperature = config.llm.temperature;
  t.top_p = config.llm.top_p;
  t.max_tokens = config.llm.max_tokens;
  return t;
}

std::unique_ptr<CorefResolver> MakeCorefResolver(const RunConfig &config) {
  std::string command = config.coref.command;
  if (command.empty()) command = ProcessEnv("SAGE_COREF_CMD").value_or("");
  if (command == "mock") return std::make_unique<MockCorefResolver>();
  if (command.empty()) {
    throw ServiceError(
        "no coreference sidecar configured; set SAGE_COREF_CMD, coref.command, or pass "
        "--mock-coref");
  }
  return std::make_unique<SidecarCorefResolver>(
      command, std::chrono::seconds(config.coref.timeout_s));
}

std::string RecordsJsonl(std::span<const AlignmentRecord> records) {
  std::string out;
  for (const AlignmentRecord &r : records) {
    out += RecordToJsonLine(r);
    out.push_back('\n');
  }
  return out;
}

fs::path AlignPath(const RunConfig &config, Method m) {
  return config.RunDir() / "align" / (std::string(MethodName(m)) + ".jsonl");
}

std::vector<AlignmentRecord> LoadMethodRecords(const RunConfig &config, Method m) {
  const fs::path p = AlignPath(config, m);
  if (!fs::exists(p)) {
    throw ConfigError("missing " + std::string(MethodName(m)) + " alignments at " + p.string() +
                      "; run `sage align` first");
  }
  return ReadRecords(p);
}

}  // namespace

std::string PredictorSlug(std::string_view predictor) {
  std::string s(predictor);
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}

// ---- ingest ----------------------------------------------------------------------

void CmdIngest(const RunConfig &config, bool fill_summaries, std::ostream &out) {
  config.Validate();
  Manifest manifest(config, fill_summaries ? "ingest --fill-summaries" : "ingest");
  OutputGuard guard(manifest);
  Corpus corpus;
  manifest.Time("load", [&] { corpus = LoadConfiguredCorpus(config); });
  std::optional<LlmServices> llm;
  if (fill_summaries) {
    llm = MakeLlmServices(config, config.llm.endpoint);
    manifest.Time("generate", [&] {
      std::vector<Document> filled = corpus.documents;
      ForEachDocument(config, filled, [&](std::size_t i) {
        Document &doc = filled[i];
        std::vector<GenreExample> examples;
        for (int pass = 0; pass < 2 && examples.size() < 3; ++pass) {
          for (const Document &other : corpus.documents) {
            if (other.id == doc.id || (pass == 0) != (other.genre == doc.genre)) continue;
            for (const Summary &s : other.summaries) {
              if (s.IsGenerated()) continue;
              examples.push_back({other.Text(), s.text});
              break;
            }
            if (examples.size() == 3) break;
          }
        }
        int next = 1;
        while (static_cast<int>(doc.summaries.size()) < config.target_summaries) {
          std::string id;
          do {
            id = "gen" + std::to_string(next++);
          } while (doc.FindSummary(id) != nullptr);
          doc.summaries.push_back(
              GenerateSummary(*llm->gateway, doc, examples, config.generation, id));
        }
      });
      corpus.documents = std::move(filled);
    });
    manifest.SetCache(llm->gateway->stats());
  }
  const fs::path dir = config.RunDir() / "corpus";
  manifest.Time("write", [&] {
    for (const Document &doc : corpus.documents) {
      const auto violations = ValidateDocument(doc, corpus.schema);
      if (!violations.empty()) {
        throw DataError("document " + doc.id + ": " + violations.front().rule + ": " +
                        violations.front().detail);
      }
      guard.Write(dir / (doc.id + ".json"), SerializeDocument(doc));
    }
    if (!corpus.manual.empty()) {
      guard.Write(dir / "manual_alignments.jsonl", RecordsJsonl(corpus.manual));
    }
  });
  guard.Keep();
  manifest.Commit();
  out << "ingested " << corpus.documents.size() << " documents into " << dir.string() << "\n";
}

// ---- align -----------------------------------------------------------------------

void CmdAlign(const RunConfig &config, std::ostream &out) {
  config.Validate();
  Manifest manifest(config, "align");
  OutputGuard guard(manifest);
  Corpus corpus;
  manifest.Time("load", [&] { corpus = LoadConfiguredCorpus(config); });
  const MatchConfig match = config.Matching();

  std::unique_ptr<CorefResolver> coref;
  std::optional<LlmServices> llm;
  for (Method m : config.methods) {
    if (m == Method::kCoref) coref = MakeCorefResolver(config);
    if (m == Method::kLlm) llm = MakeLlmServices(config, config.llm.endpoint);
  }
  CorefOptions coref_options;
  coref_options.order = config.coref.order == "summary-first" ? ConcatOrder::kSummaryFirst
                                                              : ConcatOrder::kDocumentFirst;
  const LlmTaskConfig task = TaskConfig(config);

  for (Method m : config.methods) {
    std::vector<std::vector<AlignmentRecord>> per_doc(corpus.documents.size());
    manifest.Time(std::string(MethodName(m)), [&] {
      ForEachDocument(config, corpus.documents, [&](std::size_t i) {
        const Document &doc = corpus.documents[i];
        for (const Summary &s : doc.summaries) {
          std::vector<AlignmentRecord> recs;
          try {
            switch (m) {
              case Method::kString:
                recs = AlignString(doc, s, match);
                break;
              case Method::kCoref:
                recs = AlignCoref(doc, s, *coref, coref_options);
                break;
              case Method::kLlm:
                recs = AlignEntitiesLlm(*llm->gateway, doc, s, config.llm.batch_size, task);
                break;
              default:
                throw InternalError("unsupported alignment method");
            }
          } catch (const Error &e) {
            throw WithContext(e, "summary " + s.id);
          }
          per_doc[i].insert(per_doc[i].end(), recs.begin(), recs.end());
        }
      });
    });
    std::vector<AlignmentRecord> all;
    for (auto &recs : per_doc) all.insert(all.end(), recs.begin(), recs.end());
    guard.Write(AlignPath(config, m), RecordsJsonl(all));
    out << MethodName(m) << ": " << all.size() << " records\n";
  }
  if (llm) manifest.SetCache(llm->gateway->stats());
  guard.Keep();
  manifest.Commit();
}

// ---- train-ensemble ----------------------------------------------------------------

namespace {

using LabelTable = std::map<std::tuple<std::string, std::string, std::string>, std::map<Method, bool>>;

LabelTable IndexLabels(const std::vector<std::vector<AlignmentRecord>> &sets) {
  LabelTable t;
  for (const auto &set : sets) {
    for (const AlignmentRecord &r : set) t[{r.document_id, r.summary_id, r.entity_id}][r.method] = r.label;
  }
  return t;
}

}  // namespace

void CmdTrainEnsemble(const RunConfig &config, std::ostream &out) {
  config.Validate();
  Manifest manifest(config, "train-ensemble");
  OutputGuard guard(manifest);
  Corpus corpus;
  manifest.Time("load", [&] { corpus = LoadConfiguredCorpus(config); });
  const FeatureSchema schema(corpus.schema);
  manifest.SetVersion("feature_schema", schema.fingerprint());

  std::vector<std::vector<AlignmentRecord>> sets;
  for (Method m : {Method::kString, Method::kCoref, Method::kLlm}) {
    sets.push_back(LoadMethodRecords(config, m));
  }
  const LabelTable labels = IndexLabels(sets);

  auto build = [&](Partition part, std::vector<AlignmentRecord> *gold) {
    kernels::DesignMatrix data;
    data.cols = schema.size();
    for (const AlignmentRecord &r : corpus.manual) {
      const Document *doc = corpus.Find(r.document_id);
      if (doc == nullptr || doc->partition != part) continue;
      const Entity *e = doc->FindEntity(r.entity_id);
      auto it = labels.find({r.document_id, r.summary_id, r.entity_id});
      if (it == labels.end()) {
        throw DataError("no aligner labels for " + r.document_id + "/" + r.summary_id + "/" +
                        r.entity_id);
      }
      const FeatureVector fv = ExtractFeatures(*e, *doc, it->second, schema);
      data.AddRow(fv.Dense(schema), r.label);
      if (gold) gold->push_back(r);
    }
    return data;
  };

  const kernels::DesignMatrix train = build(Partition::kDev, nullptr);
  if (train.rows == 0) {
    throw DataError("no manual alignment labels for documents in the dev partition");
  }
  TrainResult result;
  manifest.Time("train", [&] { result = Train(train, schema, config.ensemble); });
  if (!result.converged) {
    manifest.AddWarning("training stopped at max_iters=" + std::to_string(config.ensemble.max_iters) +
                        " before reaching tolerance");
  }
  guard.Write(config.ModelPath(), result.model.ToJson());

  std::vector<AlignmentRecord> held_gold;
  const kernels::DesignMatrix held = build(Partition::kTest, &held_gold);
  ordered_json metrics;
  metrics["train_rows"] = train.rows;
  metrics["iterations"] = result.iterations;
  metrics["converged"] = result.converged;
  metrics["final_loss"] = result.final_loss;
  long correct = 0;
  for (std::size_t i = 0; i < train.rows; ++i) {
    correct += PredictLabel(result.model, train.Row(i)) == (train.targets[i] > 0.5) ? 1 : 0;
  }
  metrics["train_accuracy"] = static_cast<double>(correct) / static_cast<double>(train.rows);
  out << "trained on " << train.rows << " dev decisions in " << result.iterations
      << " iterations (" << (result.converged ? "converged" : "not converged") << ")\n";
  if (held.rows == 0) {
    metrics["heldout"] = nullptr;
    manifest.AddWarning("no manual labels on the test partition; held-out scores skipped");
    out << "no held-out (test partition) manual labels\n";
  } else {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < held.rows; ++i) {
      const bool p = PredictLabel(result.model, held.Row(i));
      const bool g = held.targets[i] > 0.5;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
      tn += !p && !g;
    }
    const AlignmentScores s = AlignmentPrfFromCounts(tp, fp, fn, tn);
    auto prf = [](const Prf &p) {
      return ordered_json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
    };
    metrics["heldout"] = {{"rows", held.rows},
                          {"micro", prf(s.micro)},
                          {"macro", prf(s.macro)},
                          {"positive", prf(s.positive)}};
    out << std::fixed << std::setprecision(3) << "held-out (test partition, " << held.rows
        << " decisions): micro P/R/F " << s.micro.precision << "/" << s.micro.recall << "/"
        << s.micro.f1 << ", macro P/R/F " << s.macro.precision << "/" << s.macro.recall << "/"
        << s.macro.f1 << ", positive P/R/F " << s.positive.precision << "/"
        << s.positive.recall << "/" << s.positive.f1 << "\n";
    out.unsetf(std::ios::floatfield);
  }
  guard.Write(config.RunDir() / "model" / "train_metrics.json", metrics.dump(2) + "\n");
  guard.Keep();
  manifest.Commit();
}

// ---- score -----------------------------------------------------------------------

void CmdScore(const RunConfig &config, const std::string &predictor, std::ostream &out) {
  config.Validate();
  Manifest manifest(config, "score " + predictor);
  OutputGuard guard(manifest);
  Corpus corpus;
  manifest.Time("load", [&] { corpus = LoadConfiguredCorpus(config); });
  std::vector<std::vector<SalienceScore>> per_doc(corpus.documents.size());

  if (predictor.starts_with("aggregate:")) {
    const Method method = ParseMethod(predictor.substr(10));
    std::vector<AlignmentRecord> records;
    if (method == Method::kManual) {
      if (corpus.manual.empty()) throw DataError("corpus has no manual alignments");
      records = corpus.manual;
    } else if (method == Method::kEnsemble) {
      const FeatureSchema schema(corpus.schema);
      manifest.SetVersion("feature_schema", schema.fingerprint());
      const LogRegModel model = LogRegModel::Load(config.ModelPath());
      std::vector<AlignmentRecord> inputs;
      for (Method m : {Method::kString, Method::kCoref, Method::kLlm}) {
        auto set = LoadMethodRecords(config, m);
        inputs.insert(inputs.end(), set.begin(), set.end());
      }
      manifest.Time("ensemble", [&] {
        for (const Document &doc : corpus.documents) {
          const auto mine = RecordsForDocument(inputs, doc.id);
          for (const Summary &s : doc.summaries) {
            auto recs = AlignEnsemble(doc, s, mine, model, schema);
            records.insert(records.end(), recs.begin(), recs.end());
          }
        }
      });
      guard.Write(AlignPath(config, Method::kEnsemble), RecordsJsonl(records));
    } else {
      records = LoadMethodRecords(config, method);
    }
    manifest.Time("aggregate", [&] {
      for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
        const Document &doc = corpus.documents[i];
        try {
          per_doc[i] = Aggregate(doc, RecordsForDocument(records, doc.id));
        } catch (const Error &e) {
          throw WithContext(e, "document " + doc.id);
        }
      }
    });
  } else if (predictor == "baseline") {
    const SegmentTable table(config.segment_table);
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
      per_doc[i] = PositionBaseline(corpus.documents[i], table);
    }
  } else if (predictor == "llm-zero" || predictor == "llm-3shot") {
    LlmServices llm = MakeLlmServices(config, config.llm.endpoint);
    const MatchConfig match = config.Matching();
    const LlmTaskConfig task = TaskConfig(config);
    std::vector<Document> pool;
    for (const Document &d : corpus.documents) {
      if (d.partition == Partition::kDev) pool.push_back(d);
    }
    const std::size_t k = predictor == "llm-zero" ? 0 : static_cast<std::size_t>(config.shots);
    std::vector<long> unresolved(corpus.documents.size(), 0);
    std::vector<std::vector<std::string>> shot_ids(corpus.documents.size());
    manifest.Time("predict", [&] {
      ForEachDocument(config, corpus.documents, [&](std::size_t i) {
        const Document &doc = corpus.documents[i];
        std::vector<SalienceShot> shots;
        for (const Document *d : SelectShots(pool, doc.id, k, config.seed)) {
          shots.push_back(MakeShot(*d, match));
          shot_ids[i].push_back(d->id);
        }
        PredictionResult r = PredictSalienceLlm(*llm.gateway, doc, shots, task, match);
        per_doc[i] = std::move(r.scores);
        unresolved[i] = r.unresolved;
      });
    });
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
      if (k > 0 && shot_ids[i].size() < k) {
        manifest.AddWarning("document " + corpus.documents[i].id + ": only " +
                            std::to_string(shot_ids[i].size()) + " of " + std::to_string(k) +
                            " shots available");
      }
      if (unresolved[i] > 0) {
        manifest.AddWarning("document " + corpus.documents[i].id + ": " +
                            std::to_string(unresolved[i]) + " unresolved predictions");
      }
    }
    manifest.SetCache(llm.gateway->stats());
  } else {
    throw ConfigError("unknown predictor '" + predictor +
                      "'; expected aggregate:<method>, baseline, llm-zero or llm-3shot");
  }

  std::vector<ScoreRow> rows;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    for (const SalienceScore &s : per_doc[i]) {
      rows.push_back({corpus.documents[i].id, s.entity_id, predictor, s.score});
    }
  }
  const fs::path path = config.RunDir() / "scores" / (PredictorSlug(predictor) + ".tsv");
  guard.Write(path, ScoresToTsv(rows));
  guard.Keep();
  manifest.Commit();
  out << predictor << ": " << rows.size() << " scores -> " << path.string() << "\n";
}

// ---- eval ------------------------------------------------------------------------

namespace {

using ScoreMap = std::map<std::pair<std::string, std::string>, int>;

ScoreMap ScoreMapFromTsv(const fs::path &path) {
  ScoreMap m;
  for (const ScoreRow &r : ScoresFromTsv(ReadTextFile(path))) {
    if (!m.emplace(std::make_pair(r.document_id, r.entity_id), r.score).second) {
      throw DataError(path.string() + ": duplicate score for " + r.document_id + "/" +
                      r.entity_id);
    }
  }
  return m;
}

void CheckCoverage(const ScoreMap &have, const std::set<std::pair<std::string, std::string>> &want,
                   const std::string &what) {
  std::vector<std::string> missing, extra;
  std::set<std::string> docs;
  for (const auto &k : want) {
    if (have.contains(k)) continue;
    missing.push_back(k.first + "/" + k.second);
    docs.insert(k.first);
  }
  for (const auto &[k, _] : have) {
    if (want.contains(k)) continue;
    extra.push_back(k.first + "/" + k.second);
    docs.insert(k.first);
  }
  if (missing.empty() && extra.empty()) return;
  auto list = [](const std::vector<std::string> &ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size() && i < 10; ++i) s += (i ? ", " : "") + ids[i];
    if (ids.size() > 10) s += ", ... (" + std::to_string(ids.size()) + " total)";
    return s;
  };
  std::string msg = what + " entity set differs from the corpus in documents " +
                    list(std::vector<std::string>(docs.begin(), docs.end()));
  if (!missing.empty()) msg += "; missing: " + list(missing);
  if (!extra.empty()) msg += "; unexpected: " + list(extra);
  throw DataError(msg);
}

}  // namespace

void CmdEval(const RunConfig &config, const EvalArgs &args, std::ostream &out) {
  config.Validate();
  const std::string name = args.name.empty() ? args.predictions.stem().string() : args.name;
  Manifest manifest(config, "eval " + name);
  OutputGuard guard(manifest);
  Corpus corpus;
  manifest.Time("load", [&] { corpus = LoadConfiguredCorpus(config); });

  std::set<std::pair<std::string, std::string>> universe;
  for (const Document &d : corpus.documents) {
    for (const Entity &e : d.entities) universe.insert({d.id, e.id});
  }
  ScoreMap gold;
  std::string gold_source = args.gold;
  if (gold_source == "auto") gold_source = corpus.manual.empty() ? "corpus" : "manual";
  if (gold_source == "manual") {
    if (corpus.manual.empty()) throw DataError("corpus has no manual alignments for gold scores");
    for (const Document &d : corpus.documents) {
      for (const SalienceScore &s : GoldScores(d, RecordsForDocument(corpus.manual, d.id))) {
        gold[{d.id, s.entity_id}] = s.score;
      }
    }
  } else if (gold_source == "corpus") {
    for (const Document &d : corpus.documents) {
      for (const Entity &e : d.entities) {
        if (!e.gold_score) throw DataError("document " + d.id + ": entity " + e.id + " has no gold_score");
        gold[{d.id, e.id}] = *e.gold_score;
      }
    }
  } else {
    gold = ScoreMapFromTsv(gold_source);
    CheckCoverage(gold, universe, "gold");
  }
  const ScoreMap pred = ScoreMapFromTsv(args.predictions);
  CheckCoverage(pred, universe, "prediction");
  std::optional<ScoreMap> base;
  if (args.compare) {
    base = ScoreMapFromTsv(*args.compare);
    CheckCoverage(*base, universe, "comparison");
  }

  int n_summaries = 0;
  std::set<std::size_t> counts;
  for (const Document &d : corpus.documents) {
    counts.insert(d.summaries.size());
    n_summaries = std::max(n_summaries, static_cast<int>(d.summaries.size()));
  }
  std::vector<EntityRow> rows, base_rows;
  for (const Document &d : corpus.documents) {
    for (const Entity &e : d.entities) {
      EntityRow r{d.id, e.id, d.genre, e.type, gold.at({d.id, e.id}), pred.at({d.id, e.id}),
                  d.FirstMentionSentence(e) * 2 < d.sentence_count};
      rows.push_back(r);
      if (base) {
        r.pred = base->at({d.id, e.id});
        base_rows.push_back(r);
      }
    }
  }
  EvalOptions options;
  options.seed = config.seed;
  options.resamples = config.resamples;
  options.salient_only = config.salient_only;
  options.n_summaries = n_summaries;
  EvalReport report;
  manifest.Time("evaluate", [&] { report = Evaluate(rows, options, base_rows); });
  if (counts.size() > 1) {
    report.warnings.push_back("documents have differing summary counts; tiers use N=" +
                              std::to_string(n_summaries));
  }
  for (const std::string &w : report.warnings) manifest.AddWarning(w);

  const fs::path dir = config.RunDir() / "eval" / name;
  guard.Write(dir / "report.json", report.ToJson());
  guard.Write(dir / "confusion.tsv", report.ConfusionTsv());
  guard.Write(dir / "per_genre.tsv", report.PerGenreTsv());
  guard.Write(dir / "per_type.tsv", report.PerTypeTsv());
  guard.Write(dir / "errors_by_half.tsv", report.ErrorsByHalfTsv());
  guard.Keep();
  manifest.Commit();

  out << std::fixed << std::setprecision(3);
  out << name << " vs " << gold_source << " gold (" << report.entities << " entities, "
      << report.documents << " documents)\n";
  if (report.spearman) {
    out << "  spearman " << report.spearman->value << " [" << report.spearman->ci.low << ", "
        << report.spearman->ci.high << "]\n";
  } else {
    out << "  spearman undefined\n";
  }
  out << "  rmse     " << report.rmse.value << " [" << report.rmse.ci.low << ", "
      << report.rmse.ci.high << "]\n";
  out << "  top1 P/R/F " << report.top1.precision << "/" << report.top1.recall << "/"
      << report.top1.f1 << "\n";
  out << "  top3 P/R/F " << report.top3.precision << "/" << report.top3.recall << "/"
      << report.top3.f1 << "\n";
  if (report.wilcoxon) {
    out << "  wilcoxon W+ " << report.wilcoxon->statistic << ", p " << report.wilcoxon->p_value
        << (report.wilcoxon->exact ? " (exact)" : " (normal approximation)") << "\n";
  }
  out.unsetf(std::ios::floatfield);
}

// ---- stats / sumqual ---------------------------------------------------------------

void CmdStats(const RunConfig &config, std::ostream &out) {
  config.Validate();
  Manifest manifest(config, "stats");
  OutputGuard guard(manifest);
  const Corpus corpus = LoadConfiguredCorpus(config);
  const std::string tsv = ComputeCorpusStats(corpus).ToTsv();
  guard.Write(config.RunDir() / "stats.tsv", tsv);
  guard.Keep();
  manifest.Commit();
  out << tsv;
}

void CmdSumqual(const RunConfig &config, std::ostream &out) {
  config.Validate();
  Manifest manifest(config, "sumqual");
  OutputGuard guard(manifest);
  const Corpus corpus = LoadConfiguredCorpus(config);

  std::unique_ptr<Embedder> embedder;
  std::optional<LlmServices> remote;
  if (config.embedder == "tfidf") {
    embedder = std::make_unique<TfidfEmbedder>();
  } else {
    RunConfig embed_config = config;
    embed_config.llm.cache = (config.RunDir() / "cache" / "embeddings.jsonl").string();
    remote = MakeLlmServices(embed_config, config.embedder);
    embedder = std::make_unique<RemoteEmbedder>(*remote->gateway);
  }

  auto opt = [](const std::optional<double> &v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  auto prf = [](const std::optional<Prf3> &p) {
    if (!p) return ordered_json(nullptr);
    return ordered_json{{"precision", p->precision}, {"recall", p->recall}, {"f1", p->f1}};
  };
  std::map<std::string, std::pair<double, long>> sums;
  auto accumulate = [&sums](const std::string &key, const std::optional<double> &v) {
    if (!v) return;
    sums[key].first += *v;
    sums[key].second += 1;
  };
  ordered_json docs = ordered_json::array();
  for (const Document &d : corpus.documents) {
    const DocumentQuality q = AssessDocument(d, *embedder);
    auto sim = [&](const std::optional<SimilarityResult> &s) {
      if (!s) return ordered_json(nullptr);
      if (s->skipped_pairs > 0) {
        manifest.AddWarning("document " + d.id + ": " + std::to_string(s->skipped_pairs) +
                            " summary pairs with a zero embedding skipped");
      }
      return ordered_json{{"mean", s->mean}, {"pairs", s->pairs}, {"skipped_pairs", s->skipped_pairs}};
    };
    docs.push_back({{"document_id", d.id},
                    {"human_summaries", q.human},
                    {"generated_summaries", q.generated},
                    {"rouge1", prf(q.rouge1)},
                    {"rouge2", prf(q.rouge2)},
                    {"rougeL", prf(q.rougel)},
                    {"self_bleu_human", opt(q.self_bleu_human)},
                    {"self_bleu_generated", opt(q.self_bleu_generated)},
                    {"similarity_human", sim(q.similarity_human)},
                    {"similarity_generated", sim(q.similarity_generated)}});
    if (q.rouge1) accumulate("rouge1_f1", q.rouge1->f1);
    if (q.rouge2) accumulate("rouge2_f1", q.rouge2->f1);
    if (q.rougel) accumulate("rougeL_f1", q.rougel->f1);
    accumulate("self_bleu_human", q.self_bleu_human);
    accumulate("self_bleu_generated", q.self_bleu_generated);
    if (q.similarity_human) accumulate("similarity_human", q.similarity_human->mean);
    if (q.similarity_generated) accumulate("similarity_generated", q.similarity_generated->mean);
  }
  ordered_json means = ordered_json::object();
  for (const auto &[key, acc] : sums) means[key] = acc.first / static_cast<double>(acc.second);
  ordered_json report;
  report["documents"] = docs;
  report["mean"] = means;
  report["metadata"] = {{"embedder", embedder->Name()},
                        {"normalization", "lowercase, punctuation stripped, whitespace split"},
                        {"rouge_reference", "each generated summary against each human summary"},
                        {"self_bleu", "BLEU-4, add-one smoothing on 2- to 4-gram precisions"}};
  guard.Write(config.RunDir() / "sumqual.json", report.dump(2) + "\n");
  if (remote) manifest.SetCache(remote->gateway->stats());
  guard.Keep();
  manifest.Commit();
  out << "sumqual: " << corpus.documents.size() << " documents";
  for (const auto &[key, acc] : sums) {
    out << ", " << key << " " << std::fixed << std::setprecision(3)
        << acc.first / static_cast<double>(acc.second);
  }
  out.unsetf(std::ios::floatfield);
  out << "\n";
}

}  // namespace sage
