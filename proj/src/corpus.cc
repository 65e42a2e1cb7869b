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

#include "sage/corpus.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "sage/embedded_resources.h"
#include "sage/error.h"
#include "sage/text.h"

namespace sage {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view PartitionName(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kDev: return "dev";
    case Partition::kTest: return "test";
  }
  return "train";
}

Partition ParsePartition(std::string_view name) {
  if (name == "train") return Partition::kTrain;
  if (name == "dev") return Partition::kDev;
  if (name == "test") return Partition::kTest;
  throw DataError("unknown partition '" + std::string(name) + "'");
}

Summary MakeSummary(std::string id, std::string source, std::string text) {
  Summary s{std::move(id), std::move(source), std::move(text), 0};
  s.char_len = CodePointCount(s.text);
  return s;
}

const Entity *Document::FindEntity(std::string_view entity_id) const {
  for (const Entity &e : entities) {
    if (e.id == entity_id) return &e;
  }
  return nullptr;
}

const Summary *Document::FindSummary(std::string_view summary_id) const {
  for (const Summary &s : summaries) {
    if (s.id == summary_id) return &s;
  }
  return nullptr;
}

int Document::FirstMentionSentence(const Entity &e) const {
  int best = sentence_count;
  for (const Mention &m : e.mentions) {
    if (m.span.start >= 0 && m.span.start < static_cast<int>(tokens.size())) {
      best = std::min(best, tokens[m.span.start].sentence_index);
    }
  }
  return best;
}

std::string Document::SpanText(const Span &span) const {
  std::string out;
  for (int i = span.start; i < span.end; ++i) {
    if (i > span.start) out.push_back(' ');
    out.append(tokens[i].surface);
  }
  return out;
}

std::string Document::Text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) {
      out.push_back(tokens[i].sentence_index != tokens[i - 1].sentence_index
                        ? '\n'
                        : ' ');
    }
    out.append(tokens[i].surface);
  }
  return out;
}

CorpusSchema CorpusSchema::Default() {
  return {ParseLines(resources::k_entity_types), ParseLines(resources::k_genres)};
}

bool CorpusSchema::HasType(std::string_view t) const {
  return std::find(entity_types.begin(), entity_types.end(), t) !=
         entity_types.end();
}

bool CorpusSchema::HasGenre(std::string_view g) const {
  return std::find(genres.begin(), genres.end(), g) != genres.end();
}

const Document *Corpus::Find(std::string_view id) const {
  auto it = std::lower_bound(
      documents.begin(), documents.end(), id,
      [](const Document &d, std::string_view key) { return d.id < key; });
  if (it != documents.end() && it->id == id) return &*it;
  return nullptr;
}

std::vector<Violation> ValidateDocument(const Document &doc,
                                        const CorpusSchema &schema) {
  std::vector<Violation> out;
  auto add = [&out](std::string rule, std::string detail) {
    out.push_back({std::move(rule), std::move(detail)});
  };

  if (!schema.HasGenre(doc.genre)) add("unknown genre", doc.genre);

  int max_sentence = -1;
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const Token &t = doc.tokens[i];
    if (i > 0) {
      if (t.doc_index <= doc.tokens[i - 1].doc_index) {
        add("token index not increasing", "token " + std::to_string(i));
      }
      if (t.sentence_index < doc.tokens[i - 1].sentence_index) {
        add("sentence index decreasing", "token " + std::to_string(i));
      }
    }
    if (t.sentence_index < 0) add("negative sentence index", "token " + std::to_string(i));
    max_sentence = std::max(max_sentence, t.sentence_index);
  }
  if (doc.sentence_count != max_sentence + 1) {
    add("sentence count mismatch", std::to_string(doc.sentence_count));
  }

  const int n_tokens = static_cast<int>(doc.tokens.size());
  const int n_summaries = static_cast<int>(doc.summaries.size());
  std::set<std::string> entity_ids;
  std::set<int> positions;
  for (const Entity &e : doc.entities) {
    if (!entity_ids.insert(e.id).second) add("duplicate entity id", e.id);
    if (!schema.HasType(e.type)) add("unknown entity type", e.id + ": " + e.type);
    if (e.position < 1) {
      add("invalid entity position", e.id);
    } else if (!positions.insert(e.position).second) {
      add("duplicate entity position", e.id);
    }
    if (e.gold_score && (*e.gold_score < 0 || *e.gold_score > n_summaries)) {
      add("gold score out of range", e.id);
    }
    if (e.mentions.empty()) {
      add("empty mentions", e.id);
      continue;
    }
    for (std::size_t k = 0; k < e.mentions.size(); ++k) {
      const Mention &m = e.mentions[k];
      const std::string where = e.id + " [" + std::to_string(m.span.start) +
                                "," + std::to_string(m.span.end) + ")";
      if (m.entity_id != e.id) add("mention entity mismatch", where);
      if (k > 0 && m.span.start < e.mentions[k - 1].span.start) {
        add("mentions unordered", where);
      }
      if (m.span.start >= m.span.end) {
        add("empty span", where);
      } else if (m.span.start < 0 || m.span.end > n_tokens) {
        add("span out of bounds", where);
      } else if (m.surface != doc.SpanText(m.span)) {
        add("mention surface mismatch", where);
      }
    }
  }

  if (doc.summaries.empty()) add("no summaries", doc.id);
  std::set<std::string> summary_ids;
  for (const Summary &s : doc.summaries) {
    if (!summary_ids.insert(s.id).second) add("duplicate summary id", s.id);
    if (s.source != "human" &&
        !(s.source.starts_with("model:") && s.source.size() > 6)) {
      add("invalid summary source", s.id + ": " + s.source);
    }
    if (s.char_len != CodePointCount(s.text)) add("summary char_len mismatch", s.id);
    if (s.IsGenerated() && s.char_len > kMaxSummaryChars) {
      add("summary length", s.id + ": " + std::to_string(s.char_len) + " chars");
    }
  }
  return out;
}

namespace {

std::string Describe(const std::vector<Violation> &violations) {
  std::string msg;
  for (const Violation &v : violations) {
    if (!msg.empty()) msg += "; ";
    msg += v.rule + " (" + v.detail + ")";
  }
  return msg;
}

}  // namespace

Document ParseDocument(std::string_view json_text, const CorpusSchema &schema,
                       std::string_view origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception &e) {
    throw DataError(std::string(origin) + ": invalid JSON: " + e.what());
  }
  Document doc;
  std::string field = "id";
  try {
    doc.id = j.at("id").get<std::string>();
    field = "genre";
    doc.genre = j.at("genre").get<std::string>();
    field = "partition";
    doc.partition = ParsePartition(j.at("partition").get<std::string>());

    field = "tokens";
    int max_sentence = -1;
    for (const json &t : j.at("tokens")) {
      Token tok;
      tok.doc_index = static_cast<int>(doc.tokens.size());
      tok.surface = t.at("s").get<std::string>();
      tok.sentence_index = t.at("sent").get<int>();
      max_sentence = std::max(max_sentence, tok.sentence_index);
      doc.tokens.push_back(std::move(tok));
    }
    doc.sentence_count = max_sentence + 1;

    field = "entities";
    const int n_tokens = static_cast<int>(doc.tokens.size());
    for (const json &je : j.at("entities")) {
      Entity e;
      e.id = je.at("id").get<std::string>();
      e.type = je.at("type").get<std::string>();
      if (je.contains("gold_score") && !je["gold_score"].is_null()) {
        e.gold_score = je["gold_score"].get<int>();
      }
      for (const json &span : je.at("mentions")) {
        if (!span.is_array() || span.size() != 2) {
          throw DataError("document " + doc.id + ": entity " + e.id +
                          ": mention must be [start, end]");
        }
        Mention m;
        m.entity_id = e.id;
        m.span = {span[0].get<int>(), span[1].get<int>()};
        if (m.span.start < 0 || m.span.end > n_tokens ||
            m.span.start >= m.span.end) {
          throw DataError("document " + doc.id + ": entity " + e.id +
                          ": span-out-of-bounds [" +
                          std::to_string(m.span.start) + "," +
                          std::to_string(m.span.end) + ") with " +
                          std::to_string(n_tokens) + " tokens");
        }
        m.surface = doc.SpanText(m.span);
        e.mentions.push_back(std::move(m));
      }
      std::stable_sort(e.mentions.begin(), e.mentions.end(),
                       [](const Mention &a, const Mention &b) {
                         return a.span < b.span;
                       });
      doc.entities.push_back(std::move(e));
    }

    field = "summaries";
    for (const json &js : j.at("summaries")) {
      doc.summaries.push_back(MakeSummary(js.at("id").get<std::string>(),
                                          js.at("source").get<std::string>(),
                                          js.at("text").get<std::string>()));
    }
  } catch (const json::exception &e) {
    throw DataError(std::string(origin) + ": document " +
                    (doc.id.empty() ? "?" : doc.id) + ": field '" + field +
                    "': " + e.what());
  }

  // Position = rank of an entity's first mention (outer spans first on ties).
  std::vector<std::size_t> order(doc.entities.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto first = [&doc](std::size_t i) {
    const auto &ms = doc.entities[i].mentions;
    return ms.empty() ? Span{1 << 30, 1 << 30} : ms.front().span;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    Span sa = first(a), sb = first(b);
    if (sa.start != sb.start) return sa.start < sb.start;
    if (sa.end != sb.end) return sa.end > sb.end;
    return doc.entities[a].id < doc.entities[b].id;
  });
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    doc.entities[order[rank]].position = static_cast<int>(rank) + 1;
  }

  if (auto v = ValidateDocument(doc, schema); !v.empty()) {
    throw DataError(std::string(origin) + ": document " + doc.id + ": " +
                    Describe(v));
  }
  return doc;
}

std::string SerializeDocument(const Document &doc) {
  ordered_json j;
  j["id"] = doc.id;
  j["genre"] = doc.genre;
  j["partition"] = PartitionName(doc.partition);
  ordered_json tokens = ordered_json::array();
  for (const Token &t : doc.tokens) {
    tokens.push_back({{"s", t.surface}, {"sent", t.sentence_index}});
  }
  j["tokens"] = std::move(tokens);
  ordered_json entities = ordered_json::array();
  for (const Entity &e : doc.entities) {
    ordered_json je;
    je["id"] = e.id;
    je["type"] = e.type;
    ordered_json mentions = ordered_json::array();
    for (const Mention &m : e.mentions) {
      mentions.push_back({m.span.start, m.span.end});
    }
    je["mentions"] = std::move(mentions);
    if (e.gold_score) je["gold_score"] = *e.gold_score;
    entities.push_back(std::move(je));
  }
  j["entities"] = std::move(entities);
  ordered_json summaries = ordered_json::array();
  for (const Summary &s : doc.summaries) {
    summaries.push_back({{"id", s.id}, {"source", s.source}, {"text", s.text}});
  }
  j["summaries"] = std::move(summaries);
  return j.dump(1) + "\n";
}

namespace {

std::string ReadFile(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Loader-side consistency between stored gold scores and manual alignments.
void CheckManualAgainstGold(const Corpus &corpus) {
  std::map<std::pair<std::string, std::string>, int> positives;
  std::set<std::pair<std::string, std::string>> seen;
  for (const AlignmentRecord &r : corpus.manual) {
    if (r.method != Method::kManual) {
      throw DataError("manual alignment file holds a " +
                      std::string(MethodName(r.method)) + " record");
    }
    const Document *doc = corpus.Find(r.document_id);
    if (doc == nullptr) throw DataError("manual record for unknown document " + r.document_id);
    if (doc->FindEntity(r.entity_id) == nullptr) {
      throw DataError("manual record for unknown entity " + r.document_id + "/" + r.entity_id);
    }
    if (doc->FindSummary(r.summary_id) == nullptr) {
      throw DataError("manual record for unknown summary " + r.document_id + "/" + r.summary_id);
    }
    positives[{r.document_id, r.entity_id}] += r.label ? 1 : 0;
    seen.insert({r.document_id, r.entity_id});
  }
  for (const Document &doc : corpus.documents) {
    for (const Entity &e : doc.entities) {
      if (!e.gold_score || !seen.contains({doc.id, e.id})) continue;
      int count = positives[{doc.id, e.id}];
      if (count != *e.gold_score) {
        throw DataError("document " + doc.id + ": entity " + e.id +
                        ": gold_score " + std::to_string(*e.gold_score) +
                        " but manual alignments count " + std::to_string(count));
      }
    }
  }
}

}  // namespace

Corpus LoadCorpus(const std::filesystem::path &path, const CorpusSchema &schema) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(path, ec)) throw ConfigError("corpus path does not exist: " + path.string());

  Corpus corpus;
  corpus.schema = schema;
  std::vector<fs::path> files;
  fs::path manual_path;
  if (fs::is_directory(path)) {
    for (const auto &entry : fs::directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    manual_path = path / "manual_alignments.jsonl";
  } else {
    files.push_back(path);
  }
  std::sort(files.begin(), files.end());
  for (const fs::path &f : files) {
    corpus.documents.push_back(ParseDocument(ReadFile(f), schema, f.string()));
  }
  std::sort(corpus.documents.begin(), corpus.documents.end(),
            [](const Document &a, const Document &b) { return a.id < b.id; });
  for (std::size_t i = 1; i < corpus.documents.size(); ++i) {
    if (corpus.documents[i].id == corpus.documents[i - 1].id) {
      throw DataError("duplicate document id " + corpus.documents[i].id);
    }
  }
  if (!manual_path.empty() && fs::exists(manual_path)) {
    corpus.manual = ReadRecords(manual_path);
    CheckManualAgainstGold(corpus);
  }
  return corpus;
}

namespace {

struct Tally {
  StatsRow row;
  long scored = 0;
  long salient = 0;
  long top1 = 0;
  long top3 = 0;
  bool complete = true;

  void Add(const Document &doc) {
    row.documents += 1;
    row.tokens += static_cast<long>(doc.tokens.size());
    row.entities += static_cast<long>(doc.entities.size());
    const int n = static_cast<int>(doc.summaries.size());
    for (const Entity &e : doc.entities) {
      row.mentions += static_cast<long>(e.mentions.size());
      if (!e.gold_score) {
        complete = false;
        continue;
      }
      int s = *e.gold_score;
      scored += 1;
      if (s >= 1) salient += 1;
      if (s == n) top1 += 1;
      if (s >= n - 2 && s >= 1) top3 += 1;
    }
  }

  StatsRow Finish() const {
    StatsRow r = row;
    r.avg_entities_per_doc =
        r.documents > 0 ? static_cast<double>(r.entities) / r.documents : 0.0;
    if (complete && r.entities > 0) {
      r.pct_salient = 100.0 * salient / r.entities;
      r.pct_top1 = 100.0 * top1 / r.entities;
      r.pct_top3 = 100.0 * top3 / r.entities;
    }
    return r;
  }
};

}  // namespace

StatsTable ComputeCorpusStats(const Corpus &corpus) {
  std::map<std::string, Tally> tallies;
  Tally total;
  for (const Document &doc : corpus.documents) {
    tallies[doc.genre].Add(doc);
    total.Add(doc);
  }
  StatsTable table;
  for (const auto &[genre, tally] : tallies) table.by_genre[genre] = tally.Finish();
  table.total = total.Finish();
  return table;
}

std::string StatsTable::ToTsv() const {
  std::ostringstream out;
  out << "genre\tdocuments\ttokens\tmentions\tentities\tavg_entities_per_doc"
         "\tpct_salient\tpct_top1\tpct_top3\n";
  auto pct = [](const std::optional<double> &v) {
    if (!v) return std::string("NA");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(1);
    s << *v;
    return s.str();
  };
  auto emit = [&](const std::string &name, const StatsRow &r) {
    std::ostringstream avg;
    avg.setf(std::ios::fixed);
    avg.precision(2);
    avg << r.avg_entities_per_doc;
    out << name << '\t' << r.documents << '\t' << r.tokens << '\t'
        << r.mentions << '\t' << r.entities << '\t' << avg.str() << '\t'
        << pct(r.pct_salient) << '\t' << pct(r.pct_top1) << '\t'
        << pct(r.pct_top3) << '\n';
  };
  for (const auto &[genre, row] : by_genre) emit(genre, row);
  emit("TOTAL", total);
  return out.str();
}

}  // namespace sage
