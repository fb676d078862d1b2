#pragma once

// Corpus schema and JSONL ingestion. Line 1 of a corpus file holds the role
// schema; every following line is one sentence record. All indices are
// 0-based token positions; spans are inclusive on both ends; dep_heads uses
// -1 as the root sentinel.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "argex/errors.hpp"
#include <json.hpp>

namespace argex {

struct RoleSchema {
  std::vector<std::string> trigger_types;
  std::vector<std::string> roles;
  std::map<std::string, std::vector<std::string>> permissible;

  int trigger_index(const std::string& t) const {
    for (std::size_t i = 0; i < trigger_types.size(); ++i)
      if (trigger_types[i] == t) return static_cast<int>(i);
    throw ValueError("unknown event type: " + t);
  }
  int role_index(const std::string& r) const {
    for (std::size_t i = 0; i < roles.size(); ++i)
      if (roles[i] == r) return static_cast<int>(i);
    throw ValueError("unknown role: " + r);
  }
  const std::vector<std::string>& permissible_roles(
      const std::string& t) const {
    auto it = permissible.find(t);
    if (it == permissible.end()) throw ValueError("unknown event type: " + t);
    return it->second;
  }
  bool is_permissible(const std::string& t, const std::string& r) const {
    auto it = permissible.find(t);
    if (it == permissible.end()) return false;
    return std::find(it->second.begin(), it->second.end(), r) !=
           it->second.end();
  }
  bool operator==(const RoleSchema&) const = default;
};

struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string entity_type;
  bool operator==(const EntitySpan&) const = default;
};

struct ArgumentRecord {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string role;
  std::optional<std::size_t> entity_index;
  bool operator==(const ArgumentRecord&) const = default;
};

struct EventRecord {
  std::size_t trigger_start = 0;
  std::size_t trigger_end = 0;
  std::string event_type;
  std::vector<ArgumentRecord> arguments;
  bool operator==(const EventRecord&) const = default;
};

struct SentenceRecord {
  std::string doc_id;
  std::string sent_id;
  std::vector<std::string> tokens;
  std::vector<int> dep_heads;
  std::vector<std::string> dep_labels;
  std::vector<EntitySpan> entities;
  std::vector<EventRecord> events;
  std::string provenance;  // "" = gold; "silver" for self-training output

  std::size_t size() const { return tokens.size(); }
  bool operator==(const SentenceRecord&) const = default;
};

struct Corpus {
  RoleSchema schema;
  std::vector<SentenceRecord> sentences;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

// True iff dep_heads encodes a single rooted tree over [0, T).
inline bool is_valid_tree(const std::vector<int>& heads) {
  const int t = static_cast<int>(heads.size());
  int roots = 0;
  for (int h : heads) {
    if (h == -1)
      ++roots;
    else if (h < 0 || h >= t)
      return false;
  }
  if (roots != 1) return false;
  for (int i = 0; i < t; ++i) {
    int cur = i, steps = 0;
    while (cur != -1) {
      cur = heads[static_cast<std::size_t>(cur)];
      if (++steps > t) return false;  // cycle
    }
  }
  return true;
}

inline void validate_record(const SentenceRecord& rec, const RoleSchema& schema,
                            long line = -1) {
  const std::size_t t = rec.tokens.size();
  auto fail_format = [&](const std::string& msg) {
    throw RecordFormatError(msg, rec.doc_id, rec.sent_id, line);
  };
  if (t == 0) fail_format("sentence has no tokens");
  if (rec.dep_heads.size() != t)
    fail_format("dep_heads length " + std::to_string(rec.dep_heads.size()) +
                " != token count " + std::to_string(t));
  if (rec.dep_labels.size() != t)
    fail_format("dep_labels length " + std::to_string(rec.dep_labels.size()) +
                " != token count " + std::to_string(t));
  if (!is_valid_tree(rec.dep_heads))
    throw CyclicParseError("dep_heads is not a single rooted tree",
                           rec.doc_id, rec.sent_id, line);
  auto check_span = [&](std::size_t s, std::size_t e, const char* what) {
    if (s > e || e >= t)
      throw SpanRangeError(std::string(what) + " span [" + std::to_string(s) +
                               "," + std::to_string(e) + "] outside " +
                               std::to_string(t) + " tokens",
                           rec.doc_id, rec.sent_id, line);
  };
  for (const EntitySpan& ent : rec.entities)
    check_span(ent.start, ent.end, "entity");
  for (const EventRecord& ev : rec.events) {
    check_span(ev.trigger_start, ev.trigger_end, "trigger");
    if (std::find(schema.trigger_types.begin(), schema.trigger_types.end(),
                  ev.event_type) == schema.trigger_types.end())
      throw RolePermissibilityError("unknown event type " + ev.event_type,
                                    rec.doc_id, rec.sent_id, line);
    std::set<std::tuple<std::size_t, std::size_t, std::string>> seen;
    for (const ArgumentRecord& a : ev.arguments) {
      check_span(a.start, a.end, "argument");
      if (!schema.is_permissible(ev.event_type, a.role))
        throw RolePermissibilityError(
            "role " + a.role + " not permissible for " + ev.event_type,
            rec.doc_id, rec.sent_id, line);
      if (!seen.insert({a.start, a.end, a.role}).second)
        fail_format("duplicate (span, role) argument: [" +
                    std::to_string(a.start) + "," + std::to_string(a.end) +
                    "] " + a.role);
      if (a.entity_index) {
        if (*a.entity_index >= rec.entities.size())
          fail_format("entity_index out of range");
        const EntitySpan& ent = rec.entities[*a.entity_index];
        if (ent.start != a.start || ent.end != a.end)
          fail_format("entity_index does not match argument span");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// JSONL serialization
// ---------------------------------------------------------------------------

inline nlohmann::json schema_to_json(const RoleSchema& s) {
  return {{"schema",
           {{"trigger_types", s.trigger_types},
            {"roles", s.roles},
            {"permissible", s.permissible}}}};
}

inline RoleSchema schema_from_json(const nlohmann::json& j) {
  RoleSchema s;
  const auto& js = j.at("schema");
  s.trigger_types = js.at("trigger_types").get<std::vector<std::string>>();
  s.roles = js.at("roles").get<std::vector<std::string>>();
  s.permissible =
      js.at("permissible")
          .get<std::map<std::string, std::vector<std::string>>>();
  for (const auto& [t, rs] : s.permissible)
    for (const std::string& r : rs)
      if (std::find(s.roles.begin(), s.roles.end(), r) == s.roles.end())
        throw ConfigError("schema: permissible role " + r + " for " + t +
                          " missing from role list");
  return s;
}

inline nlohmann::json sentence_to_json(const SentenceRecord& rec) {
  nlohmann::json ents = nlohmann::json::array();
  for (const EntitySpan& e : rec.entities)
    ents.push_back({{"start", e.start}, {"end", e.end}, {"type", e.entity_type}});
  nlohmann::json evs = nlohmann::json::array();
  for (const EventRecord& ev : rec.events) {
    nlohmann::json args = nlohmann::json::array();
    for (const ArgumentRecord& a : ev.arguments) {
      nlohmann::json ja = {
          {"start", a.start}, {"end", a.end}, {"role", a.role}};
      if (a.entity_index) ja["entity_index"] = *a.entity_index;
      args.push_back(std::move(ja));
    }
    evs.push_back({{"trigger_start", ev.trigger_start},
                   {"trigger_end", ev.trigger_end},
                   {"event_type", ev.event_type},
                   {"arguments", std::move(args)}});
  }
  nlohmann::json j = {{"doc_id", rec.doc_id},   {"sent_id", rec.sent_id},
                      {"tokens", rec.tokens},   {"dep_heads", rec.dep_heads},
                      {"dep_labels", rec.dep_labels}, {"entities", std::move(ents)},
                      {"events", std::move(evs)}};
  if (!rec.provenance.empty()) j["provenance"] = rec.provenance;
  return j;
}

inline SentenceRecord sentence_from_json(const nlohmann::json& j, long line) {
  SentenceRecord rec;
  try {
    rec.doc_id = j.at("doc_id").get<std::string>();
    rec.sent_id = j.at("sent_id").get<std::string>();
    rec.tokens = j.at("tokens").get<std::vector<std::string>>();
    rec.dep_heads = j.at("dep_heads").get<std::vector<int>>();
    rec.dep_labels = j.at("dep_labels").get<std::vector<std::string>>();
    for (const auto& je : j.at("entities")) {
      EntitySpan e;
      e.start = je.at("start").get<std::size_t>();
      e.end = je.at("end").get<std::size_t>();
      e.entity_type = je.at("type").get<std::string>();
      rec.entities.push_back(std::move(e));
    }
    for (const auto& jev : j.at("events")) {
      EventRecord ev;
      ev.trigger_start = jev.at("trigger_start").get<std::size_t>();
      ev.trigger_end = jev.at("trigger_end").get<std::size_t>();
      ev.event_type = jev.at("event_type").get<std::string>();
      for (const auto& ja : jev.at("arguments")) {
        ArgumentRecord a;
        a.start = ja.at("start").get<std::size_t>();
        a.end = ja.at("end").get<std::size_t>();
        a.role = ja.at("role").get<std::string>();
        if (ja.contains("entity_index"))
          a.entity_index = ja.at("entity_index").get<std::size_t>();
        ev.arguments.push_back(std::move(a));
      }
      rec.events.push_back(std::move(ev));
    }
    if (j.contains("provenance"))
      rec.provenance = j.at("provenance").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw RecordFormatError(std::string("bad record: ") + e.what(),
                            j.value("doc_id", "?"), j.value("sent_id", "?"),
                            line);
  }
  return rec;
}

inline Corpus parse_corpus_stream(std::istream& in) {
  Corpus corpus;
  std::string line;
  long line_no = 0;
  bool have_schema = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw RecordFormatError(std::string("malformed JSON: ") + e.what(), "?",
                              "?", line_no);
    }
    if (!have_schema) {
      if (!j.contains("schema"))
        throw RecordFormatError("first line must hold the schema object", "?",
                                "?", line_no);
      try {
        corpus.schema = schema_from_json(j);
      } catch (const nlohmann::json::exception& e) {
        throw RecordFormatError(std::string("bad schema: ") + e.what(), "?",
                                "?", line_no);
      }
      have_schema = true;
      continue;
    }
    SentenceRecord rec = sentence_from_json(j, line_no);
    validate_record(rec, corpus.schema, line_no);
    corpus.sentences.push_back(std::move(rec));
  }
  if (!have_schema)
    throw RecordFormatError("empty corpus: no schema line", "?", "?", 0);
  return corpus;
}

inline Corpus parse_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path);
  return parse_corpus_stream(in);
}

inline void serialize_corpus_stream(const Corpus& corpus, std::ostream& out) {
  out << schema_to_json(corpus.schema).dump() << "\n";
  for (const SentenceRecord& rec : corpus.sentences)
    out << sentence_to_json(rec).dump() << "\n";
}

inline void serialize_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  serialize_corpus_stream(corpus, out);
}

// ---------------------------------------------------------------------------
// Subword projection: pieces inherit the head and children of their word.
// ---------------------------------------------------------------------------

using PieceRange = std::pair<std::size_t, std::size_t>;  // [begin, end)

// Returns per-piece neighbor sets: every piece of word w is a neighbor of
// every piece of w's head word and of w's children words.
inline std::vector<std::vector<int>> project_subwords(
    const std::vector<int>& dep_heads,
    const std::vector<PieceRange>& word_to_pieces) {
  const std::size_t n_words = dep_heads.size();
  if (word_to_pieces.size() != n_words)
    throw ValueError("project_subwords: " +
                     std::to_string(word_to_pieces.size()) +
                     " piece ranges for " + std::to_string(n_words) +
                     " words");
  std::size_t expect = 0;
  for (std::size_t w = 0; w < n_words; ++w) {
    const auto [b, e] = word_to_pieces[w];
    if (b != expect || e <= b)
      throw ValueError(
          "project_subwords: piece ranges must partition [0, T) in order; "
          "word " +
          std::to_string(w) + " has [" + std::to_string(b) + "," +
          std::to_string(e) + ") after " + std::to_string(expect));
    expect = e;
  }
  const std::size_t n_pieces = expect;
  std::vector<std::vector<int>> word_nbrs(n_words);
  for (std::size_t w = 0; w < n_words; ++w) {
    const int h = dep_heads[w];
    if (h >= 0) {
      word_nbrs[w].push_back(h);
      word_nbrs[static_cast<std::size_t>(h)].push_back(static_cast<int>(w));
    }
  }
  std::vector<std::vector<int>> out(n_pieces);
  for (std::size_t w = 0; w < n_words; ++w) {
    std::vector<int> pieces;
    for (int nw : word_nbrs[w]) {
      const auto [b, e] = word_to_pieces[static_cast<std::size_t>(nw)];
      for (std::size_t q = b; q < e; ++q) pieces.push_back(static_cast<int>(q));
    }
    std::sort(pieces.begin(), pieces.end());
    const auto [b, e] = word_to_pieces[w];
    for (std::size_t q = b; q < e; ++q) out[q] = pieces;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prediction lines (decoder output format)
// ---------------------------------------------------------------------------

struct PredArg {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string role;
  double score = 0.0;
  bool operator==(const PredArg&) const = default;
};

struct PredictionLine {
  std::string doc_id;
  std::string sent_id;
  std::size_t trigger_start = 0;
  std::size_t trigger_end = 0;
  std::string event_type;
  std::string trigger_source;  // "gold" | "predicted"
  std::vector<PredArg> arguments;
};

inline nlohmann::json prediction_to_json(const PredictionLine& p) {
  nlohmann::json args = nlohmann::json::array();
  for (const PredArg& a : p.arguments)
    args.push_back({{"start", a.start},
                    {"end", a.end},
                    {"role", a.role},
                    {"score", a.score}});
  return {{"doc_id", p.doc_id},
          {"sent_id", p.sent_id},
          {"trigger",
           {{"start", p.trigger_start},
            {"end", p.trigger_end},
            {"type", p.event_type},
            {"source", p.trigger_source}}},
          {"arguments", std::move(args)}};
}

inline PredictionLine prediction_from_json(const nlohmann::json& j,
                                           long line) {
  PredictionLine p;
  try {
    p.doc_id = j.at("doc_id").get<std::string>();
    p.sent_id = j.at("sent_id").get<std::string>();
    const auto& jt = j.at("trigger");
    p.trigger_start = jt.at("start").get<std::size_t>();
    p.trigger_end = jt.at("end").get<std::size_t>();
    p.event_type = jt.at("type").get<std::string>();
    p.trigger_source = jt.value("source", "gold");
    for (const auto& ja : j.at("arguments")) {
      PredArg a;
      a.start = ja.at("start").get<std::size_t>();
      a.end = ja.at("end").get<std::size_t>();
      a.role = ja.at("role").get<std::string>();
      a.score = ja.value("score", 0.0);
      p.arguments.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw RecordFormatError(std::string("bad prediction line: ") + e.what(),
                            j.value("doc_id", "?"), j.value("sent_id", "?"),
                            line);
  }
  return p;
}

inline std::vector<PredictionLine> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions: " + path);
  std::vector<PredictionLine> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw RecordFormatError(std::string("malformed JSON: ") + e.what(), "?",
                              "?", line_no);
    }
    out.push_back(prediction_from_json(j, line_no));
  }
  return out;
}

inline void write_predictions(const std::vector<PredictionLine>& preds,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const PredictionLine& p : preds)
    out << prediction_to_json(p).dump() << "\n";
}

}  // namespace argex
