#pragma once

// Reading, validating and canonically writing `.trace.jsonl` and `.gold.json`
// files.
//
// Trace layout: line 1 is a header object
//   {version, example_id, space_joined, timeline:{tokens:[...], duration_s?},
//    sources:[...] | segment_hints:[...], option_map?, generated_text?}
// and every following line is one step
//   {t, token, pos?, channels:{name:{dense:[...]|sparse:{idx,val}, lh_shape?}}}.
// With lh_shape the dense/idx/val members hold one array per (layer, head) row.

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "omnitrace/chunking.hpp"
#include "omnitrace/sources.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

namespace detail {

using json = nlohmann::json;

class RecordReader {
 public:
  RecordReader(std::size_t line, std::vector<std::string>* warnings, std::set<std::string>* seen)
      : line_(line), warnings_(warnings), seen_(seen) {}

  [[noreturn]] void fail(const std::string& message) const { throw ParseError(line_, message); }

  const json& object(const json& j, const std::string& what) const {
    if (!j.is_object()) fail(what + ": expected object");
    return j;
  }

  const json* find(const json& obj, const char* key) const {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
  }

  const json& require(const json& obj, const char* key) const {
    const json* v = find(obj, key);
    if (!v) fail(std::string("missing field '") + key + "'");
    return *v;
  }

  double number(const json& v, const std::string& what) const {
    if (!v.is_number()) fail(what + ": expected number");
    return v.get<double>();
  }

  std::int64_t integer(const json& v, const std::string& what) const {
    if (!v.is_number_integer()) fail(what + ": expected integer");
    return v.get<std::int64_t>();
  }

  std::size_t index(const json& v, const std::string& what) const {
    auto i = integer(v, what);
    if (i < 0) fail(what + ": expected non-negative integer");
    return static_cast<std::size_t>(i);
  }

  std::string string(const json& v, const std::string& what) const {
    if (!v.is_string()) fail(what + ": expected string");
    return v.get<std::string>();
  }

  bool boolean(const json& v, const std::string& what) const {
    if (!v.is_boolean()) fail(what + ": expected boolean");
    return v.get<bool>();
  }

  const json& array(const json& v, const std::string& what) const {
    if (!v.is_array()) fail(what + ": expected array");
    return v;
  }

  Interval interval(const json& v, const std::string& what) const {
    if (!v.is_array() || v.size() != 2) fail(what + ": expected [start, end]");
    return {number(v[0], what), number(v[1], what)};
  }

  std::vector<double> numbers(const json& v, const std::string& what) const {
    array(v, what);
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) out.push_back(number(x, what));
    return out;
  }

  void check_known(const json& obj, std::initializer_list<const char*> known,
                   const std::string& scope) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (ok) continue;
      const std::string key = scope.empty() ? it.key() : scope + "." + it.key();
      if (warnings_ && seen_->insert(key).second)
        warnings_->push_back("line " + std::to_string(line_) + ": unknown field '" + key +
                             "' ignored");
    }
  }

  Modality modality(const json& v, const std::string& what) const {
    auto m = modality_from_string(string(v, what));
    if (!m) fail(what + ": unknown modality '" + v.get<std::string>() + "'");
    return *m;
  }

 private:
  std::size_t line_;
  std::vector<std::string>* warnings_;
  std::set<std::string>* seen_;
};

inline json parse_line(const std::string& text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed record: ") + e.what());
  }
}

inline void validate_timeline(const TokenTimeline& timeline) {
  if (timeline.duration_s && (!std::isfinite(*timeline.duration_s) || *timeline.duration_s < 0.0))
    throw validation_error("timeline duration_s must be finite and non-negative");
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const auto& tok = timeline.tokens[i];
    if (tok.index != i)
      throw validation_error("token indices must be gap-free: expected " + std::to_string(i) +
                             ", got " + std::to_string(tok.index));
    if (!tok.time) continue;
    const auto& t = *tok.time;
    if (!std::isfinite(t.start) || !std::isfinite(t.end) || t.start < 0.0 || t.end < t.start)
      throw validation_error("token " + std::to_string(i) + ": invalid time interval");
    if (timeline.duration_s && t.end > *timeline.duration_s)
      throw validation_error("token " + std::to_string(i) + ": time exceeds duration_s");
  }
}

inline void validate_sources(const std::vector<SourceUnit>& sources, const TokenTimeline& timeline) {
  const std::size_t n = timeline.size();
  std::set<SourceId> ids;
  for (const auto& s : sources) {
    const std::string where = "source " + std::to_string(s.id);
    if (s.id < 0) throw validation_error(where + ": id must be non-negative");
    if (!ids.insert(s.id).second) throw validation_error("duplicate source id " + std::to_string(s.id));
    if (s.token_range.empty()) throw validation_error(where + ": empty token range");
    if (s.token_range.end > n) throw validation_error(where + ": token range outside timeline");
    require_time(s);
    if (s.time) {
      const auto& t = *s.time;
      if (!std::isfinite(t.start) || !std::isfinite(t.end) || t.start < 0.0 || t.end < t.start)
        throw validation_error(where + ": invalid time interval");
      if (timeline.duration_s && t.end > *timeline.duration_s)
        throw validation_error(where + ": time exceeds duration_s");
    }
    if (s.embedding)
      for (double v : *s.embedding)
        if (!std::isfinite(v)) throw validation_error(where + ": non-finite embedding value");
  }
  std::vector<const SourceUnit*> order;
  for (const auto& s : sources) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const SourceUnit* a, const SourceUnit* b) {
    return a->token_range.begin < b->token_range.begin;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (order[k]->token_range.begin < order[k - 1]->token_range.end)
      throw validation_error("sources overlap (ids " + std::to_string(order[k - 1]->id) + " and " +
                             std::to_string(order[k]->id) + ")");
  }
}

inline void validate_step(const StepRecord& step, std::size_t expected_step, std::size_t n) {
  const std::string where = "step " + std::to_string(expected_step);
  if (step.step != expected_step)
    throw validation_error("steps must be consecutive from 1: expected " +
                           std::to_string(expected_step) + ", got " + std::to_string(step.step));
  const std::size_t ctx = n + expected_step - 1;
  for (const auto& [name, channel] : step.channels) {
    const std::string cw = where + ", channel '" + name + "'";
    const std::size_t expected_rows = channel.layer_head_shape ? channel.layer_head_shape->rows() : 1;
    if (channel.layer_head_shape &&
        (channel.layer_head_shape->layers == 0 || channel.layer_head_shape->heads == 0))
      throw validation_error(cw + ": lh_shape dimensions must be positive");
    if (channel.rows.size() != expected_rows)
      throw validation_error(cw + ": expected " + std::to_string(expected_rows) + " rows, got " +
                             std::to_string(channel.rows.size()));
    const bool allow_negative = is_gradient_channel(name);
    for (const auto& row : channel.rows) {
      if (row.sparse != channel.rows.front().sparse)
        throw validation_error(cw + ": rows mix dense and sparse storage");
      if (row.sparse) {
        if (row.indices.size() != row.values.size())
          throw validation_error(cw + ": sparse idx/val length mismatch");
        for (std::size_t k = 0; k < row.indices.size(); ++k) {
          if (row.indices[k] >= ctx)
            throw validation_error(cw + ": sparse index outside context length " + std::to_string(ctx));
          if (k > 0 && row.indices[k] <= row.indices[k - 1])
            throw validation_error(cw + ": sparse indices must be strictly increasing");
        }
      } else if (row.dense.size() != ctx) {
        throw validation_error(cw + ": dense length " + std::to_string(row.dense.size()) +
                               " does not match context length " + std::to_string(ctx));
      }
      const auto& vals = row.sparse ? row.values : row.dense;
      for (double v : vals) {
        if (!std::isfinite(v)) throw validation_error(cw + ": non-finite score");
        if (v < 0.0 && !allow_negative)
          throw validation_error(cw + ": negative score in non-gradient channel");
      }
    }
  }
}

inline void validate_option_map(const Trace& trace) {
  if (!trace.option_map) return;
  for (const auto& [label, id] : *trace.option_map) {
    if (label.empty()) throw validation_error("option_map: empty option label");
    if (!trace.find_source(id))
      throw validation_error("option_map: option " + label + " references unknown source id " +
                             std::to_string(id));
  }
}

inline ScoreRow parse_row(const RecordReader& r, const json& dense, const json* idx, const json* val,
                          const std::string& what) {
  ScoreRow row;
  if (idx) {
    row.sparse = true;
    r.array(*idx, what + ".idx");
    row.indices.reserve(idx->size());
    for (const auto& x : *idx) {
      auto i = r.index(x, what + ".idx");
      if (i > 0xFFFFFFFFull) r.fail(what + ".idx: index too large");
      row.indices.push_back(static_cast<std::uint32_t>(i));
    }
    row.values = r.numbers(*val, what + ".val");
  } else {
    row.dense = r.numbers(dense, what + ".dense");
  }
  return row;
}

inline ScoreVector parse_channel(const RecordReader& r, const json& j, const std::string& name) {
  const std::string what = "channel '" + name + "'";
  r.object(j, what);
  r.check_known(j, {"dense", "sparse", "lh_shape"}, "channels.*");
  ScoreVector out;
  if (const json* shape = r.find(j, "lh_shape")) {
    if (!shape->is_array() || shape->size() != 2) r.fail(what + ": lh_shape must be [L, H]");
    out.layer_head_shape = LayerHeadShape{r.index((*shape)[0], what + ".lh_shape"),
                                          r.index((*shape)[1], what + ".lh_shape")};
  }
  const json* dense = r.find(j, "dense");
  const json* sparse = r.find(j, "sparse");
  if ((dense == nullptr) == (sparse == nullptr)) r.fail(what + ": exactly one of dense/sparse required");

  const bool nested = out.layer_head_shape.has_value();
  if (dense) {
    r.array(*dense, what + ".dense");
    if (nested) {
      for (const auto& row : *dense) out.rows.push_back(parse_row(r, r.array(row, what), nullptr, nullptr, what));
    } else {
      out.rows.push_back(parse_row(r, *dense, nullptr, nullptr, what));
    }
  } else {
    r.object(*sparse, what + ".sparse");
    const json& idx = r.array(r.require(*sparse, "idx"), what + ".idx");
    const json& val = r.array(r.require(*sparse, "val"), what + ".val");
    if (nested) {
      if (idx.size() != val.size()) r.fail(what + ": idx/val row counts differ");
      for (std::size_t k = 0; k < idx.size(); ++k)
        out.rows.push_back(parse_row(r, idx[k], &r.array(idx[k], what), &r.array(val[k], what), what));
    } else {
      out.rows.push_back(parse_row(r, idx, &idx, &val, what));
    }
  }
  return out;
}

inline StepRecord parse_step(const RecordReader& r, const json& j) {
  r.object(j, "step record");
  r.check_known(j, {"t", "token", "pos", "channels"}, "");
  StepRecord step;
  step.step = r.index(r.require(j, "t"), "t");
  step.token_text = r.string(r.require(j, "token"), "token");
  if (const json* pos = r.find(j, "pos")) step.pos_tag = r.string(*pos, "pos");
  if (const json* ch = r.find(j, "channels")) {
    r.object(*ch, "channels");
    for (auto it = ch->begin(); it != ch->end(); ++it)
      step.channels.emplace(it.key(), parse_channel(r, it.value(), it.key()));
  }
  return step;
}

inline void parse_header(const RecordReader& r, const json& h, Trace& trace,
                         const Segmenter& segmenter) {
  r.object(h, "header");
  r.check_known(h, {"version", "example_id", "space_joined", "timeline", "sources", "segment_hints",
                    "option_map", "generated_text"},
                "");
  const json* version = r.find(h, "version");
  if (!version) r.fail("header: missing field 'version'");
  const auto v = r.integer(*version, "version");
  if (v != kSchemaVersion)
    throw Error(ErrorCode::kUnsupportedVersion, "unsupported schema version " + std::to_string(v) +
                                                    " (supported: " + std::to_string(kSchemaVersion) + ")");
  trace.schema_version = static_cast<int>(v);
  if (const json* id = r.find(h, "example_id")) trace.example_id = r.string(*id, "example_id");
  if (const json* sj = r.find(h, "space_joined")) trace.space_joined = r.boolean(*sj, "space_joined");

  const json& tl = r.object(r.require(h, "timeline"), "timeline");
  r.check_known(tl, {"tokens", "duration_s"}, "timeline");
  if (const json* d = r.find(tl, "duration_s")) trace.timeline.duration_s = r.number(*d, "duration_s");
  const json& tokens = r.array(r.require(tl, "tokens"), "timeline.tokens");
  trace.timeline.tokens.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const json& t = r.object(tokens[i], "timeline token");
    r.check_known(t, {"index", "modality", "text", "time"}, "timeline.tokens");
    InputToken tok;
    tok.index = i;
    if (const json* idx = r.find(t, "index")) tok.index = r.index(*idx, "index");
    tok.modality = r.modality(r.require(t, "modality"), "modality");
    if (const json* s = r.find(t, "text")) tok.text = r.string(*s, "text");
    if (const json* tm = r.find(t, "time")) tok.time = r.interval(*tm, "time");
    trace.timeline.tokens.push_back(std::move(tok));
  }
  validate_timeline(trace.timeline);

  if (const json* srcs = r.find(h, "sources")) {
    r.array(*srcs, "sources");
    for (const auto& s : *srcs) {
      r.object(s, "source");
      r.check_known(s, {"id", "modality", "range", "time", "text", "embedding"}, "sources");
      SourceUnit unit;
      const auto id = r.integer(r.require(s, "id"), "source id");
      if (id < 0 || id > std::numeric_limits<SourceId>::max())
        throw validation_error("source " + std::to_string(id) + ": id must be non-negative");
      unit.id = static_cast<SourceId>(id);
      unit.modality = r.modality(r.require(s, "modality"), "source modality");
      const json& range = r.require(s, "range");
      if (!range.is_array() || range.size() != 2) r.fail("source range: expected [begin, end]");
      unit.token_range = {r.index(range[0], "source range"), r.index(range[1], "source range")};
      if (const json* tm = r.find(s, "time")) unit.time = r.interval(*tm, "source time");
      if (const json* tx = r.find(s, "text")) unit.text = r.string(*tx, "source text");
      if (const json* e = r.find(s, "embedding")) unit.embedding = r.numbers(*e, "source embedding");
      trace.sources.push_back(std::move(unit));
    }
  } else if (const json* hints = r.find(h, "segment_hints")) {
    r.array(*hints, "segment_hints");
    std::vector<SegmentHint> parsed;
    for (const auto& hj : *hints) {
      r.object(hj, "segment hint");
      r.check_known(hj, {"range", "time", "modality", "text"}, "segment_hints");
      SegmentHint hint;
      if (const json* range = r.find(hj, "range")) {
        if (!range->is_array() || range->size() != 2) r.fail("hint range: expected [begin, end]");
        hint.token_range = TokenRange{r.index((*range)[0], "hint range"), r.index((*range)[1], "hint range")};
      }
      if (const json* tm = r.find(hj, "time")) hint.time = r.interval(*tm, "hint time");
      if (const json* m = r.find(hj, "modality")) hint.modality = r.modality(*m, "hint modality");
      if (const json* tx = r.find(hj, "text")) hint.text = r.string(*tx, "hint text");
      parsed.push_back(std::move(hint));
    }
    trace.sources = build_sources(trace.timeline, parsed, segmenter);
  } else {
    trace.sources = build_sources(trace.timeline, {}, segmenter);
  }
  validate_sources(trace.sources, trace.timeline);

  if (const json* om = r.find(h, "option_map")) {
    r.object(*om, "option_map");
    std::map<std::string, SourceId> options;
    for (auto it = om->begin(); it != om->end(); ++it)
      options[it.key()] = static_cast<SourceId>(r.integer(it.value(), "option_map value"));
    trace.option_map = std::move(options);
  }
  validate_option_map(trace);
}

inline json interval_json(const Interval& t) { return json::array({t.start, t.end}); }

inline json row_values_json(const ScoreRow& row) {
  return row.sparse ? json(row.values) : json(row.dense);
}

}  // namespace detail

/// Checks every trace invariant; throws a validation Error naming the first
/// violated one.
inline void validate_trace(const Trace& trace) {
  if (trace.schema_version != kSchemaVersion)
    throw Error(ErrorCode::kUnsupportedVersion,
                "unsupported schema version " + std::to_string(trace.schema_version));
  detail::validate_timeline(trace.timeline);
  detail::validate_sources(trace.sources, trace.timeline);
  detail::validate_option_map(trace);
  for (std::size_t k = 0; k < trace.steps.size(); ++k)
    detail::validate_step(trace.steps[k], k + 1, trace.timeline.size());
  if (detokenize(trace.steps, trace.space_joined) != trace.generated_text)
    throw validation_error("generated_text does not match the concatenated step tokens");
}

/// Streams a `.trace.jsonl` record stream into a validated Trace. Unknown
/// fields are skipped and reported once each through `warnings`.
inline Trace parse_trace(std::istream& in, std::vector<std::string>* warnings = nullptr,
                         const Segmenter& segmenter = default_segmenter()) {
  Trace trace;
  std::set<std::string> seen;
  std::optional<std::string> declared_text;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    detail::RecordReader reader(line_no, warnings, &seen);
    const auto record = detail::parse_line(line, line_no);
    if (!have_header) {
      detail::parse_header(reader, record, trace, segmenter);
      if (const auto* gt = reader.find(record, "generated_text"))
        declared_text = reader.string(*gt, "generated_text");
      have_header = true;
      continue;
    }
    StepRecord step = detail::parse_step(reader, record);
    try {
      detail::validate_step(step, trace.steps.size() + 1, trace.timeline.size());
    } catch (const Error& e) {
      throw Error(e.code(), e.message() + " (line " + std::to_string(line_no) + ")");
    }
    trace.steps.push_back(std::move(step));
  }
  if (!have_header) throw ParseError(line_no + 1, "missing header record");
  trace.generated_text = detokenize(trace.steps, trace.space_joined);
  if (declared_text && *declared_text != trace.generated_text)
    throw validation_error("generated_text does not match the concatenated step tokens");
  return trace;
}

inline Trace parse_trace(std::string_view text, std::vector<std::string>* warnings = nullptr,
                         const Segmenter& segmenter = default_segmenter()) {
  std::istringstream in{std::string(text)};
  return parse_trace(in, warnings, segmenter);
}

inline Trace load_trace(const std::string& path, std::vector<std::string>* warnings = nullptr,
                        const Segmenter& segmenter = default_segmenter()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open trace " + path);
  return parse_trace(in, warnings, segmenter);
}

/// Canonical serialization: sorted keys, compact records, one per line.
inline void serialize_trace(const Trace& trace, std::ostream& out) {
  using detail::json;
  json header;
  header["version"] = trace.schema_version;
  header["example_id"] = trace.example_id;
  header["space_joined"] = trace.space_joined;
  json tokens = json::array();
  for (const auto& tok : trace.timeline.tokens) {
    json t;
    t["index"] = tok.index;
    t["modality"] = std::string(to_string(tok.modality));
    if (tok.text) t["text"] = *tok.text;
    if (tok.time) t["time"] = detail::interval_json(*tok.time);
    tokens.push_back(std::move(t));
  }
  json timeline;
  timeline["tokens"] = std::move(tokens);
  if (trace.timeline.duration_s) timeline["duration_s"] = *trace.timeline.duration_s;
  header["timeline"] = std::move(timeline);
  json sources = json::array();
  for (const auto& s : trace.sources) {
    json j;
    j["id"] = s.id;
    j["modality"] = std::string(to_string(s.modality));
    j["range"] = json::array({s.token_range.begin, s.token_range.end});
    if (s.time) j["time"] = detail::interval_json(*s.time);
    if (s.text) j["text"] = *s.text;
    if (s.embedding) j["embedding"] = *s.embedding;
    sources.push_back(std::move(j));
  }
  header["sources"] = std::move(sources);
  if (trace.option_map) header["option_map"] = *trace.option_map;
  out << header.dump() << '\n';

  for (const auto& step : trace.steps) {
    json j;
    j["t"] = step.step;
    j["token"] = step.token_text;
    if (step.pos_tag) j["pos"] = *step.pos_tag;
    json channels = json::object();
    for (const auto& [name, ch] : step.channels) {
      json c;
      const bool sparse = !ch.rows.empty() && ch.rows.front().sparse;
      if (ch.layer_head_shape) {
        c["lh_shape"] = json::array({ch.layer_head_shape->layers, ch.layer_head_shape->heads});
        json idx = json::array();
        json val = json::array();
        for (const auto& row : ch.rows) {
          if (sparse) idx.push_back(row.indices);
          val.push_back(detail::row_values_json(row));
        }
        if (sparse) {
          c["sparse"] = {{"idx", std::move(idx)}, {"val", std::move(val)}};
        } else {
          c["dense"] = std::move(val);
        }
      } else if (!ch.rows.empty()) {
        const auto& row = ch.rows.front();
        if (sparse) {
          c["sparse"] = {{"idx", row.indices}, {"val", row.values}};
        } else {
          c["dense"] = row.dense;
        }
      }
      channels[name] = std::move(c);
    }
    j["channels"] = std::move(channels);
    out << j.dump() << '\n';
  }
}

inline std::string serialize_trace(const Trace& trace) {
  std::ostringstream out;
  serialize_trace(trace, out);
  return out.str();
}

/// Structural parse of a `.gold.json` file. Overlapping time spans are merged.
inline GoldLabels parse_gold(std::istream& in) {
  using detail::json;
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kGold, std::string("malformed gold file: ") + e.what());
  }
  auto fail = [](const std::string& m) { return Error(ErrorCode::kGold, m); };
  if (!j.is_object()) throw fail("gold file must be an object");
  GoldLabels gold;
  if (auto it = j.find("example_id"); it != j.end() && it->is_string()) gold.example_id = it->get<std::string>();
  auto chunks = j.find("chunks");
  if (chunks == j.end() || !chunks->is_array()) throw fail("gold file needs a 'chunks' array");
  for (const auto& c : *chunks) {
    if (!c.is_object()) throw fail("gold chunk must be an object");
    GoldChunk chunk;
    if (auto ids = c.find("source_ids"); ids != c.end()) {
      if (!ids->is_array()) throw fail("source_ids must be an array");
      for (const auto& id : *ids) {
        if (!id.is_number_integer()) throw fail("source id must be an integer");
        chunk.source_ids.push_back(id.get<SourceId>());
      }
      std::sort(chunk.source_ids.begin(), chunk.source_ids.end());
      chunk.source_ids.erase(std::unique(chunk.source_ids.begin(), chunk.source_ids.end()),
                             chunk.source_ids.end());
    }
    if (auto spans = c.find("spans"); spans != c.end()) {
      if (!spans->is_array()) throw fail("spans must be an array");
      chunk.timed = true;
      for (const auto& s : *spans) {
        if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
          throw fail("span must be [start, end]");
        Interval iv{s[0].get<double>(), s[1].get<double>()};
        if (!std::isfinite(iv.start) || !std::isfinite(iv.end) || iv.start < 0.0)
          throw fail("span times must be finite and non-negative");
        if (iv.end < iv.start) throw fail("inverted interval");
        chunk.spans.push_back(iv);
      }
      chunk.spans = merge_intervals(std::move(chunk.spans));
    }
    gold.chunks.push_back(std::move(chunk));
  }
  return gold;
}

/// Parses gold labels and checks them against a trace: matching example id,
/// one record per chunk of the default segmentation, known source ids.
inline GoldLabels validate_gold(std::istream& in, const Trace& trace,
                                const Segmenter& segmenter = default_segmenter()) {
  GoldLabels gold = parse_gold(in);
  if (!gold.example_id.empty() && gold.example_id != trace.example_id)
    throw Error(ErrorCode::kGold, "example id mismatch: gold '" + gold.example_id + "' vs trace '" +
                                      trace.example_id + "'");
  const auto chunks = segment_output(trace, segmenter);
  if (gold.chunk_count() != chunks.size())
    throw Error(ErrorCode::kGold, "chunk count mismatch: gold has " + std::to_string(gold.chunk_count()) +
                                      ", generation has " + std::to_string(chunks.size()));
  for (const auto& c : gold.chunks)
    for (SourceId id : c.source_ids)
      if (!trace.find_source(id)) throw Error(ErrorCode::kGold, "unknown source id " + std::to_string(id));
  return gold;
}

inline GoldLabels load_gold(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open gold file " + path);
  return parse_gold(in);
}

inline void serialize_gold(const GoldLabels& gold, std::ostream& out) {
  using detail::json;
  json j;
  j["example_id"] = gold.example_id;
  json chunks = json::array();
  for (const auto& c : gold.chunks) {
    json cj = json::object();
    if (c.timed) {
      json spans = json::array();
      for (const auto& s : c.spans) spans.push_back(detail::interval_json(s));
      cj["spans"] = std::move(spans);
    } else {
      cj["source_ids"] = c.source_ids;
    }
    chunks.push_back(std::move(cj));
  }
  j["chunks"] = std::move(chunks);
  out << j.dump() << '\n';
}

}  // namespace omnitrace
