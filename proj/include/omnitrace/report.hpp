#pragma once

// JSON forms of configs, attributions and evaluation scores. An attribution
// file (`*.attr.json`) holds one ExampleAttribution and reads back into an
// equal value.

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "omnitrace/curation.hpp"
#include "omnitrace/evaluation.hpp"
#include "omnitrace/types.hpp"

namespace omnitrace {

using json = nlohmann::json;

inline json to_json(const CurationConfig& cfg) {
  return json{{"gamma", cfg.gamma},
              {"alpha", cfg.alpha},
              {"p_min", cfg.p_min},
              {"run_min", cfg.run_min},
              {"coverage", cfg.coverage},
              {"pos_weights", cfg.pos_weights},
              {"default_pos_weight", cfg.default_pos_weight},
              {"switches",
               {{"use_pos", cfg.switches.use_pos},
                {"use_conf_weight", cfg.switches.use_conf_weight},
                {"use_conf", cfg.switches.use_conf},
                {"use_run", cfg.switches.use_run},
                {"use_p_min", cfg.switches.use_p_min}}}};
}

inline json to_json(const PRF& p) {
  return json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
              {"tp", p.tp}, {"fp", p.fp}, {"fn", p.fn}, {"both_empty", p.both_empty}};
}

inline json to_json(const CurationDiagnostics& d) {
  json sources = json::array();
  for (const auto& s : d.sources)
    sources.push_back({{"id", s.id}, {"p_mass", s.p_mass}, {"run_frac", s.run_frac}, {"score", s.score}});
  return json{{"total_vote", d.total_vote}, {"sources", std::move(sources)}};
}

inline json to_json(const SpanAttribution& a) {
  json tokens = json::array();
  for (const auto& t : a.tokens) {
    tokens.push_back({{"step", t.step},
                      {"source_id", t.has_source() ? json(t.source_id) : json(nullptr)},
                      {"confidence", t.confidence},
                      {"pos", t.pos_tag},
                      {"vote", t.vote}});
  }
  json j{{"index", a.chunk.index},
         {"char_range", {a.chunk.char_range.begin, a.chunk.char_range.end}},
         {"steps", a.chunk.token_steps},
         {"text", a.chunk.text},
         {"selected", a.selected},
         {"diagnostics", to_json(a.diagnostics)},
         {"tokens", std::move(tokens)}};
  if (!a.group_diagnostics.empty()) {
    json groups = json::object();
    for (const auto& [name, d] : a.group_diagnostics) groups[name] = to_json(d);
    j["groups"] = std::move(groups);
  }
  return j;
}

inline json to_json(const ExampleAttribution& ex) {
  json sources = json::array();
  for (const auto& s : ex.sources) {
    json j{{"id", s.id},
           {"modality", std::string(to_string(s.modality))},
           {"range", {s.token_range.begin, s.token_range.end}}};
    if (s.time) j["time"] = {s.time->start, s.time->end};
    if (s.text) j["text"] = *s.text;
    sources.push_back(std::move(j));
  }
  json chunks = json::array();
  for (const auto& c : ex.chunks) chunks.push_back(to_json(c));
  json j{{"example_id", ex.example_id},
         {"method", ex.method},
         {"config_hash", ex.config_hash},
         {"input_length", ex.input_length},
         {"generated_text", ex.generated_text},
         {"sources", std::move(sources)},
         {"chunks", std::move(chunks)}};
  if (ex.duration_s) j["duration_s"] = *ex.duration_s;
  if (ex.option_map) j["option_map"] = *ex.option_map;
  return j;
}

namespace detail {

inline CurationDiagnostics diagnostics_from_json(const json& j) {
  CurationDiagnostics d;
  d.total_vote = j.at("total_vote").get<double>();
  for (const auto& s : j.at("sources"))
    d.sources.push_back({s.at("id").get<SourceId>(), s.at("p_mass").get<double>(),
                         s.at("run_frac").get<double>(), s.at("score").get<double>()});
  return d;
}

inline SpanAttribution span_from_json(const json& j) {
  SpanAttribution a;
  a.chunk.index = j.at("index").get<std::size_t>();
  const auto& cr = j.at("char_range");
  a.chunk.char_range = {cr.at(0).get<std::size_t>(), cr.at(1).get<std::size_t>()};
  a.chunk.token_steps = j.at("steps").get<std::vector<std::size_t>>();
  a.chunk.text = j.at("text").get<std::string>();
  a.selected = j.at("selected").get<std::vector<SourceId>>();
  a.diagnostics = diagnostics_from_json(j.at("diagnostics"));
  for (const auto& t : j.at("tokens")) {
    TokenTraceResult r;
    r.step = t.at("step").get<std::size_t>();
    r.source_id = t.at("source_id").is_null() ? kNoSource : t.at("source_id").get<SourceId>();
    r.confidence = t.at("confidence").get<double>();
    r.pos_tag = t.at("pos").get<std::string>();
    r.vote = t.at("vote").get<double>();
    a.tokens.push_back(std::move(r));
  }
  if (auto g = j.find("groups"); g != j.end())
    for (auto it = g->begin(); it != g->end(); ++it)
      a.group_diagnostics.emplace_back(it.key(), diagnostics_from_json(it.value()));
  return a;
}

}  // namespace detail

inline ExampleAttribution attribution_from_json(const json& j) {
  try {
    ExampleAttribution ex;
    ex.example_id = j.at("example_id").get<std::string>();
    ex.method = j.at("method").get<std::string>();
    ex.config_hash = j.at("config_hash").get<std::string>();
    ex.input_length = j.at("input_length").get<std::size_t>();
    ex.generated_text = j.at("generated_text").get<std::string>();
    if (auto d = j.find("duration_s"); d != j.end()) ex.duration_s = d->get<double>();
    if (auto o = j.find("option_map"); o != j.end()) ex.option_map = o->get<std::map<std::string, SourceId>>();
    for (const auto& s : j.at("sources")) {
      SourceUnit u;
      u.id = s.at("id").get<SourceId>();
      auto m = modality_from_string(s.at("modality").get<std::string>());
      if (!m) throw validation_error("unknown modality in attribution file");
      u.modality = *m;
      u.token_range = {s.at("range").at(0).get<std::size_t>(), s.at("range").at(1).get<std::size_t>()};
      if (auto t = s.find("time"); t != s.end()) u.time = Interval{t->at(0).get<double>(), t->at(1).get<double>()};
      if (auto t = s.find("text"); t != s.end()) u.text = t->get<std::string>();
      ex.sources.push_back(std::move(u));
    }
    for (const auto& c : j.at("chunks")) ex.chunks.push_back(detail::span_from_json(c));
    return ex;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed attribution file: ") + e.what());
  }
}

inline void write_attribution(const ExampleAttribution& ex, std::ostream& out) {
  out << to_json(ex).dump(2) << '\n';
}

inline ExampleAttribution read_attribution(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("malformed attribution file: ") + e.what());
  }
  return attribution_from_json(j);
}

inline ExampleAttribution load_attribution(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open attribution file " + path);
  return read_attribution(in);
}

}  // namespace omnitrace
