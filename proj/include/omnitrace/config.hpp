#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "omnitrace/curation.hpp"
#include "omnitrace/error.hpp"
#include "omnitrace/synth.hpp"

namespace omnitrace {

/// A value in a config file: boolean, integer, float, string or array.
struct ConfigValue {
  std::variant<bool, std::int64_t, double, std::string, std::vector<ConfigValue>> data;

  bool is_number() const {
    return std::holds_alternative<std::int64_t>(data) || std::holds_alternative<double>(data);
  }
  bool operator==(const ConfigValue&) const = default;
};

using ConfigTable = std::map<std::string, ConfigValue>;

/// Parsed config document: section name to key/value table. Keys before the
/// first header live in section "".
struct ConfigDocument {
  std::map<std::string, ConfigTable> sections;

  const ConfigTable* section(const std::string& name) const {
    auto it = sections.find(name);
    return it == sections.end() ? nullptr : &it->second;
  }
};

namespace detail {

class ConfigParser {
 public:
  ConfigParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  ConfigValue value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return {string()};
    if (c == '[') return array();
    if (s_.compare(pos_, 4, "true") == 0 && boundary(pos_ + 4)) {
      pos_ += 4;
      return {true};
    }
    if (s_.compare(pos_, 5, "false") == 0 && boundary(pos_ + 5)) {
      pos_ += 5;
      return {false};
    }
    return number();
  }

  void finish() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("trailing characters after value");
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

 private:
  bool boundary(std::size_t p) const {
    return p >= s_.size() || !(std::isalnum(static_cast<unsigned char>(s_[p])) || s_[p] == '_');
  }

  void skip_ws(bool newlines = false) {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
        ++pos_;
      } else if (newlines && c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\n') fail("newline inside string");
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  ConfigValue array() {
    ++pos_;
    std::vector<ConfigValue> items;
    skip_ws(true);
    while (pos_ < s_.size() && s_[pos_] != ']') {
      items.push_back(value());
      skip_ws(true);
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        skip_ws(true);
      } else if (pos_ < s_.size() && s_[pos_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    if (pos_ >= s_.size()) fail("unterminated array");
    ++pos_;
    return {std::move(items)};
  }

  ConfigValue number() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                               s_[end] == '+' || s_[end] == '-' || s_[end] == '_'))
      ++end;
    std::string tok;
    for (std::size_t i = pos_; i < end; ++i)
      if (s_[i] != '_') tok.push_back(s_[i]);
    if (tok.empty()) fail("invalid value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "nan";
    try {
      std::size_t used = 0;
      ConfigValue v;
      if (is_float) {
        v.data = std::stod(tok, &used);
      } else {
        v.data = static_cast<std::int64_t>(std::stoll(tok, &used));
      }
      if (used != tok.size()) throw std::invalid_argument(tok);
      pos_ = end;
      return v;
    } catch (const std::exception&) {
      fail("invalid value '" + tok + "'");
    }
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

// Bracket depth of a line outside strings and comments.
inline int bracket_balance(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      break;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

}  // namespace detail

/// Parses the TOML subset used by config files: `[section]` headers,
/// `key = value` pairs, '#' comments, basic strings, integers, floats,
/// booleans and (possibly multi-line) arrays.
inline ConfigDocument parse_config(std::istream& in) {
  ConfigDocument doc;
  doc.sections[""];
  std::string current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t start_line = line_no;
    std::string text = detail::trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (text[0] == '[') {
      const auto close = text.find(']');
      if (close == std::string::npos) throw ParseError(line_no, "unterminated section header");
      const std::string rest = detail::trim(std::string_view(text).substr(close + 1));
      if (!rest.empty() && rest[0] != '#') throw ParseError(line_no, "trailing characters after section header");
      current = detail::trim(std::string_view(text).substr(1, close - 1));
      if (!detail::valid_key(current)) throw ParseError(line_no, "invalid section name '" + current + "'");
      if (doc.sections.count(current) && !doc.sections[current].empty())
        throw ParseError(line_no, "duplicate section [" + current + "]");
      doc.sections[current];
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    std::string key = detail::trim(std::string_view(text).substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (!detail::valid_key(key)) throw ParseError(line_no, "invalid key '" + key + "'");
    std::string value_text = text.substr(eq + 1);
    int depth = detail::bracket_balance(value_text);
    while (depth > 0 && std::getline(in, line)) {
      ++line_no;
      value_text += "\n" + line;
      depth += detail::bracket_balance(line);
    }
    detail::ConfigParser parser(value_text, start_line);
    ConfigValue v = parser.value();
    parser.finish();
    auto& table = doc.sections[current];
    if (!table.emplace(key, std::move(v)).second)
      throw ParseError(start_line, "duplicate key '" + key + "'");
  }
  return doc;
}

inline ConfigDocument parse_config(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

inline ConfigDocument load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
  try {
    return parse_config(in);
  } catch (const ParseError& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.message());
  }
}

namespace detail {

inline Error config_error(const std::string& where, const std::string& what) {
  return Error(ErrorCode::kConfig, where + ": " + what);
}

inline double as_double(const ConfigValue& v, const std::string& where) {
  if (auto* d = std::get_if<double>(&v.data)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v.data)) return static_cast<double>(*i);
  throw config_error(where, "expected a number");
}

inline std::int64_t as_int(const ConfigValue& v, const std::string& where) {
  if (auto* i = std::get_if<std::int64_t>(&v.data)) return *i;
  throw config_error(where, "expected an integer");
}

inline std::size_t as_count(const ConfigValue& v, const std::string& where) {
  const auto i = as_int(v, where);
  if (i < 0) throw config_error(where, "expected a non-negative integer");
  return static_cast<std::size_t>(i);
}

inline bool as_bool(const ConfigValue& v, const std::string& where) {
  if (auto* b = std::get_if<bool>(&v.data)) return *b;
  throw config_error(where, "expected true or false");
}

inline const std::string& as_string(const ConfigValue& v, const std::string& where) {
  if (auto* s = std::get_if<std::string>(&v.data)) return *s;
  throw config_error(where, "expected a string");
}

inline const std::vector<ConfigValue>& as_array(const ConfigValue& v, const std::string& where) {
  if (auto* a = std::get_if<std::vector<ConfigValue>>(&v.data)) return *a;
  throw config_error(where, "expected an array");
}

}  // namespace detail

/// Reads [curation] and [pos_weights]. Missing keys keep their defaults and
/// unknown keys are errors. A [pos_weights] section replaces the whole
/// default table; its `default` key sets the fallback weight.
inline CurationConfig curation_config_from(const ConfigDocument& doc) {
  using namespace detail;
  CurationConfig cfg;
  if (const auto* t = doc.section("curation")) {
    for (const auto& [key, v] : *t) {
      const std::string where = "curation." + key;
      if (key == "gamma") cfg.gamma = as_double(v, where);
      else if (key == "alpha") cfg.alpha = as_double(v, where);
      else if (key == "p_min") cfg.p_min = as_double(v, where);
      else if (key == "run_min") cfg.run_min = as_double(v, where);
      else if (key == "coverage") cfg.coverage = as_double(v, where);
      else if (key == "use_pos") cfg.switches.use_pos = as_bool(v, where);
      else if (key == "use_conf_weight") cfg.switches.use_conf_weight = as_bool(v, where);
      else if (key == "use_conf") cfg.switches.use_conf = as_bool(v, where);
      else if (key == "use_run") cfg.switches.use_run = as_bool(v, where);
      else if (key == "use_p_min") cfg.switches.use_p_min = as_bool(v, where);
      else throw config_error(where, "unknown key");
    }
  }
  if (const auto* t = doc.section("pos_weights")) {
    cfg.pos_weights.clear();
    for (const auto& [key, v] : *t) {
      const std::string where = "pos_weights." + key;
      if (key == "default") cfg.default_pos_weight = as_double(v, where);
      else cfg.pos_weights[key] = as_double(v, where);
    }
  }
  for (const auto& [name, table] : doc.sections)
    if (!name.empty() && name != "curation" && name != "pos_weights" && name != "synth")
      throw config_error("[" + name + "]", "unknown section");
  cfg.validate();
  return cfg;
}

inline CurationConfig load_curation_config(const std::string& path) {
  return curation_config_from(load_config(path));
}

/// Reads a synth spec from the [synth] section (or the top level when the
/// file has no such section).
inline SynthSpec synth_spec_from(const ConfigDocument& doc) {
  using namespace detail;
  SynthSpec spec;
  const ConfigTable* t = doc.section("synth");
  if (!t) t = doc.section("");
  if (!t) return spec;
  for (const auto& [key, v] : *t) {
    const std::string where = "synth." + key;
    if (key == "example_id") spec.example_id = as_string(v, where);
    else if (key == "n_sources") spec.n_sources = as_count(v, where);
    else if (key == "tokens_per_source") spec.tokens_per_source = as_count(v, where);
    else if (key == "chunks") spec.chunks = as_count(v, where);
    else if (key == "steps_per_chunk") spec.steps_per_chunk = as_count(v, where);
    else if (key == "seconds_per_token") spec.seconds_per_token = as_double(v, where);
    else if (key == "noise") spec.noise = as_double(v, where);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(as_int(v, where));
    else if (key == "sources_per_chunk") spec.sources_per_chunk = as_count(v, where);
    else if (key == "placement_mean") spec.placement_mean = as_double(v, where);
    else if (key == "distractor_rate") spec.distractor_rate = as_double(v, where);
    else if (key == "option_count") spec.option_count = as_count(v, where);
    else if (key == "layers") spec.layers = as_count(v, where);
    else if (key == "heads") spec.heads = as_count(v, where);
    else if (key == "sparse") spec.sparse = as_bool(v, where);
    else if (key == "channel") spec.channel = as_string(v, where);
    else if (key == "modalities") {
      spec.modalities.clear();
      for (const auto& item : as_array(v, where)) {
        auto m = modality_from_string(as_string(item, where));
        if (!m) throw config_error(where, "unknown modality '" + as_string(item, where) + "'");
        spec.modalities.push_back(*m);
      }
    } else if (key == "placement") {
      const auto& s = as_string(v, where);
      if (s == "uniform") spec.placement = Placement::kUniform;
      else if (s == "skewed") spec.placement = Placement::kSkewed;
      else throw config_error(where, "expected \"uniform\" or \"skewed\"");
    } else if (key == "gold") {
      const auto& s = as_string(v, where);
      if (s == "ids") spec.gold_kind = GoldKind::kIds;
      else if (s == "spans") spec.gold_kind = GoldKind::kSpans;
      else throw config_error(where, "expected \"ids\" or \"spans\"");
    } else if (key == "planted_option") {
      const auto& s = as_string(v, where);
      if (s.size() != 1) throw config_error(where, "expected a single option letter");
      spec.planted_option = s[0];
    } else if (key == "planted") {
      std::vector<std::vector<SourceId>> planted;
      for (const auto& set : as_array(v, where)) {
        std::vector<SourceId> ids;
        for (const auto& id : as_array(set, where)) ids.push_back(static_cast<SourceId>(as_int(id, where)));
        planted.push_back(std::move(ids));
      }
      spec.planted = std::move(planted);
    } else {
      throw config_error(where, "unknown key");
    }
  }
  return spec;
}

inline SynthSpec load_synth_spec(const std::string& path) { return synth_spec_from(load_config(path)); }

}  // namespace omnitrace
