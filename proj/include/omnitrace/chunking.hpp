#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "omnitrace/types.hpp"

namespace omnitrace {

/// A sentence-level span C_k of the generated text and its token steps T_k.
struct Chunk {
  std::size_t index = 0;
  CharRange char_range;
  std::vector<std::size_t> token_steps;  // 1-based step indices, ascending
  std::string text;

  bool operator==(const Chunk&) const = default;
};

namespace detail {

inline bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_terminal(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

inline bool is_closer(char c) noexcept {
  return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}';
}

// 。 ！ ？ in UTF-8.
inline std::size_t fullwidth_terminal_len(std::string_view text, std::size_t i) noexcept {
  if (i + 3 > text.size()) return 0;
  const auto b0 = static_cast<unsigned char>(text[i]);
  const auto b1 = static_cast<unsigned char>(text[i + 1]);
  const auto b2 = static_cast<unsigned char>(text[i + 2]);
  if (b0 == 0xE3 && b1 == 0x80 && b2 == 0x82) return 3;
  if (b0 == 0xEF && b1 == 0xBC && (b2 == 0x81 || b2 == 0x9F)) return 3;
  return 0;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool all_space(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(), is_space);
}

}  // namespace detail

/// Rule-based sentence splitter with an abbreviation guard.
///
/// Boundaries fall right after a run of terminal punctuation (plus closing
/// quotes/brackets) that is followed by whitespace or end of text, and right
/// before every newline. Whitespace therefore always leads the following
/// chunk. Full-width terminators split unconditionally.
class Segmenter {
 public:
  Segmenter() : Segmenter(default_abbreviations()) {}

  explicit Segmenter(std::span<const std::string> abbreviations) {
    for (const auto& a : abbreviations) add_abbreviation(a);
  }

  explicit Segmenter(std::initializer_list<std::string> abbreviations) {
    for (const auto& a : abbreviations) add_abbreviation(a);
  }

  /// One entry per line; blank lines and lines starting with '#' are skipped.
  static Segmenter from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open abbreviation list " + path);
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
      auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos || line[b] == '#') continue;
      auto e = line.find_last_not_of(" \t\r");
      entries.push_back(line.substr(b, e - b + 1));
    }
    return Segmenter(entries);
  }

  static std::vector<std::string> default_abbreviations() {
    return {"e.g.", "i.e.", "etc.", "vs.", "cf.", "al.", "approx.", "mr.", "mrs.",
            "ms.",  "dr.",  "prof.", "st.", "jr.", "sr.", "fig.", "figs.", "eq.",
            "no.",  "vol.", "p.",   "pp.", "ca.", "inc.", "ltd.", "co.",  "u.s."};
  }

  bool is_abbreviation(std::string_view word) const {
    return abbreviations_.count(detail::to_lower(word)) > 0;
  }

  /// Lossless partition of `text` into non-empty chunk ranges.
  std::vector<CharRange> split(std::string_view text) const {
    std::vector<CharRange> out;
    if (text.empty()) return out;

    std::vector<std::size_t> cuts;
    std::size_t i = 0;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '\n') {
        cuts.push_back(i);
        ++i;
        continue;
      }
      if (detail::is_ascii_terminal(c)) {
        std::size_t j = i;
        while (j < text.size() && detail::is_ascii_terminal(text[j])) ++j;
        const std::size_t run = j - i;
        while (j < text.size() && detail::is_closer(text[j])) ++j;
        if (j == text.size() || detail::is_space(text[j])) {
          if (!(c == '.' && run == 1 && guarded(text, i))) cuts.push_back(j);
        }
        i = j;
        continue;
      }
      if (auto len = detail::fullwidth_terminal_len(text, i)) {
        std::size_t j = i + len;
        while (auto more = detail::fullwidth_terminal_len(text, j)) j += more;
        while (j < text.size() && detail::is_closer(text[j])) ++j;
        cuts.push_back(j);
        i = j;
        continue;
      }
      ++i;
    }

    std::size_t begin = 0;
    for (auto cut : cuts) {
      if (cut > begin && cut < text.size()) {
        out.push_back({begin, cut});
        begin = cut;
      }
    }
    out.push_back({begin, text.size()});

    // Whitespace-only pieces are folded into the next chunk (or the previous
    // one at the end of the text).
    std::vector<CharRange> merged;
    CharRange pending{0, 0};
    bool has_pending = false;
    for (const auto& r : out) {
      std::string_view piece = text.substr(r.begin, r.size());
      if (detail::all_space(piece)) {
        if (!has_pending) pending.begin = r.begin;
        pending.end = r.end;
        has_pending = true;
        continue;
      }
      CharRange cur = r;
      if (has_pending) {
        cur.begin = pending.begin;
        has_pending = false;
      }
      merged.push_back(cur);
    }
    if (has_pending) {
      if (merged.empty()) {
        merged.push_back(pending);
      } else {
        merged.back().end = pending.end;
      }
    }
    return merged;
  }

 private:
  void add_abbreviation(std::string_view a) { abbreviations_.insert(detail::to_lower(a)); }

  // A single '.' at `dot` ends a guarded word: a listed abbreviation or a
  // numeric list marker at the start of a line ("2. ").
  bool guarded(std::string_view text, std::size_t dot) const {
    std::size_t b = dot;
    while (b > 0 && !detail::is_space(text[b - 1])) --b;
    std::size_t w = b;
    while (w < dot && (text[w] == '(' || text[w] == '[' || text[w] == '"' || text[w] == '\'')) ++w;
    std::string_view word = text.substr(w, dot + 1 - w);
    if (word.size() > 1 && is_abbreviation(word)) return true;

    std::string_view stem = word.substr(0, word.size() - 1);
    if (!stem.empty() && std::all_of(stem.begin(), stem.end(), [](char ch) {
          return std::isdigit(static_cast<unsigned char>(ch)) != 0;
        })) {
      std::size_t k = b;
      while (k > 0 && (text[k - 1] == ' ' || text[k - 1] == '\t')) --k;
      return k == 0 || text[k - 1] == '\n';
    }
    return false;
  }

  std::unordered_set<std::string> abbreviations_;
};

inline const Segmenter& default_segmenter() {
  static const Segmenter instance;
  return instance;
}

/// Assigns each item span to the target range holding the majority of its
/// bytes; exact ties go to the earlier range. Empty spans go to the range
/// containing their offset (the last range at end of text). Both inputs must
/// be sorted; targets must partition the text. Returns target indices.
inline std::vector<std::size_t> assign_by_majority(std::span<const CharRange> items,
                                                   std::span<const CharRange> targets) {
  std::vector<std::size_t> out(items.size(), 0);
  if (targets.empty()) return out;
  std::size_t t = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& it = items[k];
    while (t + 1 < targets.size() && targets[t].end <= it.begin) ++t;
    if (it.size() == 0) {
      out[k] = t;
      continue;
    }
    std::size_t best = t;
    std::size_t best_overlap = 0;
    for (std::size_t u = t; u < targets.size() && targets[u].begin < it.end; ++u) {
      const std::size_t lo = std::max(targets[u].begin, it.begin);
      const std::size_t hi = std::min(targets[u].end, it.end);
      const std::size_t overlap = hi > lo ? hi - lo : 0;
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = u;
      }
    }
    out[k] = best;
  }
  return out;
}

/// Splits the generated text into chunks and maps every step to one chunk.
/// An empty generation yields no chunks.
inline std::vector<Chunk> segment_output(const Trace& trace,
                                         const Segmenter& segmenter = default_segmenter()) {
  std::vector<Chunk> chunks;
  const std::string& text = trace.generated_text;
  const auto ranges = segmenter.split(text);
  chunks.reserve(ranges.size());
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    chunks.push_back({k, ranges[k], {}, text.substr(ranges[k].begin, ranges[k].size())});
  }
  if (chunks.empty()) return chunks;

  const auto spans = step_char_ranges(trace.steps, trace.space_joined);
  const auto owner = assign_by_majority(spans, ranges);
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    chunks[owner[k]].token_steps.push_back(trace.steps[k].step);
  }
  return chunks;
}

namespace detail {

inline bool in_list(const std::string& w, std::initializer_list<const char*> words) {
  return std::find_if(words.begin(), words.end(), [&](const char* x) { return w == x; }) !=
         words.end();
}

inline constexpr std::initializer_list<const char*> kDeterminers = {
    "the", "a", "an", "this", "that", "these", "those", "some", "any", "each", "every", "no",
    "all", "both", "either", "neither", "my", "your", "his", "its", "our", "their", "another"};
inline constexpr std::initializer_list<const char*> kAdpositions = {
    "of", "in", "on", "at", "to", "for", "with", "by", "from", "about", "into", "onto",
    "over", "under", "between", "through", "during", "after", "before", "above", "below",
    "near", "without", "within", "across", "behind", "beside", "along", "around", "among",
    "upon", "toward", "towards", "against", "via", "per", "than"};
inline constexpr std::initializer_list<const char*> kPronouns = {
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "myself",
    "yourself", "himself", "herself", "itself", "ourselves", "themselves", "who", "whom",
    "whose", "which", "what", "someone", "something", "anyone", "anything", "everyone",
    "everything", "nothing", "mine", "yours", "hers", "ours", "theirs"};
inline constexpr std::initializer_list<const char*> kConjunctions = {
    "and", "or", "but", "nor", "so", "yet", "because", "although", "though", "while",
    "if", "unless", "whereas", "since", "as", "whether", "when", "where"};
inline constexpr std::initializer_list<const char*> kAuxiliaries = {
    "is", "am", "are", "was", "were", "be", "been", "being", "have", "has", "had", "do",
    "does", "did", "will", "would", "shall", "should", "can", "could", "may", "might",
    "must", "'s", "'re", "'ve", "'ll", "'d", "'m", "not", "n't"};
inline constexpr std::initializer_list<const char*> kAdjectives = {
    "red", "blue", "green", "yellow", "black", "white", "brown", "gray", "grey", "orange",
    "purple", "pink", "large", "small", "big", "little", "tall", "short", "long", "old",
    "new", "young", "good", "bad", "high", "low", "bright", "dark", "happy", "sad", "hot",
    "cold", "wooden", "empty", "full", "main", "several", "many", "few", "other", "same",
    "different", "first", "last", "important", "clear"};
inline constexpr std::initializer_list<const char*> kVerbStems = {
    "run", "walk", "play", "go", "say", "make", "take", "see", "look", "talk", "speak",
    "show", "use", "describe", "sit", "stand", "hold", "move", "eat", "drink", "jump",
    "swim", "read", "write", "sing", "dance", "ride", "drive", "open", "close", "point",
    "wear", "smile", "laugh", "cry", "fly", "carry", "watch", "listen", "work", "help",
    "ask", "answer", "call", "start", "stop", "turn", "try", "need", "want", "like",
    "love", "live", "discuss", "explain", "mention", "appear", "contain", "include",
    "cook", "clean", "wait", "sleep", "think", "feel", "stay", "pull", "push", "hit",
    "cut", "sell", "buy", "pay", "plan", "shop", "chat", "swing", "bring", "place",
    "display", "depict", "focus", "rest", "lie", "lay", "climb", "fill", "follow"};

inline bool is_verb_stem(const std::string& stem) {
  if (stem.empty()) return false;
  if (in_list(stem, kVerbStems)) return true;
  if (in_list(stem + "e", kVerbStems)) return true;
  // Doubled final consonant: running -> runn -> run.
  if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2] &&
      in_list(stem.substr(0, stem.size() - 1), kVerbStems)) {
    return true;
  }
  // carried -> carri -> carry.
  if (stem.back() == 'i' && in_list(stem.substr(0, stem.size() - 1) + "y", kVerbStems)) return true;
  return false;
}

}  // namespace detail

/// Coarse rule-based part-of-speech tag for one generated token.
///
/// Surrounding whitespace and trailing punctuation are ignored. Closed-class
/// lists win over every other rule; `sentence_initial` disables the
/// capitalized-word PROPN rule.
inline std::string tag_pos(std::string_view token_text, bool sentence_initial = false) {
  std::size_t b = 0;
  std::size_t e = token_text.size();
  while (b < e && detail::is_space(token_text[b])) ++b;
  while (e > b && detail::is_space(token_text[e - 1])) --e;
  std::string_view core = token_text.substr(b, e - b);

  auto is_alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  while (!core.empty() && !is_alnum(core.back()) && core.back() != '\'' &&
         static_cast<unsigned char>(core.back()) < 0x80) {
    core.remove_suffix(1);
  }
  while (!core.empty() && !is_alnum(core.front()) && core.front() != '\'' &&
         static_cast<unsigned char>(core.front()) < 0x80) {
    core.remove_prefix(1);
  }
  if (core.empty()) return "X";

  const std::string lower = detail::to_lower(core);
  if (detail::in_list(lower, detail::kDeterminers)) return "DET";
  if (detail::in_list(lower, detail::kAdpositions)) return "ADP";
  if (detail::in_list(lower, detail::kPronouns)) return "PRON";
  if (detail::in_list(lower, detail::kConjunctions)) return "CONJ";
  if (detail::in_list(lower, detail::kAuxiliaries)) return "AUX";

  const bool numeric = std::all_of(core.begin(), core.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == ',' || c == ':';
  }) && std::any_of(core.begin(), core.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
  });
  if (numeric) return "NUM";

  if (!sentence_initial && std::isupper(static_cast<unsigned char>(core.front()))) return "PROPN";
  if (detail::in_list(lower, detail::kAdjectives)) return "ADJ";

  auto ends_with = [&](std::string_view suffix) {
    return lower.size() > suffix.size() + 1 &&
           std::string_view(lower).substr(lower.size() - suffix.size()) == suffix;
  };
  if (ends_with("ly")) return "ADV";
  if (ends_with("ing") && detail::is_verb_stem(lower.substr(0, lower.size() - 3))) return "VERB";
  if (ends_with("ed") && detail::is_verb_stem(lower.substr(0, lower.size() - 2))) return "VERB";
  if (!std::any_of(lower.begin(), lower.end(), is_alnum)) return "X";
  return "NOUN";
}

}  // namespace omnitrace
